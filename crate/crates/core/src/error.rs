use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: usize, cap: usize },
    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix difference is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("impossible transcript: conditioning event has probability {0:e}")]
    ImpossibleTranscript(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rank deficient: rank {rank}, need {need}")]
    RankDeficient { rank: usize, need: usize },
    #[error("privacy amplification row lies in the dual code; key bit would be public")]
    PublicKeyBit,
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown preset: {0}")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
