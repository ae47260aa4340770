//! Used-bits BB84 simulator and analyzer.
//!
//! Small exact state-vector simulation of joint attacks, the symmetrized
//! attack construction, the information-vs-disturbance spectrum, GF(2)
//! code tooling and the closed-form bounds used to size a key exchange.

pub mod analytic;
pub mod bits;
pub mod error;
pub mod evemodel;
pub mod gf2code;
pub mod proto;
pub mod qstate;
pub mod rng;
pub mod secbound;

pub use bits::BitString;
pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
