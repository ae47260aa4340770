//! Resolving --attack and --code values.

use std::path::Path;

use bb84_core::evemodel::{self, AttackJson, AttackSpec};
use bb84_core::gf2code::CodeSpec;
use bb84_core::{rng, BitString};

use crate::config::Settings;
use crate::CliError;

#[derive(Clone, Debug)]
pub enum Source {
    Preset(String),
    File(AttackSpec),
    /// independent flips with probability p
    Flip(f64),
    /// loss with probability p, no flips
    Loss(f64),
}

fn read(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {what} {}: {e}", path.display())))
}

pub fn source(name: &str) -> Result<Source, CliError> {
    let rate = |v: &str| {
        v.parse::<f64>()
            .ok()
            .filter(|p| (0.0..=1.0).contains(p))
            .ok_or_else(|| CliError::usage(format!("bad probability in attack {name:?}")))
    };
    if let Some(v) = name.strip_prefix("flip:") {
        return Ok(Source::Flip(rate(v)?));
    }
    if let Some(v) = name.strip_prefix("loss:") {
        return Ok(Source::Loss(rate(v)?));
    }
    if evemodel::PRESETS.contains(&name) {
        return Ok(Source::Preset(name.to_string()));
    }
    let path = Path::new(name);
    if path.exists() || name.ends_with(".json") || name.contains('/') {
        let j: AttackJson = serde_json::from_str(&read(path, "attack")?)
            .map_err(|e| CliError::usage(format!("bad attack file {name}: {e}")))?;
        return Ok(Source::File(AttackSpec::from_json(&j)?));
    }
    Err(CliError::usage(format!(
        "unknown attack {name:?}; presets: {}, or flip:<p>, loss:<p>, or a JSON file",
        evemodel::PRESETS.join(", ")
    )))
}

/// Unitary model on `n_qubits` qubits. The `random` preset draws from (seed, "attack", 0).
pub fn quantum(src: &Source, n_qubits: usize, seed: u64) -> Result<AttackSpec, CliError> {
    match src {
        Source::Preset(name) => Ok(evemodel::preset(name, n_qubits, &mut rng::stream(seed, "attack", 0))?),
        Source::File(a) => {
            if a.n_qubits() != n_qubits {
                return Err(CliError::usage(format!(
                    "attack file acts on {} qubits, this run needs {n_qubits}",
                    a.n_qubits()
                )));
            }
            Ok(a.clone())
        }
        Source::Flip(_) | Source::Loss(_) => Err(CliError::usage("flip:/loss: attacks are classical only")),
    }
}

pub fn code(s: &Settings) -> Result<Option<CodeSpec>, CliError> {
    let Some(path) = s.raw("code") else { return Ok(None) };
    let text = read(Path::new(path), "code file")?;
    Ok(Some(text.parse::<CodeSpec>()?))
}

/// Bit-string setting of length `len`, zeros when unset.
pub fn bits(s: &Settings, key: &str, len: usize) -> Result<BitString, CliError> {
    match s.raw(key) {
        None => Ok(BitString::zeros(len)),
        Some(v) => {
            let b: BitString = v.parse()?;
            if b.len() != len {
                return Err(CliError::usage(format!("{key} must have {len} bits, got {}", b.len())));
            }
            Ok(b)
        }
    }
}
