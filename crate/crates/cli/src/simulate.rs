use bb84_core::proto::{self, Channel, ClassicalChannel, Mode, ProtocolParams, QuantumChannel, Summary, Transcript};
use bb84_core::rng;
use serde::Serialize;

use crate::attack::{self, Source};
use crate::config::Settings;
use crate::output::{self, Format};
use crate::CliError;

pub const DEFAULTS: &[(&str, &str)] = &[
    ("n", "4"),
    ("p-allowed", "0.1"),
    ("eps-sec", "0.01"),
    ("eps-rel", "0.01"),
    ("trials", "1000"),
    ("attack", "identity"),
    ("mode", "used-bits"),
    ("symmetrize", "false"),
    ("backend", "auto"),
    ("delta-num", "0.5"),
    ("loss-tolerant", "false"),
    ("seed", "0"),
    ("format", "json"),
];

/// Largest qubit count the auto backend simulates exactly.
const AUTO_QUANTUM_QUBITS: usize = 4;

#[derive(Serialize)]
struct SimulateResult<'a> {
    backend: &'static str,
    qubits: usize,
    security_precondition: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transcript: Option<&'a Transcript>,
    summary: &'a Summary,
}

fn params(s: &Settings) -> Result<ProtocolParams, CliError> {
    let mut p = ProtocolParams::new(s.get("n")?, s.get("p-allowed")?, None)?;
    p.eps_sec = s.get("eps-sec")?;
    p.eps_rel = s.get("eps-rel")?;
    p.mode = s.get::<Mode>("mode")?;
    p.delta_num = s.get("delta-num")?;
    p.loss_tolerant = s.get("loss-tolerant")?;
    p.seed = s.seed()?;
    p.code = attack::code(s)?;
    p.validate()?;
    Ok(p)
}

fn channel(s: &Settings, p: &ProtocolParams) -> Result<(Box<dyn Channel>, &'static str, usize), CliError> {
    let src = attack::source(&s.get::<String>("attack")?)?;
    let qubits = match p.mode {
        Mode::UsedBits => 2 * p.n,
        Mode::Full => p.n_raw(),
    };
    let symmetrize: bool = s.get("symmetrize")?;
    let classical_only = matches!(src, Source::Flip(_) | Source::Loss(_));
    let backend = s.get::<String>("backend")?;
    let quantum = match backend.as_str() {
        "quantum" => true,
        "classical" => false,
        "auto" => !classical_only && (qubits <= AUTO_QUANTUM_QUBITS || symmetrize || matches!(src, Source::File(_))),
        other => return Err(CliError::usage(format!("unknown backend {other:?} (auto, quantum, classical)"))),
    };
    if quantum {
        let mut a = attack::quantum(&src, qubits, p.seed)?;
        if symmetrize {
            a = a.symmetrize()?.attack;
        }
        return Ok((Box::new(QuantumChannel::new(a)?), "quantum", qubits));
    }
    if symmetrize {
        return Err(CliError::usage("symmetrize needs the quantum backend"));
    }
    let ch = match &src {
        Source::Flip(q) => ClassicalChannel::Flip(*q),
        Source::Loss(q) => ClassicalChannel::Lossy { loss: *q, flip: 0.0 },
        Source::Preset(name) => ClassicalChannel::shadow_of(name)
            .ok_or_else(|| CliError::usage(format!("preset {name:?} has no classical model; use --backend=quantum")))?,
        Source::File(_) => return Err(CliError::usage("attack files need the quantum backend")),
    };
    Ok((Box::new(ch), "classical", qubits))
}

pub fn run(s: &Settings) -> Result<u8, CliError> {
    let format = Format::from_settings(s)?;
    let p = params(s)?;
    let trials: u64 = s.get("trials")?;
    let (ch, backend, qubits) = channel(s, &p)?;
    let summary = proto::monte_carlo(&p, ch.as_ref(), trials)?;
    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = summary
                .rows
                .iter()
                .map(|r| {
                    let keys = r.keys_equal.map_or(String::new(), |b| b.to_string());
                    vec![r.trial.to_string(), r.pass.to_string(), r.c_t.to_string(), r.c_i.to_string(), keys]
                })
                .collect();
            output::write_csv(s, &["trial", "pass", "c_t", "c_i", "keys_equal"], &rows)?;
        }
        Format::Json => {
            // the single transcript replays trial 0 of the summary
            let transcript = if trials == 1 {
                Some(proto::run(&p, ch.as_ref(), &mut rng::stream(p.seed, "trial", 0))?)
            } else {
                None
            };
            let result = SimulateResult {
                backend,
                qubits,
                security_precondition: p.security_precondition(),
                transcript: transcript.as_ref(),
                summary: &summary,
            };
            output::write_json(s, result)?;
        }
    }
    Ok(0)
}
