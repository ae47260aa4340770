use std::path::PathBuf;

use bb84_core::analytic;
use bb84_core::gf2code::CodeSpec;
use bb84_core::rng;
use serde::Serialize;

use crate::config::Settings;
use crate::output;
use crate::CliError;

pub const DEFAULTS: &[(&str, &str)] = &[
    ("n", "8"),
    ("r", "3"),
    ("m", "1"),
    ("p-allowed", "0.02"),
    ("eps-sec", "0.01"),
    ("eps-rel", "0.01"),
    ("seed", "0"),
    ("format", "json"),
];

/// Exit code when v̂ falls short of 2n(p_a + ε_sec).
pub const WARN_EXIT: u8 = 3;

#[derive(Serialize)]
struct Gallager {
    delta: f64,
    /// bound on P[d < δ n] for a random P_C
    g1: f64,
    delta_perp: f64,
    /// bound on P[d⊥ < δ⊥ n] for the random P_C + P_PA rows
    g2: f64,
}

#[derive(Serialize)]
pub struct Certificate {
    /// all distances were found by enumeration
    exact: bool,
    d: Option<usize>,
    d_perp: Option<usize>,
    v_hat: Option<usize>,
    v_hat_required: f64,
    meets_requirement: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gallager: Option<Gallager>,
    rows: Vec<String>,
}

pub fn certificate(code: &CodeSpec, p_a: f64, eps_sec: f64, eps_rel: f64) -> Certificate {
    let exact = code.d_perp.is_some() && code.v_hat.is_some() && (code.d.is_some() || code.r == 0);
    let required = 2.0 * code.n as f64 * (p_a + eps_sec);
    let nf = code.n as f64;
    let gallager = (!exact).then(|| {
        let delta = analytic::ecc_delta(nf, p_a, eps_rel, true);
        let delta_perp = analytic::dual_delta(p_a, eps_sec);
        Gallager {
            delta,
            g1: analytic::gallager_g(code.n, code.r, delta),
            delta_perp,
            g2: analytic::gallager_g(code.n, code.n - code.r - code.m, delta_perp),
        }
    });
    Certificate {
        exact,
        d: code.d,
        d_perp: code.d_perp,
        v_hat: code.v_hat,
        v_hat_required: required,
        meets_requirement: code.v_hat.map(|v| v as f64 >= required - 1e-9),
        gallager,
        rows: code.all_rows().rows().iter().map(|r| r.to_string()).collect(),
    }
}

fn opt(v: Option<usize>) -> String {
    v.map_or("unknown".into(), |x| x.to_string())
}

pub fn run(s: &Settings) -> Result<u8, CliError> {
    let n: usize = s.get("n")?;
    let r: usize = s.get("r")?;
    let m: usize = s.get("m")?;
    let p_a: f64 = s.get("p-allowed")?;
    let eps_sec: f64 = s.get("eps-sec")?;
    let eps_rel: f64 = s.get("eps-rel")?;
    if n == 0 || n > 63 {
        return Err(CliError::usage("n must be in 1..=63"));
    }
    let code = CodeSpec::random(n, r, m, &mut rng::stream(s.seed()?, "codegen", 0))?;
    let cert = certificate(&code, p_a, eps_sec, eps_rel);

    let mut text = code.to_text();
    text.push_str(&output::preamble(s));
    text.push_str(&format!(
        "# d = {}, d_perp = {}, v_hat = {}, exact = {}\n",
        opt(code.d),
        opt(code.d_perp),
        opt(code.v_hat),
        cert.exact
    ));
    let out = output::out_path(s);
    output::emit(out.as_deref(), &text)?;
    if let Some(path) = out {
        let mut cert_path = path.clone().into_os_string();
        cert_path.push(".cert.json");
        let v = output::envelope(s, &cert)?;
        let body = serde_json::to_string_pretty(&v).map_err(|e| CliError::runtime(e.to_string()))? + "\n";
        output::emit(Some(&PathBuf::from(cert_path)), &body)?;
    }
    if cert.meets_requirement == Some(false) {
        eprintln!(
            "bb84: warning: v_hat = {} is below 2n(p_allowed + eps_sec) = {:.3}",
            opt(code.v_hat),
            cert.v_hat_required
        );
        return Ok(WARN_EXIT);
    }
    Ok(0)
}
