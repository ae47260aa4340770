use bb84_core::gf2code::{CodeSpec, Gf2Matrix};
use bb84_core::secbound::{self, SpectrumReport};
use bb84_core::BitString;
use serde::Serialize;

use crate::attack;
use crate::config::Settings;
use crate::output::{self, Format};
use crate::CliError;

pub const DEFAULTS: &[(&str, &str)] =
    &[("n", "1"), ("attack", "random"), ("symmetrize", "false"), ("v-index", "0"), ("seed", "0"), ("format", "json")];

const ORDER_TOL: f64 = 1e-9;

#[derive(Serialize)]
struct AnalyzeResult {
    symmetrized: bool,
    code: CodeSummary,
    /// helstrom ≤ exact ≤ min(1, tight) ≤ loose
    ordered: bool,
    /// max |d²_l − conjugate-basis error law|; absent when that context is impossible
    spectrum_vs_conjugate_law: Option<f64>,
    #[serde(flatten)]
    report: SpectrumReport,
}

#[derive(Serialize)]
struct CodeSummary {
    n: usize,
    r: usize,
    m: usize,
    d: Option<usize>,
    d_perp: Option<usize>,
    v_hat: Option<usize>,
}

/// P_PA = all ones, no parity checks.
fn parity_code(n: usize) -> Result<CodeSpec, CliError> {
    Ok(CodeSpec::new(Gf2Matrix::empty(n), Gf2Matrix::new(n, vec![BitString::ones(n)])?)?)
}

pub fn run(s: &Settings) -> Result<u8, CliError> {
    let format = Format::from_settings(s)?;
    let n: usize = s.get("n")?;
    if n == 0 {
        return Err(CliError::usage("n must be positive"));
    }
    let symmetrize: bool = s.get("symmetrize")?;
    let src = attack::source(&s.get::<String>("attack")?)?;
    let mut a = attack::quantum(&src, 2 * n, s.seed()?)?;
    if symmetrize {
        a = a.symmetrize()?.attack;
    }
    let code = match attack::code(s)? {
        Some(c) => c,
        None => parity_code(n)?,
    };
    if code.n != n {
        return Err(CliError::usage(format!("code has n = {}, attack-analyze has n = {n}", code.n)));
    }
    let b = attack::bits(s, "b", 2 * n)?;
    let subset = match s.raw("s") {
        Some(_) => attack::bits(s, "s", 2 * n)?,
        None => BitString::zeros(n).concat(&BitString::ones(n)),
    };
    if subset.weight() != n {
        return Err(CliError::usage("s must mark exactly n information bits"));
    }
    let it = attack::bits(s, "i-t", n)?;
    let jt = attack::bits(s, "j-t", n)?;
    let xi = attack::bits(s, "xi", code.r)?;
    let v_index: usize = s.get("v-index")?;
    if v_index >= code.m {
        return Err(CliError::usage(format!("v-index {v_index} out of range (m = {})", code.m)));
    }

    let table = a.conditional_probes(&b, &subset, &it, &jt)?;
    let report = secbound::analyze(&table, &code, &xi, v_index)?;
    let spectrum = secbound::eta_spectrum(&secbound::purify(&table)?)?;
    let law_gap = a.conditional_probes(&b.xor(&subset), &subset, &it, &jt).ok().map(|t| {
        let conj = t.averaged_error_law();
        spectrum.d2.iter().zip(&conj).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    });
    let result = AnalyzeResult {
        symmetrized: symmetrize,
        code: CodeSummary { n: code.n, r: code.r, m: code.m, d: code.d, d_perp: code.d_perp, v_hat: code.v_hat },
        ordered: report.bounds.ordered(ORDER_TOL),
        spectrum_vs_conjugate_law: law_gap,
        report,
    };
    match format {
        Format::Json => output::write_json(s, result)?,
        Format::Csv => {
            let b = &result.report.bounds;
            let mut rows: Vec<Vec<String>> =
                result.report.d2.iter().map(|(l, v)| vec![format!("d2[{l}]"), v.to_string()]).collect();
            for (k, v) in [
                ("tight", b.tight),
                ("tight_capped", b.tight_capped),
                ("loose", b.loose),
                ("exact", b.exact),
                ("helstrom", b.helstrom),
                ("m_bit", b.m_bit),
                ("eta_orthogonality", result.report.eta_orthogonality),
            ] {
                rows.push(vec![k.to_string(), v.to_string()]);
            }
            rows.push(vec!["ordered".into(), result.ordered.to_string()]);
            output::write_csv(s, &["quantity", "value"], &rows)?;
        }
    }
    Ok(0)
}
