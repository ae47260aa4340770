use bb84_core::analytic::{self, BoundReport, TABLE_EPS, TABLE_N, TABLE_P};
use serde::Serialize;

use crate::config::Settings;
use crate::output::{self, Format};
use crate::CliError;

pub const BOUNDS_DEFAULTS: &[(&str, &str)] = &[
    ("n", "200000"),
    ("p-allowed", "0.02"),
    ("eps-sec", "0.01"),
    ("eps-rel", "0.01"),
    ("m", "1"),
    ("seed", "0"),
    ("format", "json"),
];

pub const TABLE1_DEFAULTS: &[(&str, &str)] = &[("seed", "0"), ("format", "json")];

#[derive(Serialize)]
struct BoundsResult {
    #[serde(flatten)]
    report: BoundReport,
    reliability_display: String,
    /// 0.99 − H2(2p+2ε) − H2(2p+2ε+1/n) with ε = eps-sec
    table_rule_rate: f64,
    table_rule_feasible: bool,
    /// 1 − H2(δ⊥) − H2(δ), the supremum over r/n
    best_rate: f64,
}

/// Smallest r with r/n > H2(2(p+ε)+1/n), capped at n − m.
fn default_r(n: usize, p_a: f64, eps_rel: f64, m: usize) -> usize {
    let nf = n as f64;
    let need = (nf * analytic::h2(analytic::ecc_delta(nf, p_a, eps_rel, true))).floor() as usize + 1;
    need.min(n.saturating_sub(m))
}

pub fn bounds(s: &Settings) -> Result<u8, CliError> {
    let format = Format::from_settings(s)?;
    let n: usize = s.get("n")?;
    let p_a: f64 = s.get("p-allowed")?;
    let eps_sec: f64 = s.get("eps-sec")?;
    let eps_rel: f64 = s.get("eps-rel")?;
    let m: usize = s.get("m")?;
    let r = match s.opt::<usize>("r")? {
        Some(r) => r,
        None => default_r(n, p_a, eps_rel, m),
    };
    let report = analytic::bound_report(n, p_a, eps_sec, eps_rel, m, r, None)?;
    let nf = n as f64;
    let rule = analytic::max_rate(nf, p_a, eps_sec, 0.99);
    let result = BoundsResult {
        reliability_display: analytic::format_probability(report.h),
        table_rule_rate: rule,
        table_rule_feasible: rule > 0.0,
        best_rate: analytic::best_rate(nf, p_a, eps_sec, eps_rel, true),
        report,
    };
    match format {
        Format::Json => output::write_json(s, result)?,
        Format::Csv => {
            let v = serde_json::to_value(&result).map_err(|e| CliError::runtime(e.to_string()))?;
            let rows: Vec<Vec<String>> = v
                .as_object()
                .expect("struct serializes to an object")
                .iter()
                .map(|(k, v)| vec![k.clone(), v.as_str().map_or_else(|| v.to_string(), str::to_string)])
                .collect();
            output::write_csv(s, &["quantity", "value"], &rows)?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ReliabilityEntry {
    n: u64,
    eps: f64,
    value: f64,
    display: String,
}

#[derive(Serialize)]
struct RateEntry {
    p_allowed: f64,
    eps: f64,
    rate: f64,
    edge: bool,
    feasible: bool,
    display: String,
}

#[derive(Serialize)]
struct Table1Result {
    reliability: Vec<ReliabilityEntry>,
    rates: Vec<RateEntry>,
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

pub fn table1(s: &Settings) -> Result<u8, CliError> {
    let format = Format::from_settings(s)?;
    let t = analytic::table1();
    match format {
        Format::Json => {
            let mut reliability = Vec::new();
            for (row, &n) in t.reliability.iter().zip(&TABLE_N) {
                for (cell, &eps) in row.iter().zip(&TABLE_EPS) {
                    if let Some(v) = cell {
                        reliability.push(ReliabilityEntry {
                            n,
                            eps,
                            value: *v,
                            display: analytic::format_probability(*v),
                        });
                    }
                }
            }
            let mut rates = Vec::new();
            for (row, &p) in t.rates.iter().zip(&TABLE_P) {
                for (c, &eps) in row.iter().zip(&TABLE_EPS) {
                    rates.push(RateEntry {
                        p_allowed: p,
                        eps,
                        rate: c.rate,
                        edge: c.edge,
                        feasible: c.feasible,
                        display: analytic::format_rate(c),
                    });
                }
            }
            output::write_json(s, Table1Result { reliability, rates })?;
        }
        Format::Csv => {
            let mut header = vec!["section".to_string(), "row".to_string()];
            header.extend(TABLE_EPS.iter().map(|&e| format!("eps={}", pct(e))));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut rows = Vec::new();
            for (row, &n) in t.reliability.iter().zip(&TABLE_N) {
                let mut r = vec!["reliability".to_string(), format!("n={n}")];
                r.extend(row.iter().map(|c| c.map_or(String::new(), analytic::format_probability)));
                rows.push(r);
            }
            for (row, &p) in t.rates.iter().zip(&TABLE_P) {
                let mut r = vec!["rate".to_string(), format!("p_allowed={}", pct(p))];
                r.extend(row.iter().map(analytic::format_rate));
                rows.push(r);
            }
            output::write_csv(s, &header, &rows)?;
        }
    }
    Ok(0)
}
