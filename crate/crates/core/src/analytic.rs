//! Closed-form bounds: reliability, Eve's information, random-code distance
//! failure, rates and thresholds.

use serde::Serialize;

use crate::error::{Error, Result};

/// Binary entropy in bits.
pub fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// h = e^{−n ε²/2}
pub fn reliability_bound(n: f64, eps_rel: f64) -> f64 {
    (-n * eps_rel * eps_rel / 2.0).exp()
}

/// 2m √(e^{−n ε²/2})
pub fn eve_info_bound(n: f64, m: f64, eps_sec: f64) -> f64 {
    2.0 * m * (-n * eps_sec * eps_sec / 2.0).exp().sqrt()
}

/// Distance target for the ECC: 2(p_a+ε)+1/n when t-error correction is
/// required, p_a+ε+1/n with Shannon-style decoding.
pub fn ecc_delta(n: f64, p_a: f64, eps_rel: f64, strict: bool) -> f64 {
    if strict {
        2.0 * (p_a + eps_rel) + 1.0 / n
    } else {
        p_a + eps_rel + 1.0 / n
    }
}

/// Distance target for the dual + PA code.
pub fn dual_delta(p_a: f64, eps_sec: f64) -> f64 {
    2.0 * (p_a + eps_sec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// r/n − H2(δ)
    pub ecc_slack: f64,
    /// 1 − H2(δ⊥) − r/n − R
    pub pa_slack: f64,
}

/// Checks H2(δ) < r/n and H2(δ⊥) + r/n + R < 1. `n` may be infinite.
pub fn feasibility(
    n: f64,
    p_a: f64,
    eps_sec: f64,
    eps_rel: f64,
    r_over_n: f64,
    rate: f64,
    strict: bool,
) -> Feasibility {
    let ecc_slack = r_over_n - h2(ecc_delta(n, p_a, eps_rel, strict));
    let pa_slack = 1.0 - h2(dual_delta(p_a, eps_sec)) - r_over_n - rate;
    let in_range = ecc_delta(n, p_a, eps_rel, strict) < 0.5 && dual_delta(p_a, eps_sec) < 0.5;
    Feasibility { feasible: in_range && ecc_slack > 0.0 && pa_slack > 0.0, ecc_slack, pa_slack }
}

/// Supremum of R over r/n: 1 − H2(δ⊥) − H2(δ); no positive rate is reachable when this is ≤ 0.
pub fn best_rate(n: f64, p_a: f64, eps_sec: f64, eps_rel: f64, strict: bool) -> f64 {
    1.0 - h2(dual_delta(p_a, eps_sec)) - h2(ecc_delta(n, p_a, eps_rel, strict))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ThresholdMode {
    /// 2 H2(2p) = 1
    Strict,
    /// H2(2p) + H2(p) = 1
    Relaxed,
    /// 2 H2(p) = 1
    ShorPreskill,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(ThresholdMode::Strict),
            "relaxed" => Ok(ThresholdMode::Relaxed),
            "shor-preskill" | "shor-preskill-form" => Ok(ThresholdMode::ShorPreskill),
            _ => Err(Error::Parse(format!("unknown threshold mode {s:?}"))),
        }
    }
}

/// Left side minus one of the threshold equation.
pub fn threshold_residual(mode: ThresholdMode, p: f64) -> f64 {
    match mode {
        ThresholdMode::Strict => 2.0 * h2(2.0 * p) - 1.0,
        ThresholdMode::Relaxed => h2(2.0 * p) + h2(p) - 1.0,
        ThresholdMode::ShorPreskill => 2.0 * h2(p) - 1.0,
    }
}

/// Root of the threshold equation by bisection on the increasing branch.
pub fn solve_threshold(mode: ThresholdMode) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.25);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if threshold_residual(mode, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// R = rhs − H2(2p+2ε) − H2(2p+2ε+1/n); negative means out of range.
pub fn max_rate(n: f64, p_a: f64, eps: f64, rhs: f64) -> f64 {
    let x = 2.0 * p_a + 2.0 * eps;
    rhs - h2(x) - h2(x + 1.0 / n)
}

/// c(δ) = (1/(1−2δ)) √((1−δ)/(2πδ))
pub fn c_delta(delta: f64) -> f64 {
    (1.0 / (1.0 - 2.0 * delta)) * ((1.0 - delta) / (2.0 * std::f64::consts::PI * delta)).sqrt()
}

/// Upper bound on P[d/n < δ] for a random code with `r_dim` parity checks.
pub fn gallager_g(n: usize, r_dim: usize, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    if delta >= 0.5 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    c_delta(delta) / nf.sqrt() * 2f64.powf(nf * (h2(delta) - r_dim as f64 / nf))
}

/// Split of the exponential security bound into an information part and a luck part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Split {
    pub a_info: f64,
    pub beta_info: f64,
    pub a_luck: f64,
    pub beta_luck: f64,
}

impl Split {
    pub fn even(m: f64, eps_sec: f64) -> Split {
        let a = (2.0 * m).sqrt();
        let beta = eps_sec * eps_sec / 8.0;
        Split { a_info: a, beta_info: beta, a_luck: a, beta_luck: beta }
    }

    /// Split with a chosen A_info and β_info; the luck part takes the rest.
    pub fn with_info(m: f64, eps_sec: f64, a_info: f64, beta_info: f64) -> Result<Split> {
        let beta_luck = eps_sec * eps_sec / 4.0 - beta_info;
        if a_info <= 0.0 || beta_info < 0.0 || beta_luck < 0.0 {
            return Err(Error::InvalidParameter("split must have A > 0 and 0 ≤ β_info ≤ ε²/4".into()));
        }
        Ok(Split { a_info, beta_info, a_luck: 2.0 * m / a_info, beta_luck })
    }

    /// A_info·A_luck·e^{−(β_info+β_luck)n}
    pub fn product(&self, n: f64) -> f64 {
        self.a_info * self.a_luck * (-(self.beta_info + self.beta_luck) * n).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub p_allowed: f64,
    pub eps_sec: f64,
    pub eps_rel: f64,
    pub m: usize,
    pub r: usize,
    pub h: f64,
    pub eve_bound: f64,
    pub g1: f64,
    pub g2: f64,
    pub a_info: f64,
    pub beta_info: f64,
    pub a_luck: f64,
    pub beta_luck: f64,
    pub r_secret: f64,
    pub feasible: bool,
    pub ecc_slack: f64,
    pub pa_slack: f64,
}

pub fn bound_report(
    n: usize,
    p_a: f64,
    eps_sec: f64,
    eps_rel: f64,
    m: usize,
    r: usize,
    split: Option<Split>,
) -> Result<BoundReport> {
    if n == 0 || r + m > n {
        return Err(Error::InvalidParameter(format!("need 0 < n and r + m ≤ n (n={n}, r={r}, m={m})")));
    }
    if !(0.0..0.5).contains(&p_a) || eps_sec <= 0.0 || eps_rel <= 0.0 {
        return Err(Error::InvalidParameter("need p_allowed in [0, 0.5) and positive epsilons".into()));
    }
    let nf = n as f64;
    let split = split.unwrap_or_else(|| Split::even(m as f64, eps_sec));
    let rate = m as f64 / nf;
    let f = feasibility(nf, p_a, eps_sec, eps_rel, r as f64 / nf, rate, true);
    Ok(BoundReport {
        n,
        p_allowed: p_a,
        eps_sec,
        eps_rel,
        m,
        r,
        h: reliability_bound(nf, eps_rel),
        eve_bound: eve_info_bound(nf, m as f64, eps_sec),
        g1: gallager_g(n, r, ecc_delta(nf, p_a, eps_rel, true)),
        g2: gallager_g(n, n - r - m, dual_delta(p_a, eps_sec)),
        a_info: split.a_info,
        beta_info: split.beta_info,
        a_luck: split.a_luck,
        beta_luck: split.beta_luck,
        r_secret: rate,
        feasible: f.feasible,
        ecc_slack: f.ecc_slack,
        pa_slack: f.pa_slack,
    })
}

pub const TABLE_EPS: [f64; 3] = [0.005, 0.01, 0.02];
pub const TABLE_N: [u64; 5] = [12_500, 50_000, 200_000, 800_000, 3_200_000];
pub const TABLE_P: [f64; 3] = [0.02, 0.035, 0.05];
/// Block length at which the rate rows are evaluated.
pub const TABLE_RATE_N: f64 = 3_200_000.0;
const RHS: f64 = 0.99;
const RHS_EDGE: f64 = 0.9999;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateCell {
    /// R_secret as a fraction
    pub rate: f64,
    /// Solved with the 0.9999 constant because 2p+2ε sits at 11%.
    pub edge: bool,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1 {
    /// [n][ε]; `None` where the grid has no entry
    pub reliability: Vec<Vec<Option<f64>>>,
    /// [p_a][ε]
    pub rates: Vec<Vec<RateCell>>,
}

fn reliability_present(n: u64, eps: f64) -> bool {
    !((n == 12_500 && eps == 0.005) || (n == 3_200_000 && eps == 0.02))
}

pub fn rate_cell(p_a: f64, eps: f64) -> RateCell {
    let edge = (2.0 * p_a + 2.0 * eps - 0.11).abs() < 1e-12;
    let rate = max_rate(TABLE_RATE_N, p_a, eps, if edge { RHS_EDGE } else { RHS });
    RateCell { rate, edge, feasible: rate > 0.0 }
}

pub fn table1() -> Table1 {
    let reliability = TABLE_N
        .iter()
        .map(|&n| {
            TABLE_EPS.iter().map(|&e| reliability_present(n, e).then(|| reliability_bound(n as f64, e))).collect()
        })
        .collect();
    let rates = TABLE_P.iter().map(|&p| TABLE_EPS.iter().map(|&e| rate_cell(p, e)).collect()).collect();
    Table1 { reliability, rates }
}

/// Compact display: "0.54", "1/12", "4e-18", "~1e-70".
pub fn format_probability(x: f64) -> String {
    if x >= 0.5 {
        format!("{x:.2}")
    } else if x >= 1e-6 {
        format!("1/{}", (1.0 / x).round())
    } else {
        let k = x.log10().floor();
        let mant = x / 10f64.powf(k);
        if k >= -30.0 {
            format!("{}e{}", mant.round(), k)
        } else {
            format!("~1e{k}")
        }
    }
}

pub fn format_rate(c: &RateCell) -> String {
    if !c.feasible {
        return "out of range".to_string();
    }
    let pct = 100.0 * c.rate;
    let s = if pct >= 1.0 { format!("{pct:.1}%") } else { format!("{pct:.3}%") };
    if c.edge {
        s + "*"
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert_eq!(h2(0.5), 1.0);
        assert_eq!(h2(0.0), 0.0);
        assert_eq!(h2(1.0), 0.0);
        assert!((h2(0.05) - 0.28640).abs() < 1e-5);
    }

    #[test]
    fn reliability_values() {
        assert!((reliability_bound(50_000.0, 0.01) - 0.0821).abs() < 1e-4);
        assert!((1.0 / reliability_bound(200_000.0, 0.01) - 22026.47).abs() < 0.01);
        assert_eq!(reliability_bound(123.0, 0.0), 1.0);
    }

    #[test]
    fn eve_bound_values() {
        assert_eq!(eve_info_bound(1e5, 0.0, 0.01), 0.0);
        assert!((eve_info_bound(200_000.0, 1.0, 0.01) - 2.0 * (-5f64).exp()).abs() < 1e-15);
        assert!((eve_info_bound(200_000.0, 1.0, 0.01) - 0.01348).abs() < 1e-5);
        assert_eq!(eve_info_bound(1e4, 6.0, 0.02), 2.0 * eve_info_bound(1e4, 3.0, 0.02));
    }

    #[test]
    fn asymptotic_feasibility() {
        for k in 1..250 {
            let p = k as f64 * 0.001;
            let strict = best_rate(f64::INFINITY, p, 0.0, 0.0, true) > 0.0;
            assert_eq!(strict, 2.0 * h2(2.0 * p) < 1.0, "p={p}");
            let relaxed = best_rate(f64::INFINITY, p, 0.0, 0.0, false) > 0.0;
            assert_eq!(relaxed, h2(2.0 * p) + h2(p) < 1.0, "p={p}");
        }
        assert!(2.0 * h2(0.2) > 1.4);
        for r in 1..100 {
            assert!(!feasibility(f64::INFINITY, 0.10, 1e-9, 1e-9, r as f64 / 100.0, 0.0, true).feasible);
        }
        assert!(feasibility(f64::INFINITY, 0.02, 0.001, 0.001, 0.35, 0.01, true).feasible);
    }

    #[test]
    fn thresholds() {
        let s = solve_threshold(ThresholdMode::Strict);
        let r = solve_threshold(ThresholdMode::Relaxed);
        let sp = solve_threshold(ThresholdMode::ShorPreskill);
        assert!((s - 0.05501).abs() < 1e-4);
        assert!((r - 0.0756).abs() < 1e-4);
        assert!((sp - 0.1100).abs() < 1e-4);
        for (mode, p) in [(ThresholdMode::Strict, s), (ThresholdMode::Relaxed, r), (ThresholdMode::ShorPreskill, sp)] {
            assert!(threshold_residual(mode, p).abs() <= 1e-9);
        }
        assert_eq!("relaxed".parse::<ThresholdMode>().unwrap(), ThresholdMode::Relaxed);
        assert!("other".parse::<ThresholdMode>().is_err());
    }

    #[test]
    fn rates() {
        assert!((max_rate(1e9, 0.02, 0.005, 0.99) - 0.417).abs() < 1e-3);
        assert!((max_rate(1e9, 0.035, 0.01, 0.99) - 0.117).abs() < 1e-3);
        assert!(max_rate(1e9, 0.05, 0.01, 0.99) < 0.0);
    }

    #[test]
    fn gallager_values() {
        assert_eq!(gallager_g(20, 8, 0.0), 0.0);
        let d: f64 = 0.2;
        let c = (1.0 / (1.0 - 2.0 * d)) * ((1.0 - d) / (2.0 * std::f64::consts::PI * d)).sqrt();
        let want = c / 20f64.sqrt() * 2f64.powf(20.0 * (h2(d) - 0.4));
        assert!((gallager_g(20, 8, d) - want).abs() < 1e-12);
        let mut last = 0.0;
        for k in 1..50 {
            let g = gallager_g(20, 8, k as f64 / 100.0);
            assert!(g > last);
            last = g;
        }
    }

    #[test]
    fn table_shape() {
        let t = table1();
        assert_eq!(t.reliability[0][0], None);
        assert_eq!(t.reliability[4][2], None);
        assert_eq!(t.reliability.iter().flatten().filter(|c| c.is_some()).count(), 13);
        assert!(t.rates[1][2].edge && t.rates[2][0].edge);
        assert!(!t.rates[2][1].feasible && !t.rates[2][2].feasible);
        assert_eq!(format_probability(reliability_bound(12_500.0, 0.01)), "0.54");
        assert_eq!(format_probability(reliability_bound(50_000.0, 0.01)), "1/12");
        assert_eq!(format_probability(reliability_bound(200_000.0, 0.01)), "1/22026");
        assert_eq!(format_probability(reliability_bound(200_000.0, 0.02)), "4e-18");
        assert_eq!(format_probability(reliability_bound(800_000.0, 0.02)), "~1e-70");
        assert_eq!(format_rate(&t.rates[0][0]), "41.7%");
    }

    #[test]
    fn default_split() {
        let r = bound_report(200_000, 0.02, 0.01, 0.01, 3, 50_000, None).unwrap();
        assert!((r.a_info * r.a_luck - 6.0).abs() < 1e-12);
        assert!((r.beta_info + r.beta_luck - 0.01f64.powi(2) / 4.0).abs() < 1e-18);
        assert!(bound_report(10, 0.02, 0.01, 0.01, 6, 6, None).is_err());
    }

    proptest! {
        #[test]
        fn split_identities(m in 1usize..50, eps in 0.001f64..0.1, n in 100usize..100_000, a in 0.1f64..10.0, t in 0.0f64..1.0) {
            let s = Split::with_info(m as f64, eps, a, t * eps * eps / 4.0).unwrap();
            let nf = n as f64;
            let bound = eve_info_bound(nf, m as f64, eps);
            let prod = s.product(nf);
            prop_assert!((prod - bound).abs() <= 1e-12 * bound);
            let lhs = bound / s.a_info * (s.beta_info * nf).exp();
            let rhs = s.a_luck * (-s.beta_luck * nf).exp();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }
    }
}
