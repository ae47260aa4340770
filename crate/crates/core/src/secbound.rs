//! Eve's purified states, their Fourier (η) decomposition and the bounds on
//! what she learns about one privacy-amplification parity.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::evemodel::ProbeTable;
use crate::gf2code::{span_elements, CodeSpec, Gf2Matrix};
use crate::qstate::{trace_norm_distance, CMatrix, DensityMatrix, StateVector, C64};

/// Public data fixing Eve's conditional probes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Context {
    pub i_t: BitString,
    pub j_t: BitString,
    pub b: BitString,
    pub s: BitString,
}

/// |φ_i⟩ = Σ_j |E_{i,j}⟩|i⊕j⟩, one per information string i.
#[derive(Clone, Debug)]
pub struct PurifiedFamily {
    pub n_info: usize,
    pub phi: Vec<StateVector>,
    pub context: Context,
}

pub fn purify(table: &ProbeTable) -> Result<PurifiedFamily> {
    let n = table.n_info;
    let mut phi = Vec::with_capacity(1 << n);
    for (i, row) in table.probes.iter().enumerate() {
        let mut dims = row[0].dims().to_vec();
        dims.extend(std::iter::repeat_n(2, n));
        let mut acc = StateVector::zero(dims)?;
        for (j, e) in row.iter().enumerate() {
            let c = BitString::from_index((i ^ j) as u64, n);
            acc = acc.add(&e.tensor(&StateVector::from_bits(&c)?)?)?;
        }
        phi.push(acc);
    }
    Ok(PurifiedFamily {
        n_info: n,
        phi,
        context: Context { i_t: table.i_t.clone(), j_t: table.j_t.clone(), b: table.b.clone(), s: table.s.clone() },
    })
}

impl PurifiedFamily {
    /// ⟨φ_l|φ_{l⊕k}⟩ indexed [l][k].
    pub fn overlaps(&self) -> Result<Vec<Vec<C64>>> {
        let k = self.phi.len();
        (0..k).map(|l| (0..k).map(|x| self.phi[l].inner(&self.phi[l ^ x])).collect()).collect()
    }
}

fn sign(parity: bool) -> f64 {
    if parity {
        -1.0
    } else {
        1.0
    }
}

fn dot_index(a: usize, b: usize) -> bool {
    (a & b).count_ones() % 2 == 1
}

#[derive(Clone, Debug)]
pub struct EtaSpectrum {
    pub n_info: usize,
    pub eta: Vec<StateVector>,
    pub d2: Vec<f64>,
}

/// η_i = 2^{-n} Σ_l (−1)^{i·l} φ_l and d_i² = ‖η_i‖².
pub fn eta_spectrum(fam: &PurifiedFamily) -> Result<EtaSpectrum> {
    let k = fam.phi.len();
    let w = 1.0 / k as f64;
    let mut eta = Vec::with_capacity(k);
    for i in 0..k {
        let mut acc = StateVector::zero(fam.phi[0].dims().to_vec())?;
        for (l, p) in fam.phi.iter().enumerate() {
            acc = acc.add(&p.scaled(C64::new(w * sign(dot_index(i, l)), 0.0)))?;
        }
        eta.push(acc);
    }
    let d2 = eta.iter().map(StateVector::norm_sqr).collect();
    Ok(EtaSpectrum { n_info: fam.n_info, eta, d2 })
}

impl EtaSpectrum {
    /// max_i ‖φ_i − Σ_l (−1)^{i·l} η_l‖
    pub fn residual(&self, fam: &PurifiedFamily) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, p) in fam.phi.iter().enumerate() {
            let mut acc = p.clone();
            for (l, e) in self.eta.iter().enumerate() {
                acc = acc.sub(&e.scaled(C64::new(sign(dot_index(i, l)), 0.0)))?;
            }
            worst = worst.max(acc.norm());
        }
        Ok(worst)
    }

    pub fn gram(&self) -> Result<CMatrix> {
        let k = self.eta.len();
        let mut g = CMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                g[(a, b)] = self.eta[a].inner(&self.eta[b])?;
            }
        }
        Ok(g)
    }

    /// max_{i≠j} |⟨η_j|η_i⟩|
    pub fn orthogonality_defect(&self) -> Result<f64> {
        let g = self.gram()?;
        let mut worst: f64 = 0.0;
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                if a != b {
                    worst = worst.max(g[(a, b)].norm());
                }
            }
        }
        Ok(worst)
    }

    pub fn total(&self) -> f64 {
        self.d2.iter().sum()
    }

    /// Σ_{|l| ≥ v̂/2} d_l²
    pub fn tail(&self, v_hat: usize) -> f64 {
        self.d2.iter().enumerate().filter(|(l, _)| 2 * l.count_ones() as usize >= v_hat).map(|(_, d)| d).sum()
    }

    pub fn d2_map(&self) -> BTreeMap<String, f64> {
        self.d2
            .iter()
            .enumerate()
            .map(|(l, d)| (BitString::from_index(l as u64, self.n_info).to_string(), *d))
            .collect()
    }
}

/// Eve's states for key parity 0 and 1 of one PA row, given the ECC syndrome ξ.
#[derive(Clone, Debug)]
pub struct ParityEnsemble {
    pub xi: BitString,
    pub v: BitString,
    pub members: usize,
    pub rho0: DensityMatrix,
    pub rho1: DensityMatrix,
}

pub fn parity_ensembles(
    fam: &PurifiedFamily,
    code: &CodeSpec,
    xi: &BitString,
    v_index: usize,
) -> Result<ParityEnsemble> {
    if code.n != fam.n_info {
        return Err(Error::LengthMismatch { expected: fam.n_info, got: code.n });
    }
    if v_index >= code.m {
        return Err(Error::InvalidParameter(format!("PA row {v_index} out of range (m = {})", code.m)));
    }
    let v = code.pa.row(v_index).clone();
    if code.distance_to_dual(&v)? == 0 {
        return Err(Error::PublicKeyBit);
    }
    let dims = fam.phi[0].dims().to_vec();
    let mut rho = [DensityMatrix::zeros(dims.clone()), DensityMatrix::zeros(dims)];
    let coset = code.coset(xi)?;
    let w = 2.0 / coset.len() as f64;
    let mut counts = [0usize; 2];
    for i in &coset {
        let a = i.dot(&v) as usize;
        rho[a].add_pure(&fam.phi[i.to_index() as usize], w)?;
        counts[a] += 1;
    }
    debug_assert_eq!(counts[0], counts[1]);
    let [rho0, rho1] = rho;
    Ok(ParityEnsemble { xi: xi.clone(), v, members: counts[0], rho0, rho1 })
}

/// ½ Tr|ρ_0 − ρ_1|
pub fn sd_exact_bound(ens: &ParityEnsemble) -> Result<f64> {
    Ok(0.5 * trace_norm_distance(&ens.rho0, &ens.rho1)?)
}

/// 2 √(Σ_{|l| ≥ v̂/2} d_l²), unclamped.
pub fn sd_tight_bound(spec: &EtaSpectrum, v_hat: usize) -> f64 {
    2.0 * spec.tail(v_hat).sqrt()
}

/// 2^{r+1} √(Σ_{|l| ≥ v̂/2} d_l²)
pub fn sd_loose_bound(spec: &EtaSpectrum, v_hat: usize, r: usize) -> f64 {
    2f64.powi(r as i32 + 1) * spec.tail(v_hat).sqrt()
}

/// 2m √(P[|C_I| ≥ v̂/2]) with the probability read off the spectrum.
pub fn info_m_bound(spec: &EtaSpectrum, code: &CodeSpec) -> Result<f64> {
    if code.m == 0 {
        return Ok(0.0);
    }
    let v_hat = code.v_hat.ok_or(Error::CapExceeded { dim: code.r + code.m, cap: 24 })?;
    Ok(2.0 * code.m as f64 * spec.tail(v_hat).sqrt())
}

pub fn h2(x: f64) -> f64 {
    crate::analytic::h2(x)
}

/// Information delivered by the optimal two-outcome measurement: 1 − H2(½ + D/4), D = Tr|ρ_0 − ρ_1|.
pub fn helstrom_lower_bound(ens: &ParityEnsemble) -> Result<f64> {
    let d = trace_norm_distance(&ens.rho0, &ens.rho1)?;
    Ok(helstrom_from_trace_distance(d))
}

pub fn helstrom_from_trace_distance(d: f64) -> f64 {
    1.0 - h2((0.5 + d / 4.0).clamp(0.0, 1.0))
}

/// Extension of the P_C rows and `v` to a basis of {0,1}^n: returns the rows
/// spanning V_r^c, starting with `v`.
fn complement_basis(pc: &Gf2Matrix, v: &BitString) -> Result<Vec<BitString>> {
    let n = pc.ncols();
    let mut rows = pc.rows().to_vec();
    rows.push(v.clone());
    let mut ext = vec![v.clone()];
    let mut rank = Gf2Matrix::new(n, rows.clone())?.rank();
    if rank != pc.nrows() + 1 {
        return Err(Error::RankDeficient { rank, need: pc.nrows() + 1 });
    }
    for k in 0..n {
        let mut e = BitString::zeros(n);
        e.set(k, true);
        rows.push(e.clone());
        let next = Gf2Matrix::new(n, rows.clone())?.rank();
        if next > rank {
            rank = next;
            ext.push(e);
        } else {
            rows.pop();
        }
    }
    Ok(ext)
}

/// η' vectors and d'² for one (code, ξ, PA row); indexed by m ∈ V_r^c.
#[derive(Clone, Debug)]
pub struct AggregatedSpectrum {
    pub i_xi: BitString,
    pub m: Vec<BitString>,
    pub eta: Vec<StateVector>,
    /// Σ_{n∈V_r} d²_{m⊕n}
    pub d2: Vec<f64>,
}

pub fn aggregate(spec: &EtaSpectrum, code: &CodeSpec, xi: &BitString, v_index: usize) -> Result<AggregatedSpectrum> {
    let v = code.pa.row(v_index);
    let ext = Gf2Matrix::new(code.n, complement_basis(&code.pc, v)?)?;
    let v_r = span_elements(&code.pc)?;
    let mut ms = span_elements(&ext)?;
    ms.sort();
    let i_xi = code.coset_representative(xi)?;
    let mut eta = Vec::with_capacity(ms.len());
    let mut d2 = Vec::with_capacity(ms.len());
    for m in &ms {
        let mut acc = StateVector::zero(spec.eta[0].dims().to_vec())?;
        let mut sum = 0.0;
        for n in &v_r {
            let l = m.xor(n).to_index() as usize;
            acc = acc.add(&spec.eta[l].scaled(C64::new(sign(i_xi.dot(n)), 0.0)))?;
            sum += spec.d2[l];
        }
        eta.push(acc);
        d2.push(sum);
    }
    Ok(AggregatedSpectrum { i_xi, m: ms, eta, d2 })
}

impl AggregatedSpectrum {
    /// max over coset members i of ‖φ_i − Σ_{m∈V_r^c} (−1)^{i·m} η'_m‖
    pub fn residual(&self, fam: &PurifiedFamily, code: &CodeSpec, xi: &BitString) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in code.coset(xi)? {
            let mut acc = fam.phi[i.to_index() as usize].clone();
            for (m, e) in self.m.iter().zip(&self.eta) {
                acc = acc.sub(&e.scaled(C64::new(sign(i.dot(m)), 0.0)))?;
            }
            worst = worst.max(acc.norm());
        }
        Ok(worst)
    }

    /// max_m |‖η'_m‖² − d'²_m|
    pub fn norm_defect(&self) -> f64 {
        self.eta.iter().zip(&self.d2).map(|(e, d)| (e.norm_sqr() - d).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Bounds {
    pub tight: f64,
    pub tight_capped: f64,
    pub loose: f64,
    pub exact: f64,
    pub helstrom: f64,
    pub m_bit: f64,
}

impl Bounds {
    /// helstrom ≤ exact ≤ min(1, tight) ≤ loose, with slack `tol`.
    pub fn ordered(&self, tol: f64) -> bool {
        self.helstrom <= self.exact + tol
            && self.exact <= self.tight_capped + tol
            && self.tight_capped <= self.loose + tol
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub context: Context,
    pub xi: BitString,
    pub v: BitString,
    pub d2: BTreeMap<String, f64>,
    pub v_hat: usize,
    pub eta_orthogonality: f64,
    pub bounds: Bounds,
}

/// Full pipeline for one context: purify, η spectrum, ensembles and all bounds for PA row `v_index`.
pub fn analyze(table: &ProbeTable, code: &CodeSpec, xi: &BitString, v_index: usize) -> Result<SpectrumReport> {
    let fam = purify(table)?;
    let spec = eta_spectrum(&fam)?;
    let ens = parity_ensembles(&fam, code, xi, v_index)?;
    let v_hat = code.distance_to_dual(&ens.v)?;
    let tight = sd_tight_bound(&spec, v_hat);
    let bounds = Bounds {
        tight,
        tight_capped: tight.min(1.0),
        loose: sd_loose_bound(&spec, v_hat, code.r),
        exact: sd_exact_bound(&ens)?,
        helstrom: helstrom_lower_bound(&ens)?,
        m_bit: info_m_bound(&spec, code)?,
    };
    Ok(SpectrumReport {
        context: fam.context.clone(),
        xi: xi.clone(),
        v: ens.v.clone(),
        d2: spec.d2_map(),
        v_hat,
        eta_orthogonality: spec.orthogonality_defect()?,
        bounds,
    })
}
