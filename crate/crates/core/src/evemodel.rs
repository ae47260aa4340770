//! Eve's joint attack: a probe register plus one unitary on probe ⊗ qubits.
//!
//! Register layout is always probe subsystems first, then the transmitted
//! qubits in order. `E'_{i,j} = ⟨j|_b U |E⟩|i⟩_b` is the unnormalized probe
//! state correlated with Bob reading `j` when Alice sent `i` in bases `b`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::qstate::{
    self, cnot, controlled, encode_bb84, hadamard, kron, pauli_x, pauli_z, permutation_matrix, swap_matrix, CMatrix,
    StateVector, UnitaryOp, C64,
};

/// Most transmitted qubits `symmetrize` accepts.
pub const MAX_SYM_QUBITS: usize = 4;

const ZERO_PROB: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct AttackSpec {
    n_qubits: usize,
    probe_init: StateVector,
    unitary: UnitaryOp,
}

/// One conditional probe state E'_{i,j} in basis b.
#[derive(Clone, Debug)]
pub struct ConditionalProbe {
    pub i: BitString,
    pub j: BitString,
    pub b: BitString,
    pub vector: StateVector,
}

impl AttackSpec {
    pub fn new(n_qubits: usize, probe_init: StateVector, unitary: UnitaryOp) -> Result<Self> {
        if !probe_init.is_normalized() {
            return Err(Error::NotNormalized(probe_init.norm_sqr()));
        }
        let mut dims = probe_init.dims().to_vec();
        dims.extend(std::iter::repeat_n(2, n_qubits));
        if unitary.dims() != dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "unitary acts on {:?}, attack needs {:?}",
                unitary.dims(),
                dims
            )));
        }
        Ok(AttackSpec { n_qubits, probe_init, unitary })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probe_dims(&self) -> &[usize] {
        self.probe_init.dims()
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_init.dim()
    }

    pub fn probe_init(&self) -> &StateVector {
        &self.probe_init
    }

    pub fn unitary(&self) -> &UnitaryOp {
        &self.unitary
    }

    /// Indices of the transmitted qubits inside the joint register.
    pub fn qubit_indices(&self) -> Vec<usize> {
        let p = self.probe_dims().len();
        (p..p + self.n_qubits).collect()
    }

    fn check_len(&self, x: &BitString) -> Result<()> {
        if x.len() != self.n_qubits {
            return Err(Error::LengthMismatch { expected: self.n_qubits, got: x.len() });
        }
        Ok(())
    }

    /// U |E⟩ |i⟩_b
    pub fn output(&self, i: &BitString, b: &BitString) -> Result<StateVector> {
        self.check_len(i)?;
        self.check_len(b)?;
        let psi = self.probe_init.tensor(&encode_bb84(i, b)?)?;
        self.unitary.apply(&psi)
    }

    /// ⟨j|_{basis} ψ for every j, from a joint state laid out probe ⊗ qubits.
    fn slice_all(&self, joint: &StateVector, basis: &BitString) -> Result<Vec<StateVector>> {
        let mut rotated = joint.clone();
        let h = hadamard();
        for (k, q) in self.qubit_indices().into_iter().enumerate() {
            if basis.get(k) {
                rotated.apply_gate(&[q], &h)?;
            }
        }
        let nj = 1usize << self.n_qubits;
        let pd = self.probe_dim();
        (0..nj)
            .map(|j| {
                let amps = (0..pd).map(|p| rotated.amp(p * nj + j)).collect();
                StateVector::new(self.probe_dims().to_vec(), amps)
            })
            .collect()
    }

    /// E'_{i,j} for all j, indexed by `j.to_index()`.
    pub fn probes(&self, i: &BitString, b: &BitString) -> Result<Vec<StateVector>> {
        let out = self.output(i, b)?;
        self.slice_all(&out, b)
    }

    pub fn decompose(&self, i: &BitString, b: &BitString) -> Result<Vec<ConditionalProbe>> {
        let probes = self.probes(i, b)?;
        Ok(probes
            .into_iter()
            .enumerate()
            .map(|(j, vector)| ConditionalProbe {
                i: i.clone(),
                j: BitString::from_index(j as u64, self.n_qubits),
                b: b.clone(),
                vector,
            })
            .collect())
    }

    /// p(j | i, b) for all j.
    pub fn channel_prob(&self, i: &BitString, b: &BitString) -> Result<Vec<f64>> {
        Ok(self.probes(i, b)?.iter().map(StateVector::norm_sqr).collect())
    }

    /// Bob's outcome law when Alice prepares in `b_prep` and Bob measures in `b_meas`.
    pub fn outcome_probs(&self, i: &BitString, b_prep: &BitString, b_meas: &BitString) -> Result<Vec<f64>> {
        self.check_len(b_meas)?;
        let out = self.output(i, b_prep)?;
        Ok(self.slice_all(&out, b_meas)?.iter().map(StateVector::norm_sqr).collect())
    }

    /// p(c | b) = 2^{-N} Σ_{i'} p(i' ⊕ c | i', b), indexed by c.
    pub fn averaged_error_law(&self, b: &BitString) -> Result<Vec<f64>> {
        let n = self.n_qubits;
        let mut law = vec![0.0; 1 << n];
        let w = 1.0 / (1u64 << n) as f64;
        for i in BitString::all(n) {
            let p = self.channel_prob(&i, b)?;
            for (j, pj) in p.iter().enumerate() {
                let c = i.to_index() as usize ^ j;
                law[c] += w * pj;
            }
        }
        Ok(law)
    }

    /// Post-test probes E_{i_I,j_I} = E'_{i,j} / √p(j_T | i_T, i_I, b, s).
    ///
    /// Positions with s = 0 are test bits; `i_t`, `j_t` list their values in order.
    pub fn conditional_probes(
        &self,
        b: &BitString,
        s: &BitString,
        i_t: &BitString,
        j_t: &BitString,
    ) -> Result<ProbeTable> {
        self.check_len(b)?;
        self.check_len(s)?;
        let n_info = s.weight();
        let n_test = self.n_qubits - n_info;
        if i_t.len() != n_test || j_t.len() != n_test {
            return Err(Error::LengthMismatch { expected: n_test, got: i_t.len().max(j_t.len()) });
        }
        let mut probes = Vec::with_capacity(1 << n_info);
        let mut p_jt = Vec::with_capacity(1 << n_info);
        for i_i in BitString::all(n_info) {
            let i = BitString::merge_by(i_t, &i_i, s);
            let all = self.probes(&i, b)?;
            let row: Vec<StateVector> = BitString::all(n_info)
                .map(|j_i| all[BitString::merge_by(j_t, &j_i, s).to_index() as usize].clone())
                .collect();
            let p: f64 = row.iter().map(StateVector::norm_sqr).sum();
            if p < ZERO_PROB {
                return Err(Error::ImpossibleTranscript(p));
            }
            let k = C64::new(1.0 / p.sqrt(), 0.0);
            probes.push(row.iter().map(|v| v.scaled(k)).collect());
            p_jt.push(p);
        }
        Ok(ProbeTable { n_info, b: b.clone(), s: s.clone(), i_t: i_t.clone(), j_t: j_t.clone(), p_jt, probes })
    }

    /// Symmetrized attack on layout [E, M_1..M_N, A_1..A_N].
    pub fn symmetrize(&self) -> Result<SymmetrizedAttack> {
        let n = self.n_qubits;
        if n > MAX_SYM_QUBITS {
            return Err(Error::CapExceeded { dim: n, cap: MAX_SYM_QUBITS });
        }
        let pe = self.probe_dims().len();
        let mut dims = self.probe_dims().to_vec();
        dims.extend(std::iter::repeat_n(2, 2 * n));
        let m_idx: Vec<usize> = (pe..pe + n).collect();
        let a_idx: Vec<usize> = (pe + n..pe + 2 * n).collect();
        let s_gate = controlled(&(pauli_x() * pauli_z()));
        let mut s_op = UnitaryOp::identity(dims.clone())?;
        for k in 0..n {
            s_op = s_op.gate(&[m_idx[k], a_idx[k]], s_gate.clone())?;
        }
        let mut u_targets: Vec<usize> = (0..pe).collect();
        u_targets.extend(&a_idx);
        let u = self.unitary.embed(dims, &u_targets)?;
        let u_sym = s_op.clone().then(&u)?.then(&s_op.adjoint())?;
        let m_init = StateVector::uniform(vec![2; n])?;
        let attack = AttackSpec::new(n, self.probe_init.tensor(&m_init)?, u_sym)?;
        Ok(SymmetrizedAttack { base: self.clone(), attack })
    }

    pub fn to_json(&self) -> Result<AttackJson> {
        let u = self.unitary.to_matrix()?;
        let d = u.nrows();
        let mut rows = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                rows.push([u[(r, c)].re, u[(r, c)].im]);
            }
        }
        Ok(AttackJson {
            n_qubits: self.n_qubits,
            probe_dim: self.probe_dim(),
            probe_init: self.probe_init.amps().iter().map(|a| [a.re, a.im]).collect(),
            u: rows,
        })
    }

    pub fn from_json(j: &AttackJson) -> Result<Self> {
        let probe = StateVector::new(vec![j.probe_dim], j.probe_init.iter().map(|p| C64::new(p[0], p[1])).collect())?;
        let d = j.probe_dim << j.n_qubits;
        if j.u.len() != d * d {
            return Err(Error::LengthMismatch { expected: d * d, got: j.u.len() });
        }
        let m = CMatrix::from_row_iterator(d, d, j.u.iter().map(|p| C64::new(p[0], p[1])));
        let mut dims = vec![j.probe_dim];
        dims.extend(std::iter::repeat_n(2, j.n_qubits));
        AttackSpec::new(j.n_qubits, probe, UnitaryOp::from_matrix(dims, m)?)
    }
}

/// Serialized attack: dense row-major unitary on probe ⊗ qubits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackJson {
    pub n_qubits: usize,
    pub probe_dim: usize,
    pub probe_init: Vec<[f64; 2]>,
    #[serde(rename = "U")]
    pub u: Vec<[f64; 2]>,
}

/// Probe states left after Bob's test bits were measured, for one public context.
#[derive(Clone, Debug)]
pub struct ProbeTable {
    pub n_info: usize,
    pub b: BitString,
    pub s: BitString,
    pub i_t: BitString,
    pub j_t: BitString,
    /// p(j_T | i_T, i_I, b, s), one entry per i_I
    pub p_jt: Vec<f64>,
    /// E_{i_I,j_I}, indexed [i_I][j_I]
    pub probes: Vec<Vec<StateVector>>,
}

impl ProbeTable {
    pub fn probe(&self, i_i: usize, j_i: usize) -> &StateVector {
        &self.probes[i_i][j_i]
    }

    /// Gram matrix ⟨E_{i,j}|E_{i',j'}⟩ with row i·2^n + j and column i'·2^n + j'.
    pub fn gram(&self) -> Result<CMatrix> {
        let k = 1usize << self.n_info;
        let flat: Vec<&StateVector> = self.probes.iter().flatten().collect();
        let mut g = CMatrix::zeros(k * k, k * k);
        for (a, x) in flat.iter().enumerate() {
            for (b, y) in flat.iter().enumerate() {
                g[(a, b)] = x.inner(y)?;
            }
        }
        Ok(g)
    }

    /// 2^{-n} Σ_{i_I} ‖E_{i_I, i_I⊕c}‖², indexed by c.
    pub fn averaged_error_law(&self) -> Vec<f64> {
        let k = 1usize << self.n_info;
        let mut law = vec![0.0; k];
        for (i, row) in self.probes.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                law[i ^ j] += v.norm_sqr() / k as f64;
            }
        }
        law
    }
}

#[derive(Clone, Debug)]
pub struct SymmetrizedAttack {
    pub base: AttackSpec,
    /// The symmetrized attack itself, probe = E ⊗ M.
    pub attack: AttackSpec,
}

impl SymmetrizedAttack {
    /// (1_E ⊗ S†)(U ⊗ 1_M)(1_E ⊗ S) assembled from dense factors in E ⊗ A ⊗ M order.
    pub fn component_product(&self) -> Result<CMatrix> {
        let n = self.base.n_qubits;
        let k = 1usize << n;
        let mut s = CMatrix::zeros(k * k, k * k);
        for a in 0..k {
            for m in 0..k {
                let sign = if (a & m).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                s[(((a ^ m) * k) + m, a * k + m)] = C64::new(sign, 0.0);
            }
        }
        let id_e = CMatrix::identity(self.base.probe_dim(), self.base.probe_dim());
        let id_m = CMatrix::identity(k, k);
        let u = self.base.unitary.to_matrix()?;
        let s_full = kron(&id_e, &s);
        Ok(s_full.adjoint() * kron(&u, &id_m) * s_full)
    }

    /// The constructed U^sym re-expressed in E ⊗ A ⊗ M order.
    pub fn unitary_eam(&self) -> Result<CMatrix> {
        let n = self.base.n_qubits;
        let pe = self.base.probe_dims().len();
        let dims = self.attack.unitary.dims().to_vec();
        let mut order: Vec<usize> = (0..pe).collect();
        order.extend(pe + n..pe + 2 * n);
        order.extend(pe..pe + n);
        let p = permutation_matrix(&dims, &order)?;
        Ok(&p * self.attack.unitary.to_matrix()? * p.transpose())
    }

    /// Right side of the symmetrization identity for E^sym'_{i,j}:
    /// 2^{-N/2} Σ_m (−1)^{(i⊕j)·m} E'_{i⊕m, j⊕m} ⊗ |m⟩.
    pub fn symmetrized_probe(&self, i: &BitString, j: &BitString, b: &BitString) -> Result<StateVector> {
        let n = self.base.n_qubits;
        let mut dims = self.base.probe_dims().to_vec();
        dims.extend(std::iter::repeat_n(2, n));
        let mut acc = StateVector::zero(dims)?;
        let w = 1.0 / ((1u64 << n) as f64).sqrt();
        let ij = i.xor(j);
        for m in BitString::all(n) {
            let e = &self.base.probes(&i.xor(&m), b)?[j.xor(&m).to_index() as usize];
            let sign = if ij.dot(&m) { -w } else { w };
            let term = e.tensor(&StateVector::from_bits(&m)?)?.scaled(C64::new(sign, 0.0));
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    pub fn overlaps(&self, b: &BitString, s: &BitString, i_t: &BitString, j_t: &BitString) -> Result<CMatrix> {
        sym_probe_overlaps(self, b, s, i_t, j_t)
    }
}

pub fn symmetrize(attack: &AttackSpec) -> Result<SymmetrizedAttack> {
    attack.symmetrize()
}

/// Gram table of the post-test symmetrized probes.
pub fn sym_probe_overlaps(
    sym: &SymmetrizedAttack,
    b: &BitString,
    s: &BitString,
    i_t: &BitString,
    j_t: &BitString,
) -> Result<CMatrix> {
    sym.attack.conditional_probes(b, s, i_t, j_t)?.gram()
}

fn qubit_dims(probe: &[usize], n: usize) -> Vec<usize> {
    let mut d = probe.to_vec();
    d.extend(std::iter::repeat_n(2, n));
    d
}

/// U = 1 with a single-qubit probe in |0⟩.
pub fn identity_attack(n: usize) -> Result<AttackSpec> {
    let probe = StateVector::basis(vec![2], 0)?;
    AttackSpec::new(n, probe, UnitaryOp::identity(qubit_dims(&[2], n))?)
}

/// X on every transmitted qubit.
pub fn flip_all_attack(n: usize) -> Result<AttackSpec> {
    let probe = StateVector::basis(vec![2], 0)?;
    let mut u = UnitaryOp::identity(qubit_dims(&[2], n))?;
    for k in 0..n {
        u = u.gate(&[1 + k], pauli_x())?;
    }
    AttackSpec::new(n, probe, u)
}

/// Eve stores Alice's qubits and forwards the probe state |r⟩_c instead.
pub fn swap_with_state(r: &BitString, c: &BitString) -> Result<AttackSpec> {
    let n = r.len();
    let probe = encode_bb84(r, c)?;
    let mut u = UnitaryOp::identity(vec![2; 2 * n])?;
    for k in 0..n {
        u = u.gate(&[k, n + k], swap_matrix(2))?;
    }
    AttackSpec::new(n, probe, u)
}

/// Eve stores Alice's qubits and forwards fresh uniformly random BB84 states.
///
/// The random states are purified: each forwarded qubit is half of a Bell
/// pair whose partner Eve keeps, so Bob receives the same maximally mixed
/// qubit a random BB84 state averages to. Probe layout is [P_1..P_N, R_1..R_N];
/// after the attack R holds Alice's qubits.
pub fn swap_attack(n: usize) -> Result<AttackSpec> {
    let h = 1.0 / 2f64.sqrt();
    let bell = StateVector::new(vec![2, 2], vec![C64::new(h, 0.0), C64::default(), C64::default(), C64::new(h, 0.0)])?;
    let mut pairs = StateVector::new(vec![], vec![C64::new(1.0, 0.0)])?;
    for _ in 0..n {
        pairs = pairs.tensor(&bell)?;
    }
    // pairs are laid out P_1 R_1 P_2 R_2 ...; regroup to P.. R..
    let mut order: Vec<usize> = (0..n).map(|k| 2 * k).collect();
    order.extend((0..n).map(|k| 2 * k + 1));
    let probe = pairs.permuted(&order)?;
    let mut u = UnitaryOp::identity(vec![2; 3 * n])?;
    for k in 0..n {
        u = u.gate(&[n + k, 2 * n + k], swap_matrix(2))?;
    }
    AttackSpec::new(n, probe, u)
}

/// Probe subsystems holding Alice's original qubits after [`swap_attack`].
pub fn swap_attack_kept(n: usize) -> Vec<usize> {
    (n..2 * n).collect()
}

/// Controlled-SWAP with a control qubit in H|0⟩: nothing happens on the |0⟩
/// branch and the probe |p⟩ is exchanged with Alice's qubits on the |1⟩ branch.
/// Probe layout is [e_0, P_1..P_N].
pub fn half_swap_attack(p: &BitString) -> Result<AttackSpec> {
    let n = p.len();
    let h = 1.0 / 2f64.sqrt();
    let e0 = StateVector::new(vec![2], vec![C64::new(h, 0.0), C64::new(h, 0.0)])?;
    let probe = e0.tensor(&StateVector::from_bits(p)?)?;
    let cswap = controlled(&swap_matrix(2));
    let mut u = UnitaryOp::identity(vec![2; 2 * n + 1])?;
    for k in 0..n {
        u = u.gate(&[0, 1 + k, 1 + n + k], cswap.clone())?;
    }
    AttackSpec::new(n, probe, u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisStrategy {
    Z,
    X,
    Random,
}

/// Measure-and-resend, purified: each qubit's value in Eve's basis is copied
/// into a probe qubit by a CNOT. With `Random`, a basis qubit in H|0⟩ picks
/// the basis per position. Probe layout is [copies..] or [bases.., copies..].
pub fn intercept_resend(n: usize, strategy: BasisStrategy) -> Result<AttackSpec> {
    let h = hadamard();
    let x_copy = &kron(&h, &CMatrix::identity(2, 2)) * cnot() * kron(&h, &CMatrix::identity(2, 2));
    match strategy {
        BasisStrategy::Z | BasisStrategy::X => {
            let probe = StateVector::basis(vec![2; n], 0)?;
            let gate = if strategy == BasisStrategy::Z { cnot() } else { x_copy };
            let mut u = UnitaryOp::identity(vec![2; 2 * n])?;
            for k in 0..n {
                u = u.gate(&[n + k, k], gate.clone())?;
            }
            AttackSpec::new(n, probe, u)
        }
        BasisStrategy::Random => {
            let plus = StateVector::uniform(vec![2; n])?;
            let probe = plus.tensor(&StateVector::basis(vec![2; n], 0)?)?;
            let mut g = CMatrix::zeros(8, 8);
            g.view_mut((0, 0), (4, 4)).copy_from(&cnot());
            g.view_mut((4, 4), (4, 4)).copy_from(&x_copy);
            let mut u = UnitaryOp::identity(vec![2; 3 * n])?;
            for k in 0..n {
                u = u.gate(&[k, 2 * n + k, n + k], g.clone())?;
            }
            AttackSpec::new(n, probe, u)
        }
    }
}

/// Haar-random unitary on a `probe_dim`-level probe and the qubits, probe in a random state.
pub fn random_attack(n: usize, probe_dim: usize, rng: &mut impl Rng) -> Result<AttackSpec> {
    let probe = StateVector::random(vec![probe_dim], rng)?;
    let dims = qubit_dims(&[probe_dim], n);
    let d: usize = dims.iter().product();
    let u = UnitaryOp::from_matrix(dims, qstate::random_unitary_matrix(d, rng))?;
    AttackSpec::new(n, probe, u)
}

pub const PRESETS: &[&str] = &[
    "identity",
    "flip-all",
    "swap",
    "half-swap",
    "intercept-z",
    "intercept-x",
    "intercept-random",
    "cnot-probe",
    "random",
];

/// Attack by preset name; `rng` only feeds the `random` preset.
pub fn preset(name: &str, n: usize, rng: &mut impl Rng) -> Result<AttackSpec> {
    match name {
        "identity" => identity_attack(n),
        "flip-all" => flip_all_attack(n),
        "swap" => swap_attack(n),
        "half-swap" => half_swap_attack(&BitString::zeros(n)),
        "intercept-z" | "cnot-probe" => intercept_resend(n, BasisStrategy::Z),
        "intercept-x" => intercept_resend(n, BasisStrategy::X),
        "intercept-random" => intercept_resend(n, BasisStrategy::Random),
        "random" => random_attack(n, 2, rng),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn assert_complete(a: &AttackSpec) {
        let n = a.n_qubits();
        for i in BitString::all(n) {
            for b in BitString::all(n) {
                let total: f64 = a.channel_prob(&i, &b).unwrap().iter().sum();
                assert!((total - 1.0).abs() <= 1e-10, "completeness {total}");
            }
        }
    }

    #[test]
    fn s_gate_example() {
        // S|1⟩_z|1⟩ = −|0⟩_z|1⟩ on one (A, M) pair, checked through the symmetrized circuit
        let sym = identity_attack(1).unwrap().symmetrize().unwrap();
        let s_only =
            UnitaryOp::identity(vec![2, 2]).unwrap().gate(&[0, 1], controlled(&(pauli_x() * pauli_z()))).unwrap();
        // targets are (M, A): |m=1⟩|i=1⟩
        let out = s_only.apply(&StateVector::from_bits(&bs("11")).unwrap()).unwrap();
        let want = StateVector::from_bits(&bs("10")).unwrap().scaled(C64::new(-1.0, 0.0));
        assert!(out.sub(&want).unwrap().norm() < 1e-12);
        assert!(qstate::unitarity_deviation(&sym.attack.unitary().to_matrix().unwrap()) < 1e-9);
    }

    #[test]
    fn identity_decomposition() {
        let a = identity_attack(2).unwrap();
        for i in BitString::all(2) {
            for b in BitString::all(2) {
                for p in a.decompose(&i, &b).unwrap() {
                    let want = if p.j == i { 1.0 } else { 0.0 };
                    assert!((p.vector.norm_sqr() - want).abs() < 1e-12);
                    if p.j == i {
                        assert!(p.vector.sub(a.probe_init()).unwrap().norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn cnot_probe_example() {
        let a = intercept_resend(1, BasisStrategy::Z).unwrap();
        let e = a.probes(&bs("0"), &bs("0")).unwrap();
        assert!(e[0].sub(&StateVector::basis(vec![2], 0).unwrap()).unwrap().norm() < 1e-12);
        assert!(e[1].norm() < 1e-12);
        let p = a.channel_prob(&bs("0"), &bs("1")).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn swap_with_state_example() {
        // probe |0⟩_z forwarded; Bob measuring in z always reads 0
        let a = swap_with_state(&bs("0"), &bs("0")).unwrap();
        for i in BitString::all(1) {
            let p = a.channel_prob(&i, &bs("0")).unwrap();
            assert!((p[0] - 1.0).abs() < 1e-12);
            let p = a.channel_prob(&i, &bs("1")).unwrap();
            assert!((p[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_error_rate_is_half() {
        // oracle: average of the four fresh BB84 states against either basis
        let mut oracle = 0.0;
        for (r, c) in [(false, false), (true, false), (false, true), (true, true)] {
            for bob in [false, true] {
                let q = qstate::bb84_qubit(r, c);
                let want = qstate::bb84_qubit(false, bob);
                let overlap = (want[0].conj() * q[0] + want[1].conj() * q[1]).norm_sqr();
                oracle += (1.0 - overlap) / 8.0;
            }
        }
        assert!((oracle - 0.5).abs() < 1e-12);
        let a = swap_attack(2).unwrap();
        for b in BitString::all(2) {
            let law = a.averaged_error_law(&b).unwrap();
            // each bit flips independently with probability 1/2
            for p in &law {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flip_all_errors_in_z() {
        let a = flip_all_attack(3).unwrap();
        let i = bs("010");
        let p = a.channel_prob(&i, &bs("000")).unwrap();
        assert!((p[bs("101").to_index() as usize] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn presets_are_complete() {
        let mut r = rng::stream(11, "presets", 0);
        for name in PRESETS {
            let a = preset(name, 2, &mut r).unwrap();
            assert_complete(&a);
        }
        assert!(matches!(preset("nope", 2, &mut r), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn symmetrized_identity_is_noiseless() {
        let sym = identity_attack(2).unwrap().symmetrize().unwrap();
        for i in BitString::all(2) {
            for b in BitString::all(2) {
                let p = sym.attack.channel_prob(&i, &b).unwrap();
                assert!((p[i.to_index() as usize] - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn symmetrize_cap() {
        assert!(matches!(identity_attack(5).unwrap().symmetrize(), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn impossible_transcript_is_an_error() {
        let a = identity_attack(2).unwrap();
        // no errors ever, so j_T ≠ i_T has probability zero
        let r = a.conditional_probes(&bs("00"), &bs("01"), &bs("0"), &bs("1"));
        assert!(matches!(r, Err(Error::ImpossibleTranscript(_))));
    }

    #[test]
    fn identity_overlaps() {
        let sym = identity_attack(2).unwrap().symmetrize().unwrap();
        let g = sym.overlaps(&bs("01"), &bs("01"), &bs("1"), &bs("1")).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let (i, j, i2, j2) = (a / 2, a % 2, b / 2, b % 2);
                let want = if i == j && i2 == j2 { 1.0 } else { 0.0 };
                assert!((g[(a, b)] - C64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let mut r = rng::stream(12, "json", 0);
        let a = random_attack(1, 2, &mut r).unwrap();
        let text = serde_json::to_string(&a.to_json().unwrap()).unwrap();
        let back = AttackSpec::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        for i in BitString::all(1) {
            for b in BitString::all(1) {
                let x = a.channel_prob(&i, &b).unwrap();
                let y = back.channel_prob(&i, &b).unwrap();
                assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-12));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn random_attacks_complete(seed in any::<u64>(), n in 1usize..3) {
            let a = random_attack(n, 2, &mut rng::stream(seed, "complete", 0)).unwrap();
            assert_complete(&a);
        }

        #[test]
        fn symmetrization_properties(seed in any::<u64>(), n in 1usize..4) {
            let a = random_attack(n, 2, &mut rng::stream(seed, "sym", 0)).unwrap();
            let sym = a.symmetrize().unwrap();
            let got = sym.unitary_eam().unwrap();
            let want = sym.component_product().unwrap();
            prop_assert!((got.clone() - want).iter().all(|z| z.norm() <= 1e-10));
            // a different base attack must not match
            let other = random_attack(n, 2, &mut rng::stream(seed ^ 1, "sym", 0)).unwrap().symmetrize().unwrap();
            prop_assert!((got - other.component_product().unwrap()).iter().any(|z| z.norm() > 1e-6));
            for b in BitString::all(n) {
                let base = a.averaged_error_law(&b).unwrap();
                let sym_law = sym.attack.averaged_error_law(&b).unwrap();
                prop_assert!(base.iter().zip(&sym_law).all(|(x, y)| (x - y).abs() <= 1e-10));
                for i in BitString::all(n) {
                    let p = sym.attack.channel_prob(&i, &b).unwrap();
                    for (j, pj) in p.iter().enumerate() {
                        let c = i.to_index() as usize ^ j;
                        prop_assert!((pj - base[c]).abs() <= 1e-10);
                    }
                }
            }
        }

        #[test]
        fn symmetrized_probe_formula(seed in any::<u64>(), n in 1usize..3) {
            let a = random_attack(n, 2, &mut rng::stream(seed, "probes", 0)).unwrap();
            let sym = a.symmetrize().unwrap();
            for b in BitString::all(n) {
                for i in BitString::all(n) {
                    let lhs = sym.attack.probes(&i, &b).unwrap();
                    for j in BitString::all(n) {
                        let rhs = sym.symmetrized_probe(&i, &j, &b).unwrap();
                        let diff = lhs[j.to_index() as usize].sub(&rhs).unwrap();
                        prop_assert!(diff.amps().iter().all(|z| z.norm() <= 1e-9));
                    }
                }
            }
        }

        #[test]
        fn post_test_symmetry(seed in any::<u64>()) {
            // 2 qubits: one test, one information bit
            let a = random_attack(2, 2, &mut rng::stream(seed, "post", 0)).unwrap();
            let sym = a.symmetrize().unwrap();
            for b in BitString::all(2) {
                for s in [bs("01"), bs("10")] {
                    for it in BitString::all(1) {
                        for jt in BitString::all(1) {
                            let t = sym.attack.conditional_probes(&b, &s, &it, &jt).unwrap();
                            // i_I independence of the test outcome probability
                            prop_assert!((t.p_jt[0] - t.p_jt[1]).abs() <= 1e-10);
                            let total: f64 = t.p_jt.iter().sum();
                            for p in &t.p_jt {
                                prop_assert!((p / total - 0.5).abs() <= 1e-10);
                            }
                            // b_I independence: flip the information basis
                            let b2 = b.xor(&s);
                            let t2 = sym.attack.conditional_probes(&b2, &s, &it, &jt).unwrap();
                            prop_assert!((t.p_jt[0] - t2.p_jt[0]).abs() <= 1e-10);
                            // diagonal entries are p(j_I | i_I, i_T, j_T, b, s)
                            let g = t.gram().unwrap();
                            for ii in 0..2usize {
                                let i = BitString::merge_by(&it, &BitString::from_index(ii as u64, 1), &s);
                                let p = sym.attack.channel_prob(&i, &b).unwrap();
                                for ji in 0..2usize {
                                    let j = BitString::merge_by(&jt, &BitString::from_index(ji as u64, 1), &s);
                                    let want = p[j.to_index() as usize] / t.p_jt[ii];
                                    prop_assert!((g[(ii * 2 + ji, ii * 2 + ji)].re - want).abs() <= 1e-10);
                                }
                            }
                            // phase covariance under a shift u_I = 1
                            for x in 0..4usize {
                                for y in 0..4usize {
                                    let (i, j, i2, j2) = (x / 2, x % 2, y / 2, y % 2);
                                    let shifted = g[(((i ^ 1) * 2) + (j ^ 1), ((i2 ^ 1) * 2) + (j2 ^ 1))];
                                    let sign = if (i ^ j ^ i2 ^ j2) & 1 == 1 { -1.0 } else { 1.0 };
                                    prop_assert!((shifted - g[(x, y)] * sign).norm() <= 1e-10);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
