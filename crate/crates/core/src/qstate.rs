//! Dense state vectors, density matrices and gate circuits over small
//! mixed-dimension registers.
//!
//! Subsystem 0 is the most significant digit of the flat basis index. A
//! [`UnitaryOp`] is kept as an ordered list of local gates so that registers
//! of a few thousand dimensions can be evolved without a dense operator.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bits::BitString;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const NORM_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-9;

static DIM_CAP: AtomicUsize = AtomicUsize::new(4096);

/// Largest total Hilbert-space dimension any state or operator may have.
pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap, Ordering::Relaxed);
}

fn check_cap(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        return Err(Error::CapExceeded { dim, cap });
    }
    Ok(())
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Flat offsets of every digit combination of `subs`, first listed subsystem most significant.
fn offsets(dims: &[usize], subs: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &k in subs {
        let mut next = Vec::with_capacity(out.len() * dims[k]);
        for &o in &out {
            for d in 0..dims[k] {
                next.push(o + d * st[k]);
            }
        }
        out = next;
    }
    out
}

fn complement(n: usize, subs: &[usize]) -> Vec<usize> {
    (0..n).filter(|k| !subs.contains(k)).collect()
}

fn check_subsystems(dims: &[usize], subs: &[usize]) -> Result<()> {
    for (a, &k) in subs.iter().enumerate() {
        if k >= dims.len() {
            return Err(Error::DimensionMismatch(format!("subsystem {k} out of range {}", dims.len())));
        }
        if subs[..a].contains(&k) {
            return Err(Error::DimensionMismatch(format!("subsystem {k} listed twice")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        check_cap(dim)?;
        if amps.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: amps.len() });
        }
        Ok(StateVector { dims, amps })
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if index >= dim {
            return Err(Error::DimensionMismatch(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![C64::default(); dim];
        amps[index] = c(1.0);
        Self::new(dims, amps)
    }

    pub fn zero(dims: Vec<usize>) -> Result<Self> {
        let dim = dims.iter().product();
        Self::new(dims, vec![C64::default(); dim])
    }

    /// Computational basis state of qubits spelled by `bits`.
    pub fn from_bits(bits: &BitString) -> Result<Self> {
        Self::basis(vec![2; bits.len()], bits.to_index() as usize)
    }

    /// Equal superposition over every basis index.
    pub fn uniform(dims: Vec<usize>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        Self::new(dims, vec![c(1.0 / (dim as f64).sqrt()); dim])
    }

    pub fn random(dims: Vec<usize>, rng: &mut impl Rng) -> Result<Self> {
        let dim: usize = dims.iter().product();
        let amps: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
        Self::new(dims, amps)?.normalized()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amp(&self, index: usize) -> C64 {
        self.amps[index]
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(self.scaled(c(1.0 / n)))
    }

    pub fn scaled(&self, k: C64) -> Self {
        StateVector { dims: self.dims.clone(), amps: self.amps.iter().map(|a| a * k).collect() }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect();
        Ok(StateVector { dims: self.dims.clone(), amps })
    }

    pub fn sub(&self, other: &StateVector) -> Result<Self> {
        self.add(&other.scaled(c(-1.0)))
    }

    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        check_cap(self.dim() * other.dim())?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Self::new(dims, amps)
    }

    /// Applies `m` to the listed subsystems in place.
    pub fn apply_gate(&mut self, targets: &[usize], m: &CMatrix) -> Result<()> {
        check_subsystems(&self.dims, targets)?;
        let d: usize = targets.iter().map(|&k| self.dims[k]).product();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!("gate {}x{} on target dim {d}", m.nrows(), m.ncols())));
        }
        let toff = offsets(&self.dims, targets);
        let rest = complement(self.dims.len(), targets);
        let bases = offsets(&self.dims, &rest);
        let mut v = vec![C64::default(); d];
        for &base in &bases {
            for (t, &o) in toff.iter().enumerate() {
                v[t] = self.amps[base + o];
            }
            for (row, &o) in toff.iter().enumerate() {
                let mut acc = C64::default();
                for (col, x) in v.iter().enumerate() {
                    acc += m[(row, col)] * x;
                }
                self.amps[base + o] = acc;
            }
        }
        Ok(())
    }

    /// Reorders subsystems so that new subsystem k is old subsystem `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.dims.len() {
            return Err(Error::LengthMismatch { expected: self.dims.len(), got: order.len() });
        }
        check_subsystems(&self.dims, order)?;
        let dims: Vec<usize> = order.iter().map(|&k| self.dims[k]).collect();
        let src = offsets(&self.dims, order);
        let amps = src.iter().map(|&o| self.amps[o]).collect();
        Self::new(dims, amps)
    }

    pub fn density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityMatrix { dims: self.dims.clone(), m: &v * v.adjoint() }
    }

    /// Reduced state on `keep` (in the listed order), straight from the amplitudes.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        check_subsystems(&self.dims, keep)?;
        let koff = offsets(&self.dims, keep);
        let rest = complement(self.dims.len(), keep);
        let roff = offsets(&self.dims, &rest);
        let d = koff.len();
        let mut m = CMatrix::zeros(d, d);
        for &r in &roff {
            for (a, &ka) in koff.iter().enumerate() {
                let x = self.amps[ka + r];
                if x == C64::default() {
                    continue;
                }
                for (b, &kb) in koff.iter().enumerate() {
                    m[(a, b)] += x * self.amps[kb + r].conj();
                }
            }
        }
        Ok(DensityMatrix { dims: keep.iter().map(|&k| self.dims[k]).collect(), m })
    }
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn hadamard() -> CMatrix {
    let h = 1.0 / 2f64.sqrt();
    CMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)])
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// Control on the first target, `m` on the rest.
pub fn controlled(m: &CMatrix) -> CMatrix {
    let d = m.nrows();
    let mut out = CMatrix::identity(2 * d, 2 * d);
    out.view_mut((d, d), (d, d)).copy_from(m);
    out
}

pub fn cnot() -> CMatrix {
    controlled(&pauli_x())
}

/// Exchanges two subsystems of dimension `d` each.
pub fn swap_matrix(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            m[(b * d + a, a * d + b)] = c(1.0);
        }
    }
    m
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Operator that reorders subsystems: new subsystem k is old subsystem `order[k]`.
pub fn permutation_matrix(dims: &[usize], order: &[usize]) -> Result<CMatrix> {
    let d: usize = dims.iter().product();
    let mut p = CMatrix::zeros(d, d);
    for col in 0..d {
        let moved = StateVector::basis(dims.to_vec(), col)?.permuted(order)?;
        let row = moved.amps.iter().position(|a| a.re == 1.0).expect("basis vector stays a basis vector");
        p[(row, col)] = c(1.0);
    }
    Ok(p)
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary_matrix(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let p = m.adjoint() * m;
    let id = CMatrix::identity(m.nrows(), m.ncols());
    (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct Gate {
    pub targets: Vec<usize>,
    pub matrix: CMatrix,
}

/// A unitary on a register, stored as a gate sequence applied first to last.
#[derive(Clone, Debug)]
pub struct UnitaryOp {
    dims: Vec<usize>,
    gates: Vec<Gate>,
}

impl UnitaryOp {
    pub fn identity(dims: Vec<usize>) -> Result<Self> {
        check_cap(dims.iter().product())?;
        Ok(UnitaryOp { dims, gates: Vec::new() })
    }

    /// Dense operator on the whole register; checked for unitarity.
    pub fn from_matrix(dims: Vec<usize>, m: CMatrix) -> Result<Self> {
        let targets: Vec<usize> = (0..dims.len()).collect();
        Self::identity(dims)?.gate(&targets, m)
    }

    /// Appends a gate; it acts after every gate already present.
    pub fn gate(mut self, targets: &[usize], m: CMatrix) -> Result<Self> {
        check_subsystems(&self.dims, targets)?;
        let d: usize = targets.iter().map(|&k| self.dims[k]).product();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!("gate {}x{} on target dim {d}", m.nrows(), m.ncols())));
        }
        let dev = unitarity_deviation(&m);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        self.gates.push(Gate { targets: targets.to_vec(), matrix: m });
        Ok(self)
    }

    /// `other` after `self`.
    pub fn then(mut self, other: &UnitaryOp) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(self)
    }

    /// Embeds this operator into a larger register, acting on `targets` there.
    pub fn embed(&self, dims: Vec<usize>, targets: &[usize]) -> Result<Self> {
        check_subsystems(&dims, targets)?;
        if targets.len() != self.dims.len() || targets.iter().zip(&self.dims).any(|(&t, &d)| dims[t] != d) {
            return Err(Error::DimensionMismatch("embedding targets do not match operator dims".into()));
        }
        let mut out = Self::identity(dims)?;
        for g in &self.gates {
            let t: Vec<usize> = g.targets.iter().map(|&k| targets[k]).collect();
            out.gates.push(Gate { targets: t, matrix: g.matrix.clone() });
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let gates =
            self.gates.iter().rev().map(|g| Gate { targets: g.targets.clone(), matrix: g.matrix.adjoint() }).collect();
        UnitaryOp { dims: self.dims.clone(), gates }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dims != self.dims {
            return Err(Error::DimensionMismatch(format!("operator {:?} on state {:?}", self.dims, psi.dims)));
        }
        let mut out = psi.clone();
        for g in &self.gates {
            out.apply_gate(&g.targets, &g.matrix)?;
        }
        Ok(out)
    }

    /// Dense matrix, built column by column.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for col in 0..d {
            let out = self.apply(&StateVector::basis(self.dims.clone(), col)?)?;
            for (row, a) in out.amps.iter().enumerate() {
                m[(row, col)] = *a;
            }
        }
        Ok(m)
    }
}

/// Single-qubit state |i⟩_b: b = 0 is the computational basis, b = 1 the diagonal one.
pub fn bb84_qubit(i: bool, b: bool) -> [C64; 2] {
    let h = 1.0 / 2f64.sqrt();
    match (i, b) {
        (false, false) => [c(1.0), c(0.0)],
        (true, false) => [c(0.0), c(1.0)],
        (false, true) => [c(h), c(h)],
        (true, true) => [c(h), c(-h)],
    }
}

/// ⊗_k |i_k⟩_{b_k}
pub fn encode_bb84(i: &BitString, b: &BitString) -> Result<StateVector> {
    if i.len() != b.len() {
        return Err(Error::LengthMismatch { expected: i.len(), got: b.len() });
    }
    let mut psi = StateVector::new(vec![], vec![c(1.0)])?;
    for k in 0..i.len() {
        let q = bb84_qubit(i.get(k), b.get(k));
        psi = psi.tensor(&StateVector::new(vec![2], q.to_vec())?)?;
    }
    Ok(psi)
}

/// ⟨outcome|_basis ψ on the listed qubits; the remaining subsystems keep their order.
/// Returns the unnormalized component and its squared norm.
pub fn project_component(
    psi: &StateVector,
    qubits: &[usize],
    outcome: &BitString,
    basis: &BitString,
) -> Result<(StateVector, f64)> {
    check_subsystems(&psi.dims, qubits)?;
    if outcome.len() != qubits.len() {
        return Err(Error::LengthMismatch { expected: qubits.len(), got: outcome.len() });
    }
    if basis.len() != qubits.len() {
        return Err(Error::LengthMismatch { expected: qubits.len(), got: basis.len() });
    }
    if qubits.iter().any(|&k| psi.dims[k] != 2) {
        return Err(Error::DimensionMismatch("projection targets must be qubits".into()));
    }
    let mut rotated = psi.clone();
    let h = hadamard();
    for (a, &k) in qubits.iter().enumerate() {
        if basis.get(a) {
            rotated.apply_gate(&[k], &h)?;
        }
    }
    let st = strides(&psi.dims);
    let fixed: usize = qubits.iter().enumerate().map(|(a, &k)| usize::from(outcome.get(a)) * st[k]).sum();
    let rest = complement(psi.dims.len(), qubits);
    let roff = offsets(&psi.dims, &rest);
    let amps: Vec<C64> = roff.iter().map(|&o| rotated.amps[fixed + o]).collect();
    let out = StateVector::new(rest.iter().map(|&k| psi.dims[k]).collect(), amps)?;
    let p = out.norm_sqr();
    Ok((out, p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, m: CMatrix) -> Result<Self> {
        let d: usize = dims.iter().product();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix for dims {:?}", m.nrows(), m.ncols(), dims)));
        }
        Ok(DensityMatrix { dims, m })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        DensityMatrix { dims, m: CMatrix::zeros(d, d) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    /// Adds w·|ψ⟩⟨ψ|.
    pub fn add_pure(&mut self, psi: &StateVector, w: f64) -> Result<()> {
        if psi.dims != self.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", psi.dims, self.dims)));
        }
        let v = nalgebra::DVector::from_column_slice(&psi.amps);
        self.m += (&v * v.adjoint()) * c(w);
        Ok(())
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.m - self.m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        hermitian_eigenvalues(&self.m)
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        check_subsystems(&self.dims, keep)?;
        let koff = offsets(&self.dims, keep);
        let rest = complement(self.dims.len(), keep);
        let roff = offsets(&self.dims, &rest);
        let d = koff.len();
        let mut m = CMatrix::zeros(d, d);
        for (a, &ka) in koff.iter().enumerate() {
            for (b, &kb) in koff.iter().enumerate() {
                m[(a, b)] = roff.iter().map(|&r| self.m[(ka + r, kb + r)]).sum();
            }
        }
        Ok(DensityMatrix { dims: keep.iter().map(|&k| self.dims[k]).collect(), m })
    }
}

/// Eigenvalues of the Hermitian part of `m`, ascending. H = A + iB goes through the
/// real symmetric [[A, −B], [B, A]], whose spectrum is H's with every value doubled.
/// nalgebra's symmetric solver returns NaN on some degenerate projectors, so faer does the work.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let d = m.nrows();
    let herm = (m + m.adjoint()) * c(0.5);
    let real = faer::Mat::<f64>::from_fn(2 * d, 2 * d, |r, k| {
        let z = herm[(r % d, k % d)];
        match (r < d, k < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev = real.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|_| Error::NoConvergence)?;
    ev.sort_by(f64::total_cmp);
    Ok(ev.into_iter().step_by(2).collect())
}

/// Tr|r0 − r1|, the sum of absolute eigenvalues of the Hermitian difference.
pub fn trace_norm_distance(r0: &DensityMatrix, r1: &DensityMatrix) -> Result<f64> {
    if r0.dim() != r1.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", r0.dim(), r1.dim())));
    }
    let diff = DensityMatrix { dims: r0.dims.clone(), m: &r0.m - &r1.m };
    Ok(diff.eigenvalues()?.iter().map(|x| x.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn close(a: C64, b: f64) -> bool {
        (a - c(b)).norm() < 1e-12
    }

    #[test]
    fn encode_examples() {
        let z = encode_bb84(&bs("0"), &bs("0")).unwrap();
        assert!(close(z.amp(0), 1.0) && close(z.amp(1), 0.0));
        let h = 1.0 / 2f64.sqrt();
        let x = encode_bb84(&bs("1"), &bs("1")).unwrap();
        assert!(close(x.amp(0), h) && close(x.amp(1), -h));
        let two = encode_bb84(&bs("10"), &bs("01")).unwrap();
        let want = [0.0, 0.0, h, h];
        for (k, w) in want.iter().enumerate() {
            assert!(close(two.amp(k), *w));
        }
        assert!(two.is_normalized());
        assert!(encode_bb84(&bs("10"), &bs("1")).is_err());
    }

    #[test]
    fn apply_examples() {
        let psi = StateVector::basis(vec![2], 0).unwrap();
        let id = UnitaryOp::identity(vec![2]).unwrap();
        assert_eq!(id.apply(&psi).unwrap(), psi);
        let h = UnitaryOp::from_matrix(vec![2], hadamard()).unwrap();
        let out = h.apply(&psi).unwrap();
        assert!(close(out.amp(0), 1.0 / 2f64.sqrt()) && close(out.amp(1), 1.0 / 2f64.sqrt()));
        let wrong = StateVector::basis(vec![2, 2], 0).unwrap();
        assert!(h.apply(&wrong).is_err());
    }

    #[test]
    fn from_matrix_rejects_non_unitary() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!(matches!(UnitaryOp::from_matrix(vec![2], m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn gate_on_middle_subsystem_matches_kron() {
        let mut r = rng::stream(1, "qstate-test", 0);
        let u = random_unitary_matrix(3, &mut r);
        let op = UnitaryOp::identity(vec![2, 3, 2]).unwrap().gate(&[1], u.clone()).unwrap();
        let id2 = CMatrix::identity(2, 2);
        let want = kron(&kron(&id2, &u), &id2);
        let got = op.to_matrix().unwrap();
        assert!((got - want).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn reversed_targets_match_swapped_kron() {
        let mut r = rng::stream(2, "qstate-test", 0);
        let u = random_unitary_matrix(4, &mut r);
        let a = UnitaryOp::identity(vec![2, 2]).unwrap().gate(&[1, 0], u.clone()).unwrap();
        let sw = swap_matrix(2);
        let want = &sw * &u * &sw;
        assert!((a.to_matrix().unwrap() - want).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn adjoint_inverts() {
        let mut r = rng::stream(3, "qstate-test", 0);
        let op = UnitaryOp::identity(vec![2, 2, 2])
            .unwrap()
            .gate(&[0, 2], random_unitary_matrix(4, &mut r))
            .unwrap()
            .gate(&[1], random_unitary_matrix(2, &mut r))
            .unwrap();
        let psi = StateVector::random(vec![2, 2, 2], &mut r).unwrap();
        let back = op.adjoint().apply(&op.apply(&psi).unwrap()).unwrap();
        assert!(back.sub(&psi).unwrap().norm() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let dims = vec![2; 13];
        assert!(matches!(StateVector::zero(dims), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn projection_examples() {
        let zz = StateVector::basis(vec![2, 2], 0).unwrap();
        let (v, p) = project_component(&zz, &[0], &bs("0"), &bs("0")).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(v, StateVector::basis(vec![2], 0).unwrap());

        let h = 1.0 / 2f64.sqrt();
        let bell = StateVector::new(vec![2, 2], vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let (v, p) = project_component(&bell, &[0], &bs("1"), &bs("0")).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!(close(v.amp(0), 0.0) && close(v.amp(1), h));

        let z0 = StateVector::basis(vec![2], 0).unwrap();
        let (_, p) = project_component(&z0, &[0], &bs("0"), &bs("1")).unwrap();
        let plus = StateVector::new(vec![2], vec![c(h), c(h)]).unwrap();
        let direct = plus.inner(&z0).unwrap().norm_sqr();
        assert!((p - direct).abs() < 1e-12 && (p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let zz = StateVector::basis(vec![2, 2], 0).unwrap();
        let r = zz.partial_trace(&[0]).unwrap();
        assert_eq!(r, StateVector::basis(vec![2], 0).unwrap().density());

        let h = 1.0 / 2f64.sqrt();
        let bell = StateVector::new(vec![2, 2], vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let r = bell.partial_trace(&[0]).unwrap();
        let half = CMatrix::identity(2, 2) * c(0.5);
        assert!((r.matrix() - half).iter().all(|z| z.norm() < 1e-12));
        let r2 = bell.density().partial_trace(&[1]).unwrap();
        assert!((r2.matrix() - r.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn partial_trace_of_probe_register() {
        // Σ_j |E_j⟩|j⟩ traced over the second register gives Σ_j |E_j⟩⟨E_j|
        let mut r = rng::stream(4, "qstate-test", 0);
        let e0 = StateVector::random(vec![3], &mut r).unwrap().scaled(c(0.6));
        let e1 = StateVector::random(vec![3], &mut r).unwrap().scaled(c(0.8));
        let joint = e0
            .tensor(&StateVector::basis(vec![2], 0).unwrap())
            .unwrap()
            .add(&e1.tensor(&StateVector::basis(vec![2], 1).unwrap()).unwrap())
            .unwrap();
        let got = joint.partial_trace(&[0]).unwrap();
        let mut want = DensityMatrix::zeros(vec![3]);
        want.add_pure(&e0, 1.0).unwrap();
        want.add_pure(&e1, 1.0).unwrap();
        assert!((got.matrix() - want.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn trace_distance_examples() {
        let z0 = StateVector::basis(vec![2], 0).unwrap().density();
        let z1 = StateVector::basis(vec![2], 1).unwrap().density();
        let h = 1.0 / 2f64.sqrt();
        let plus = StateVector::new(vec![2], vec![c(h), c(h)]).unwrap().density();
        assert!(trace_norm_distance(&z0, &z0).unwrap().abs() < 1e-12);
        assert!((trace_norm_distance(&z0, &z1).unwrap() - 2.0).abs() < 1e-12);
        assert!((trace_norm_distance(&z0, &plus).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_rejects_non_hermitian() {
        let a = DensityMatrix::new(vec![2], CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(0.0)])).unwrap();
        let b = DensityMatrix::zeros(vec![2]);
        assert!(matches!(trace_norm_distance(&a, &b), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn degenerate_projector_spectrum() {
        // uniform superposition over 8 of 128 basis states; once broke the eigensolver
        let mut amps = vec![C64::default(); 128];
        for k in 0..8 {
            amps[k * 16 + 3] = c(1.0 / 8f64.sqrt());
        }
        let pure = |v: &StateVector| {
            let mut r = DensityMatrix::zeros(v.dims().to_vec());
            r.add_pure(v, 1.0).unwrap();
            r
        };
        let psi = StateVector::new(vec![2; 7], amps).unwrap();
        let ev = pure(&psi).eigenvalues().unwrap();
        assert!(ev.iter().all(|x| x.is_finite()));
        assert!((ev[127] - 1.0).abs() < 1e-12);
        assert!(ev[..127].iter().all(|x| x.abs() < 1e-12));
        let other = pure(&StateVector::basis(vec![2; 7], 0).unwrap());
        assert!((trace_norm_distance(&pure(&psi), &other).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complex_hermitian_spectrum() {
        // σ_y has eigenvalues ±1
        let y = CMatrix::from_row_slice(2, 2, &[c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0)]);
        let ev = hermitian_eigenvalues(&y).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permuted_reorders_subsystems() {
        let psi = StateVector::from_bits(&bs("100")).unwrap();
        let p = psi.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p, StateVector::from_bits(&bs("010")).unwrap());
    }

    fn random_dims(seed: u64) -> Vec<usize> {
        let mut r = rng::stream(seed, "dims", 0);
        let mut dims = Vec::new();
        let mut total = 1;
        loop {
            let d = r.random_range(2..=4);
            if total * d > 64 {
                break;
            }
            total *= d;
            dims.push(d);
        }
        dims
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norm_preserved(seed in any::<u64>()) {
            let mut r = rng::stream(seed, "norm", 0);
            let dims = random_dims(seed);
            let d: usize = dims.iter().product();
            let psi = StateVector::random(dims.clone(), &mut r).unwrap().scaled(c(1.7));
            let u = UnitaryOp::from_matrix(dims, random_unitary_matrix(d, &mut r)).unwrap();
            let out = u.apply(&psi).unwrap();
            prop_assert!((out.norm() - psi.norm()).abs() <= 1e-10);
        }

        #[test]
        fn projection_complete(seed in any::<u64>(), nq in 1usize..4) {
            let mut r = rng::stream(seed, "proj", 0);
            let psi = StateVector::random(vec![2, 3, 2, 2], &mut r).unwrap();
            let qubits: Vec<usize> = [0usize, 2, 3][..nq].to_vec();
            let basis = BitString::from_index(r.random_range(0..1u64 << nq), nq);
            let total: f64 = BitString::all(nq)
                .map(|o| project_component(&psi, &qubits, &o, &basis).unwrap().1)
                .sum();
            prop_assert!((total - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn partial_trace_all_is_identity(seed in any::<u64>()) {
            let mut r = rng::stream(seed, "ptall", 0);
            let psi = StateVector::random(vec![2, 3, 2], &mut r).unwrap();
            let full = psi.partial_trace(&[0, 1, 2]).unwrap();
            let dense = psi.density();
            prop_assert!((full.matrix() - dense.matrix()).iter().all(|z| z.norm() <= 1e-12));
            let again = dense.partial_trace(&[0, 1, 2]).unwrap();
            prop_assert!((again.matrix() - dense.matrix()).iter().all(|z| z.norm() <= 1e-12));
        }

        #[test]
        fn trace_distance_is_metric(seed in any::<u64>()) {
            let mut r = rng::stream(seed, "metric", 0);
            let mut mixed = || {
                let psi = StateVector::random(vec![2, 2, 2], &mut r).unwrap();
                psi.partial_trace(&[0, 1]).unwrap()
            };
            let (a, b, cc) = (mixed(), mixed(), mixed());
            let ab = trace_norm_distance(&a, &b).unwrap();
            let ba = trace_norm_distance(&b, &a).unwrap();
            let bc = trace_norm_distance(&b, &cc).unwrap();
            let ac = trace_norm_distance(&a, &cc).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!((0.0..=2.0 + 1e-9).contains(&ab));
        }

        #[test]
        fn density_invariants(seed in any::<u64>()) {
            let mut r = rng::stream(seed, "dm", 0);
            let psi = StateVector::random(vec![2, 2, 3], &mut r).unwrap();
            let rho = psi.partial_trace(&[2, 0]).unwrap();
            prop_assert!(rho.hermitian_deviation() <= 1e-10);
            prop_assert!((rho.trace() - c(1.0)).norm() <= 1e-10);
            let min = rho.eigenvalues().unwrap().into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-8);
        }
    }
}
