//! GF(2) matrices, spans and the ECC+PA code pair.
//!
//! Exact distances come from walking spans in Gray-code order, so they are
//! only available while the span has at most [`SPAN_CAP`] elements.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Upper bound on the number of span elements any exact distance may visit.
pub const SPAN_CAP: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Gf2Matrix {
    cols: usize,
    rows: Vec<BitString>,
}

impl Gf2Matrix {
    pub fn new(cols: usize, rows: Vec<BitString>) -> Result<Self> {
        for r in &rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch { expected: cols, got: r.len() });
            }
        }
        Ok(Gf2Matrix { cols, rows })
    }

    pub fn empty(cols: usize) -> Self {
        Gf2Matrix { cols, rows: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|k| {
                let mut r = BitString::zeros(n);
                r.set(k, true);
                r
            })
            .collect();
        Gf2Matrix { cols: n, rows }
    }

    pub fn parse_rows(rows: &[&str]) -> Result<Self> {
        let rows: Vec<BitString> = rows.iter().map(|r| r.parse()).collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, |r| r.len());
        Self::new(cols, rows)
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[BitString] {
        &self.rows
    }

    pub fn row(&self, k: usize) -> &BitString {
        &self.rows[k]
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &Gf2Matrix) -> Result<Gf2Matrix> {
        if self.cols != other.cols {
            return Err(Error::LengthMismatch { expected: self.cols, got: other.cols });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(Gf2Matrix { cols: self.cols, rows })
    }

    pub fn without_row(&self, k: usize) -> Gf2Matrix {
        let rows = self.rows.iter().enumerate().filter(|(a, _)| *a != k).map(|(_, r)| r.clone()).collect();
        Gf2Matrix { cols: self.cols, rows }
    }

    /// Reduced row echelon form: nonzero rows and their pivot columns.
    pub fn rref(&self) -> (Vec<BitString>, Vec<usize>) {
        let mut rows = self.rows.clone();
        let mut pivots = Vec::new();
        let mut top = 0;
        for col in 0..self.cols {
            let Some(p) = (top..rows.len()).find(|&k| rows[k].get(col)) else { continue };
            rows.swap(top, p);
            let pivot = rows[top].clone();
            for (k, row) in rows.iter_mut().enumerate() {
                if k != top && row.get(col) {
                    row.xor_assign(&pivot);
                }
            }
            pivots.push(col);
            top += 1;
        }
        rows.truncate(top);
        (rows, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of {x : P x^T = 0}.
    pub fn kernel_basis(&self) -> Vec<BitString> {
        let (rows, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut x = BitString::zeros(self.cols);
                x.set(f, true);
                for (row, &p) in rows.iter().zip(&pivots) {
                    if row.get(f) {
                        x.set(p, true);
                    }
                }
                x
            })
            .collect()
    }

    /// ξ_q = x·row_q for every row.
    pub fn syndrome(&self, x: &BitString) -> Result<BitString> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, got: x.len() });
        }
        Ok(BitString::from_bools(&self.rows.iter().map(|r| r.dot(x)).collect::<Vec<_>>()))
    }

    /// Lexicographically smallest x with syndrome ξ, if any.
    pub fn smallest_solution(&self, xi: &BitString) -> Result<Option<BitString>> {
        if xi.len() != self.nrows() {
            return Err(Error::LengthMismatch { expected: self.nrows(), got: xi.len() });
        }
        let aug_rows: Vec<BitString> =
            self.rows.iter().enumerate().map(|(k, r)| r.concat(&BitString::from_bools(&[xi.get(k)]))).collect();
        let aug = Gf2Matrix { cols: self.cols + 1, rows: aug_rows };
        let (rows, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return Ok(None);
        }
        let mut x = BitString::zeros(self.cols);
        for (row, &p) in rows.iter().zip(&pivots) {
            x.set(p, row.get(self.cols));
        }
        // Clearing x at every leading position of the reduced kernel basis
        // leaves the smallest member: any further kernel combination would set
        // its leftmost leading bit while all earlier bits stay unchanged.
        let ker = Gf2Matrix { cols: self.cols, rows: self.kernel_basis() };
        let (kr, kp) = ker.rref();
        for (row, &p) in kr.iter().zip(&kp) {
            if x.get(p) {
                x.xor_assign(row);
            }
        }
        Ok(Some(x))
    }

    pub fn span_size(&self) -> u64 {
        1u64 << self.rank().min(63)
    }
}

impl fmt::Display for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Calls `visit` on every element of the span of `basis` (including 0), in
/// Gray-code order starting from `offset`. The basis must be independent.
fn walk_span(offset: &BitString, basis: &[BitString], mut visit: impl FnMut(&BitString)) -> Result<()> {
    let k = basis.len();
    if k >= 63 || (1u64 << k) > SPAN_CAP {
        return Err(Error::CapExceeded { dim: if k >= 63 { usize::MAX } else { 1usize << k }, cap: SPAN_CAP as usize });
    }
    let mut x = offset.clone();
    visit(&x);
    for step in 1u64..(1u64 << k) {
        x.xor_assign(&basis[step.trailing_zeros() as usize]);
        visit(&x);
    }
    Ok(())
}

fn independent_basis(rows: &Gf2Matrix) -> Vec<BitString> {
    rows.rref().0
}

/// Minimum weight over nonzero elements of the span of `rows`.
pub fn min_distance(rows: &Gf2Matrix) -> Result<usize> {
    let basis = independent_basis(rows);
    if basis.is_empty() {
        return Err(Error::InvalidParameter("span is trivial; minimum distance undefined".into()));
    }
    let mut best = usize::MAX;
    walk_span(&BitString::zeros(rows.ncols()), &basis, |x| {
        let w = x.weight();
        if w > 0 && w < best {
            best = w;
        }
    })?;
    Ok(best)
}

/// Minimum Hamming distance from `v` to the span of `rows`.
pub fn distance_to_span(v: &BitString, rows: &Gf2Matrix) -> Result<usize> {
    if v.len() != rows.ncols() {
        return Err(Error::LengthMismatch { expected: rows.ncols(), got: v.len() });
    }
    let basis = independent_basis(rows);
    let mut best = usize::MAX;
    walk_span(v, &basis, |x| best = best.min(x.weight()))?;
    Ok(best)
}

/// Every element of the span of `rows`, in Gray-code order starting at 0.
pub fn span_elements(rows: &Gf2Matrix) -> Result<Vec<BitString>> {
    let mut out = Vec::new();
    walk_span(&BitString::zeros(rows.ncols()), &independent_basis(rows), |x| out.push(x.clone()))?;
    Ok(out)
}

/// Σ_{c in span(rows)} (−1)^{c·a}.
pub fn character_sum(rows: &Gf2Matrix, a: &BitString) -> Result<i64> {
    let basis = independent_basis(rows);
    let mut total = 0i64;
    walk_span(&BitString::zeros(rows.ncols()), &basis, |x| total += if x.dot(a) { -1 } else { 1 })?;
    Ok(total)
}

pub fn hamming(x: &BitString, y: &BitString) -> usize {
    crate::bits::hamming(x, y)
}

pub fn weight(x: &BitString) -> usize {
    x.weight()
}

/// The ECC parity checks P_C (r rows) and the PA parities P_PA (m rows).
///
/// `d` is the minimum distance of the ECC {x : x P_C^T = 0}; `d_perp` is the
/// minimum distance of the span of all r+m rows; `v_hat` is the minimum
/// distance from any PA row to the span of the other r+m−1 rows. Each is
/// `None` when the relevant span is too large to enumerate (or trivial for `d`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodeSpec {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub pc: Gf2Matrix,
    pub pa: Gf2Matrix,
    pub d: Option<usize>,
    pub d_perp: Option<usize>,
    pub v_hat: Option<usize>,
}

impl CodeSpec {
    pub fn new(pc: Gf2Matrix, pa: Gf2Matrix) -> Result<Self> {
        if pc.ncols() != pa.ncols() {
            return Err(Error::LengthMismatch { expected: pc.ncols(), got: pa.ncols() });
        }
        let n = pc.ncols();
        let (r, m) = (pc.nrows(), pa.nrows());
        if r + m > n {
            return Err(Error::InvalidParameter(format!("r + m = {} exceeds n = {n}", r + m)));
        }
        let all = pc.stack(&pa)?;
        let rank = all.rank();
        if rank != r + m {
            return Err(Error::RankDeficient { rank, need: r + m });
        }
        let mut code = CodeSpec { n, r, m, pc, pa, d: None, d_perp: None, v_hat: None };
        code.d = code.compute_d().ok();
        code.d_perp = if r + m > 0 { min_distance(&all).ok() } else { None };
        code.v_hat = code.compute_v_hat().ok();
        Ok(code)
    }

    /// Code with empty P_C and P_PA, for runs that stop after the test.
    pub fn trivial(n: usize) -> Self {
        CodeSpec { n, r: 0, m: 0, pc: Gf2Matrix::empty(n), pa: Gf2Matrix::empty(n), d: None, d_perp: None, v_hat: None }
    }

    pub fn all_rows(&self) -> Gf2Matrix {
        self.pc.stack(&self.pa).expect("column counts checked at construction")
    }

    fn compute_d(&self) -> Result<usize> {
        let ker = Gf2Matrix::new(self.n, self.pc.kernel_basis())?;
        min_distance(&ker)
    }

    fn compute_v_hat(&self) -> Result<usize> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("no PA rows".into()));
        }
        let all = self.all_rows();
        let mut best = usize::MAX;
        for k in self.r..self.r + self.m {
            best = best.min(distance_to_span(all.row(k), &all.without_row(k))?);
        }
        Ok(best)
    }

    /// min over r ≤ r' < r+m of d_H(v_{r'+1}, span of the first r' rows).
    pub fn v_hat_prefix(&self) -> Result<usize> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("no PA rows".into()));
        }
        let all = self.all_rows();
        let mut best = usize::MAX;
        for k in self.r..self.r + self.m {
            let prefix = Gf2Matrix::new(self.n, all.rows()[..k].to_vec())?;
            best = best.min(distance_to_span(all.row(k), &prefix)?);
        }
        Ok(best)
    }

    /// Minimum distance from `v` to C⊥ (the span of the P_C rows).
    pub fn distance_to_dual(&self, v: &BitString) -> Result<usize> {
        distance_to_span(v, &self.pc)
    }

    pub fn syndrome(&self, x: &BitString) -> Result<BitString> {
        self.pc.syndrome(x)
    }

    pub fn key(&self, x: &BitString) -> Result<BitString> {
        self.pa.syndrome(x)
    }

    /// Lexicographically smallest member of the coset {x : x P_C^T = ξ}.
    pub fn coset_representative(&self, xi: &BitString) -> Result<BitString> {
        self.pc
            .smallest_solution(xi)?
            .ok_or_else(|| Error::InvalidParameter(format!("syndrome {xi} has an empty coset")))
    }

    /// Coset member nearest to `j`, ties to the lexicographically smallest.
    pub fn decode_to_coset(&self, j: &BitString, xi: &BitString) -> Result<BitString> {
        if j.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: j.len() });
        }
        let start = self.coset_representative(xi)?;
        let ker = self.pc.kernel_basis();
        let mut best: Option<(usize, BitString)> = None;
        walk_span(&start, &ker, |x| {
            let dist = x.xor(j).weight();
            let better = match &best {
                None => true,
                Some((bd, bx)) => dist < *bd || (dist == *bd && x < bx),
            };
            if better {
                best = Some((dist, x.clone()));
            }
        })?;
        Ok(best.expect("span walk visits at least the offset").1)
    }

    /// Every member of the coset {x : x P_C^T = ξ}.
    pub fn coset(&self, xi: &BitString) -> Result<Vec<BitString>> {
        let start = self.coset_representative(xi)?;
        let mut out = Vec::new();
        walk_span(&start, &self.pc.kernel_basis(), |x| out.push(x.clone()))?;
        out.sort();
        Ok(out)
    }

    /// Uniformly random rows, redrawn until the r+m rows are independent.
    pub fn random(n: usize, r: usize, m: usize, rng: &mut impl Rng) -> Result<Self> {
        if r + m > n {
            return Err(Error::InvalidParameter(format!("r + m = {} exceeds n = {n}", r + m)));
        }
        loop {
            let rows: Vec<BitString> = (0..r + m)
                .map(|_| BitString::from_bools(&(0..n).map(|_| rng.random::<bool>()).collect::<Vec<_>>()))
                .collect();
            let all = Gf2Matrix::new(n, rows)?;
            if all.rank() < r + m {
                continue;
            }
            let pc = Gf2Matrix::new(n, all.rows()[..r].to_vec())?;
            let pa = Gf2Matrix::new(n, all.rows()[r..].to_vec())?;
            return Self::new(pc, pa);
        }
    }

    pub fn to_text(&self) -> String {
        format!("{} {} {}\n{}{}", self.n, self.r, self.m, self.pc, self.pa)
    }
}

/// Same as [`CodeSpec::random`].
pub fn random_linear_code(n: usize, r: usize, m: usize, rng: &mut impl Rng) -> Result<CodeSpec> {
    CodeSpec::random(n, r, m, rng)
}

/// Random P_C only (m = 0) without the distance bookkeeping beyond `d`.
pub fn random_ecc_distance(n: usize, r: usize, rng: &mut impl Rng) -> Result<usize> {
    loop {
        let rows: Vec<BitString> =
            (0..r).map(|_| BitString::from_bools(&(0..n).map(|_| rng.random::<bool>()).collect::<Vec<_>>())).collect();
        let pc = Gf2Matrix::new(n, rows)?;
        if pc.rank() < r {
            continue;
        }
        return min_distance(&Gf2Matrix::new(n, pc.kernel_basis())?);
    }
}

impl FromStr for CodeSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        // '#' lines carry provenance and are ignored
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty code file".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [n, r, m] = nums[..] else {
            return Err(Error::Parse(format!("header must be \"n r m\", got {header:?}")));
        };
        let rows: Vec<BitString> = lines.map(|l| l.parse()).collect::<Result<_>>()?;
        if rows.len() != r + m {
            return Err(Error::Parse(format!("expected {} rows, found {}", r + m, rows.len())));
        }
        let pc = Gf2Matrix::new(n, rows[..r].to_vec())?;
        let pa = Gf2Matrix::new(n, rows[r..].to_vec())?;
        CodeSpec::new(pc, pa)
    }
}
