//! From a floating interior point to exact PSD certificates.
//!
//! Near-zero eigenvectors of each block are rounded to a rational kernel basis
//! and imposed exactly as linear equations in the multipliers; the remaining
//! free multipliers are rounded by continued fractions and the pivots solved
//! exactly. Each block is then certified by an exact LDL^T decomposition.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{One, Signed, Zero};

use super::{NumericSolution, SdpError, SdpProblem};
use crate::linalg::{SparseRref, SparseVec};
use crate::rational::{rationalize, Rational};
use crate::reduction::QuadraticForm;

#[derive(Clone, Debug)]
pub struct RationalizeOptions {
    pub denom_bound: u64,
    /// Escalations of the bound, by a factor 100 each.
    pub max_retries: usize,
    /// Eigenvalues below `kernel_tol * max(1, largest)` are treated as zero.
    pub kernel_tol: f64,
}

impl Default for RationalizeOptions {
    fn default() -> Self {
        RationalizeOptions { denom_bound: 10_000, max_retries: 3, kernel_tol: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SosTerm {
    pub weight: Rational,
    pub vector: Vec<Rational>,
}

/// `sum_i weight_i (sum_j vector_ij m_j)^2` with nonnegative weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSosDecomposition {
    pub dim: usize,
    pub terms: Vec<SosTerm>,
}

impl ExactSosDecomposition {
    pub fn reconstruct(&self) -> QuadraticForm {
        let mut q = QuadraticForm::zero(self.dim);
        for t in &self.terms {
            for (i, a) in t.vector.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (j, b) in t.vector.iter().enumerate().skip(i) {
                    if !b.is_zero() {
                        q.add_entry(i, j, &t.weight * a * b);
                    }
                }
            }
        }
        q
    }

    pub fn weights_nonnegative(&self) -> bool {
        self.terms.iter().all(|t| !t.weight.is_negative())
    }
}

/// Exact `G = sum_k d_k l_k l_k^T` with `l_k[k] = 1`; `None` unless `G` is PSD.
pub fn ldl_decomposition(g: &QuadraticForm) -> Option<ExactSosDecomposition> {
    let n = g.dim;
    let mut a = g.dense();
    let mut terms = Vec::new();
    for k in 0..n {
        let d = a[k][k].clone();
        if d.is_negative() {
            return None;
        }
        if d.is_zero() {
            if a[k][k + 1..].iter().any(|v| !v.is_zero()) {
                return None;
            }
            continue;
        }
        let mut l = vec![Rational::zero(); n];
        for (j, slot) in l.iter_mut().enumerate().skip(k) {
            *slot = &a[k][j] / &d;
        }
        for i in k + 1..n {
            if l[i].is_zero() {
                continue;
            }
            let f = &d * &l[i];
            for j in i..n {
                if !l[j].is_zero() {
                    let v = &f * &l[j];
                    a[i][j] -= &v;
                    if i != j {
                        a[j][i] -= v;
                    }
                }
            }
        }
        terms.push(SosTerm { weight: d, vector: l });
    }
    Some(ExactSosDecomposition { dim: n, terms })
}

#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub y: Vec<Rational>,
    pub blocks: Vec<QuadraticForm>,
    pub decompositions: Vec<ExactSosDecomposition>,
    pub denom_bound: u64,
    pub attempts: usize,
    /// Kernel dimension imposed on each block.
    pub kernel_dims: Vec<usize>,
}

/// Required ratio between the last kernel eigenvalue and the next one.
const KERNEL_GAP: f64 = 1e-3;

/// Rational basis of the near-null space of `s`, in reduced row echelon form.
fn rational_kernel(s: &DMatrix<f64>, tol: f64, bound: u64) -> Vec<Vec<Rational>> {
    let d = s.nrows();
    if d == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(s.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // The kernel ends at the last small eigenvalue followed by a clear gap.
    let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cut = (1..=d)
        .rev()
        .find(|&c| {
            let last = sorted[c - 1];
            let next = sorted.get(c).copied().unwrap_or(f64::INFINITY);
            last < tol * top && last.max(0.0) <= KERNEL_GAP * next
        })
        .unwrap_or(0);
    if cut == 0 {
        return Vec::new();
    }
    let cols = &order[..cut];
    let mut rows: Vec<Vec<f64>> = cols.iter().map(|&c| eig.eigenvectors.column(c).iter().cloned().collect()).collect();
    // Floating RREF with column choice by the largest entry.
    let k = rows.len();
    let mut pivots = Vec::new();
    for r in 0..k {
        let (mut best, mut bi, mut bj) = (0.0, r, 0);
        for (i, row) in rows.iter().enumerate().skip(r) {
            for (j, v) in row.iter().enumerate() {
                if !pivots.contains(&j) && v.abs() > best {
                    best = v.abs();
                    bi = i;
                    bj = j;
                }
            }
        }
        rows.swap(r, bi);
        let pv = rows[r][bj];
        for v in rows[r].iter_mut() {
            *v /= pv;
        }
        for i in 0..k {
            if i != r {
                let f = rows[i][bj];
                let src = rows[r].clone();
                for (v, s) in rows[i].iter_mut().zip(src) {
                    *v -= f * s;
                }
            }
        }
        pivots.push(bj);
    }
    rows.into_iter().map(|row| row.into_iter().map(|v| if v.abs() < 1e-12 { Rational::zero() } else { rationalize(v, bound) }).collect()).collect()
}

fn mat_vec(q: &QuadraticForm, v: &[Rational]) -> BTreeMap<usize, Rational> {
    let mut out: BTreeMap<usize, Rational> = BTreeMap::new();
    for (&(i, j), a) in q.entries() {
        if !v[j].is_zero() {
            *out.entry(i).or_insert_with(Rational::zero) += a * &v[j];
        }
        if i != j && !v[i].is_zero() {
            *out.entry(j).or_insert_with(Rational::zero) += a * &v[i];
        }
    }
    out
}

fn attempt(sol: &NumericSolution, p: &SdpProblem, bound: u64, tol: f64) -> Option<(Vec<Rational>, Vec<usize>)> {
    let nv = p.vars.len();
    // Column 0 carries the constant; variable k sits in column k + 1.
    let mut engine = SparseRref::new(false);
    let mut kernel_dims = Vec::with_capacity(p.blocks.len());
    let mut by_block: Vec<Vec<(usize, &QuadraticForm)>> = vec![Vec::new(); p.blocks.len()];
    for (k, var) in p.vars.iter().enumerate() {
        for (b, a) in &var.coefficients {
            by_block[*b].push((k, a));
        }
    }
    let mut pending: Vec<SparseVec> = Vec::new();
    for (b, block) in p.blocks.iter().enumerate() {
        let kernel = rational_kernel(&sol.blocks[b], tol, bound);
        kernel_dims.push(kernel.len());
        for v in &kernel {
            let mut rows: BTreeMap<usize, Vec<(usize, Rational)>> = BTreeMap::new();
            for (r, c) in mat_vec(&block.constant, v) {
                rows.entry(r).or_default().push((0, -c));
            }
            for (k, a) in &by_block[b] {
                for (r, c) in mat_vec(a, v) {
                    rows.entry(r).or_default().push((k + 1, c));
                }
            }
            pending.extend(rows.into_values().map(SparseVec::from_entries));
        }
    }
    // Sparse rows with small entries first keeps fill-in and coefficient growth down.
    let weight = |v: &SparseVec| v.entries().iter().map(|(_, a)| a.numer().bits() + a.denom().bits()).sum::<u64>();
    pending.sort_by_cached_key(|v| (v.entries().len(), weight(v)));
    for (id, row) in pending.iter().enumerate() {
        engine.insert(row, id);
    }
    if engine.is_pivot(0) {
        return None;
    }
    let mut y: Vec<Option<Rational>> = (0..nv).map(|k| (!engine.is_pivot(k + 1)).then(|| rationalize(sol.y[k], bound))).collect();
    for row in engine.rows() {
        let (lead, _) = row.leading().cloned().expect("nonzero row");
        let mut v = Rational::zero();
        for (c, a) in row.entries() {
            if *c == lead {
                continue;
            }
            let u = if *c == 0 { Rational::one() } else { y[c - 1].clone().expect("free column") };
            v -= a * u;
        }
        y[lead - 1] = Some(v);
    }
    Some((y.into_iter().map(|v| v.expect("every variable assigned")).collect(), kernel_dims))
}

pub fn rationalize_and_certify(sol: &NumericSolution, p: &SdpProblem, opts: &RationalizeOptions) -> Result<ExactSolution, SdpError> {
    let mut bound = opts.denom_bound;
    for attempt_no in 0..=opts.max_retries {
        if let Some((y, kernel_dims)) = attempt(sol, p, bound, opts.kernel_tol) {
            let blocks = p.evaluate(&y);
            let decompositions: Option<Vec<ExactSosDecomposition>> = blocks.iter().map(ldl_decomposition).collect();
            if let Some(decompositions) = decompositions {
                return Ok(ExactSolution { y, blocks, decompositions, denom_bound: bound, attempts: attempt_no + 1, kernel_dims });
            }
        }
        if attempt_no < opts.max_retries {
            bound = bound.saturating_mul(100);
        }
    }
    Err(SdpError::Rationalization { attempts: opts.max_retries + 1, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn from_rows(rows: &[&[i64]]) -> QuadraticForm {
        let mut q = QuadraticForm::zero(rows.len());
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate().skip(i) {
                q.add_entry(i, j, int(v));
            }
        }
        q
    }

    #[test]
    fn diagonal_matrix_gives_unit_vectors() {
        let d = ldl_decomposition(&from_rows(&[&[4, 0], &[0, 9]])).unwrap();
        assert_eq!(d.terms.len(), 2);
        assert_eq!(d.terms[0], SosTerm { weight: int(4), vector: vec![int(1), int(0)] });
        assert_eq!(d.terms[1], SosTerm { weight: int(9), vector: vec![int(0), int(1)] });
    }

    #[test]
    fn rank_one_square_is_recovered() {
        // 1/2 (m1 - 3 m2 + 2 m3)^2
        let v = [int(1), int(-3), int(2)];
        let mut q = QuadraticForm::zero(3);
        for i in 0..3 {
            for j in i..3 {
                q.add_entry(i, j, frac(1, 2) * &v[i] * &v[j]);
            }
        }
        let d = ldl_decomposition(&q).unwrap();
        assert_eq!(d.terms, vec![SosTerm { weight: frac(1, 2), vector: v.to_vec() }]);
    }

    #[test]
    fn indefinite_matrices_are_rejected() {
        assert!(ldl_decomposition(&from_rows(&[&[1, 2], &[2, 1]])).is_none());
        assert!(ldl_decomposition(&from_rows(&[&[0, 1], &[1, 5]])).is_none());
    }

    fn float_min_eig(q: &QuadraticForm) -> f64 {
        let n = q.dim;
        let m = DMatrix::from_fn(n, n, |i, j| crate::rational::to_f64(&q.get(i, j)));
        SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs_and_agrees_with_eigenvalues(
            vecs in proptest::collection::vec(proptest::collection::vec(-4i64..5, 4), 1..4),
            shift in -3i64..2,
        ) {
            let mut q = QuadraticForm::zero(4);
            for v in &vecs {
                for i in 0..4 {
                    for j in i..4 {
                        q.add_entry(i, j, int(v[i] * v[j]));
                    }
                }
            }
            for i in 0..4 {
                q.add_entry(i, i, int(shift));
            }
            let min = float_min_eig(&q);
            match ldl_decomposition(&q) {
                Some(d) => {
                    prop_assert!(d.weights_nonnegative());
                    prop_assert_eq!(d.reconstruct(), q);
                    prop_assert!(min > -1e-9);
                }
                None => prop_assert!(min < 1e-9),
            }
        }
    }
}
