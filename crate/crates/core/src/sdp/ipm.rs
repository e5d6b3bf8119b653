//! Primal-dual interior-point method (HKM direction, Mehrotra predictor-corrector)
//! for `max lambda` subject to `S_b(y) - lambda I >= 0` on target blocks,
//! `S_b(y) >= 0` on Gram blocks, `lambda <= 1`, and a box on every variable.
//!
//! The dual pair solved is the standard one: `min <C, X>` with `A(X) = b`,
//! `X >= 0`, against `max b^T y` with `C - A*(y) = Z >= 0`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::{BlockRole, SdpError, SdpProblem};
use crate::rational::to_f64;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative tolerance on infeasibilities and the duality gap.
    pub tol: f64,
    pub max_iterations: usize,
    /// Bound on every scaled variable; keeps the optimal set bounded.
    pub box_bound: f64,
    /// Margins above `-slack` count as feasible and go on to rationalization.
    pub slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iterations: 120, box_bound: 1e3, slack: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct NumericSolution {
    pub status: SolverStatus,
    pub converged: bool,
    pub y: Vec<f64>,
    /// Attained margin, in the units of the target blocks.
    pub margin: f64,
    pub iterations: usize,
    /// `S_b(y)` at the returned point.
    pub blocks: Vec<DMatrix<f64>>,
}

/// Upper-triangle entries of a symmetric matrix.
type Sparse = Vec<(usize, usize, f64)>;

struct DenseBlock {
    c: DMatrix<f64>,
    vars: Vec<(usize, Sparse)>,
}

struct LpRow {
    c: f64,
    a: Vec<(usize, f64)>,
}

struct Scaled {
    dense: Vec<DenseBlock>,
    lp: Vec<LpRow>,
    nvars: usize,
    lambda: usize,
    c_scale: f64,
    var_scale: Vec<f64>,
}

fn scale_problem(p: &SdpProblem, box_bound: f64) -> Scaled {
    let mut c_scale: f64 = 0.0;
    for b in &p.blocks {
        for (_, v) in b.constant.entries() {
            c_scale = c_scale.max(to_f64(v).abs());
        }
    }
    if c_scale == 0.0 {
        c_scale = 1.0;
    }
    let lambda = p.vars.len();
    let nvars = lambda + 1;
    let mut dense: Vec<DenseBlock> = p
        .blocks
        .iter()
        .map(|b| {
            let mut c = DMatrix::zeros(b.dim, b.dim);
            for (&(i, j), v) in b.constant.entries() {
                c[(i, j)] = to_f64(v) / c_scale;
                c[(j, i)] = c[(i, j)];
            }
            DenseBlock { c, vars: Vec::new() }
        })
        .collect();
    let mut var_scale = Vec::with_capacity(lambda);
    for (k, var) in p.vars.iter().enumerate() {
        let s = var.coefficients.iter().flat_map(|(_, a)| a.entries().map(|(_, v)| to_f64(v).abs())).fold(0.0, f64::max);
        let s = if s > 0.0 { s } else { 1.0 };
        var_scale.push(s);
        for (b, a) in &var.coefficients {
            let entries: Sparse = a.entries().map(|(&(i, j), v)| (i, j, to_f64(v) / s)).collect();
            dense[*b].vars.push((k, entries));
        }
    }
    for (b, block) in p.blocks.iter().enumerate() {
        if matches!(block.role, BlockRole::Target { .. }) {
            dense[b].vars.push((lambda, (0..block.dim).map(|i| (i, i, 1.0)).collect()));
        }
    }
    let mut lp = vec![LpRow { c: 1.0, a: vec![(lambda, 1.0)] }];
    for k in 0..lambda {
        lp.push(LpRow { c: box_bound, a: vec![(k, 1.0)] });
        lp.push(LpRow { c: box_bound, a: vec![(k, -1.0)] });
    }
    Scaled { dense, lp, nvars, lambda, c_scale, var_scale }
}

fn trace_with(a: &Sparse, y: &DMatrix<f64>) -> f64 {
    a.iter().map(|&(i, j, v)| if i == j { v * y[(i, i)] } else { v * (y[(i, j)] + y[(j, i)]) }).sum()
}

fn add_sparse(target: &mut DMatrix<f64>, a: &Sparse, c: f64) {
    for &(i, j, v) in a {
        target[(i, j)] += c * v;
        if i != j {
            target[(j, i)] += c * v;
        }
    }
}

/// `X * A` for sparse symmetric `A`.
fn mul_sparse(x: &DMatrix<f64>, a: &Sparse) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, n);
    for &(i, j, v) in a {
        for r in 0..n {
            out[(r, j)] += x[(r, i)] * v;
        }
        if i != j {
            for r in 0..n {
                out[(r, i)] += x[(r, j)] * v;
            }
        }
    }
    out
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest step keeping `x + t dx` positive semidefinite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(chol) = Cholesky::new(x.clone()) else { return 0.0 };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else { return 0.0 };
    let m = sym(&(&linv * dx * linv.transpose()));
    let min = SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn inverse_spd(z: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if z.nrows() == 0 {
        return Some(z.clone());
    }
    Cholesky::new(z.clone()).map(|c| c.inverse())
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    xl: Vec<f64>,
    zl: Vec<f64>,
    y: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
    dy: DVector<f64>,
}

impl Scaled {
    fn a_adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let dense = self
            .dense
            .iter()
            .map(|b| {
                let mut m = DMatrix::zeros(b.c.nrows(), b.c.nrows());
                for (k, a) in &b.vars {
                    add_sparse(&mut m, a, y[*k]);
                }
                m
            })
            .collect();
        let lp = self.lp.iter().map(|r| r.a.iter().map(|(k, v)| v * y[*k]).sum()).collect();
        (dense, lp)
    }

    fn a_op(&self, dense: &[DMatrix<f64>], lp: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.nvars);
        for (b, y) in self.dense.iter().zip(dense) {
            for (k, a) in &b.vars {
                out[*k] += trace_with(a, y);
            }
        }
        for (r, v) in self.lp.iter().zip(lp) {
            for (k, a) in &r.a {
                out[*k] += a * v;
            }
        }
        out
    }

    fn schur(&self, it: &Iterate, zinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nvars, self.nvars);
        for (b, block) in self.dense.iter().enumerate() {
            for (l, al) in &block.vars {
                let t = mul_sparse(&it.x[b], al) * &zinv[b];
                for (k, ak) in &block.vars {
                    m[(*k, *l)] += trace_with(ak, &t);
                }
            }
        }
        for (r, row) in self.lp.iter().enumerate() {
            let w = it.xl[r] / it.zl[r];
            for (k, a) in &row.a {
                for (l, c) in &row.a {
                    m[(*k, *l)] += a * c * w;
                }
            }
        }
        sym(&m)
    }
}

fn factor(m: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>, SdpError> {
    let scale = m.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    Err(SdpError::SolverFailure("Schur complement is not positive definite".into()))
}

pub fn solve_feasibility(p: &SdpProblem, opts: &SolverOptions) -> Result<NumericSolution, SdpError> {
    let sp = scale_problem(p, opts.box_bound);
    let mut b = DVector::zeros(sp.nvars);
    b[sp.lambda] = 1.0;
    let nb = sp.dense.len();
    let total_dim: usize = sp.dense.iter().map(|d| d.c.nrows()).sum::<usize>() + sp.lp.len();
    let start = 10.0;
    let mut it = Iterate {
        x: sp.dense.iter().map(|d| DMatrix::identity(d.c.nrows(), d.c.nrows()) * start).collect(),
        z: sp.dense.iter().map(|d| DMatrix::identity(d.c.nrows(), d.c.nrows()) * start).collect(),
        xl: vec![start; sp.lp.len()],
        zl: vec![start; sp.lp.len()],
        y: DVector::zeros(sp.nvars),
    };
    let c_norm = 1.0 + sp.dense.iter().map(|d| d.c.norm_squared()).sum::<f64>().sqrt();
    let mut iterations = 0;
    let mut converged = false;
    let mut infeasible = false;
    let mut stalls = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let zinv: Vec<DMatrix<f64>> = it.z.iter().map(inverse_spd).collect::<Option<_>>().ok_or_else(|| SdpError::SolverFailure("dual slack lost definiteness".into()))?;
        let ax = sp.a_op(&it.x, &it.xl);
        let rp = &b - &ax;
        let (aty, atyl) = sp.a_adjoint(&it.y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &sp.dense[k].c - &it.z[k] - &aty[k]).collect();
        let rdl: Vec<f64> = (0..sp.lp.len()).map(|r| sp.lp[r].c - it.zl[r] - atyl[r]).collect();
        let gap: f64 = (0..nb).map(|k| it.x[k].dot(&it.z[k])).sum::<f64>() + it.xl.iter().zip(&it.zl).map(|(x, z)| x * z).sum::<f64>();
        let mu = gap / total_dim as f64;
        let pobj: f64 = (0..nb).map(|k| sp.dense[k].c.dot(&it.x[k])).sum::<f64>() + sp.lp.iter().zip(&it.xl).map(|(r, x)| r.c * x).sum::<f64>();
        let dobj = it.y[sp.lambda];
        let pinf = rp.norm() / (1.0 + b.norm());
        let dinf = ((0..nb).map(|k| rd[k].norm_squared()).sum::<f64>() + rdl.iter().map(|v| v * v).sum::<f64>()).sqrt() / c_norm;
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pinf < opts.tol && dinf < opts.tol && relgap < opts.tol {
            converged = true;
            break;
        }
        if pinf < 1e-7 && pobj < -opts.slack && (pobj - dobj).abs() < 0.5 * pobj.abs() {
            infeasible = true;
            break;
        }
        let m = factor(sp.schur(&it, &zinv))?;
        let direction = |sigma_mu: f64, corr: Option<&Direction>| -> Direction {
            let h: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| {
                    let mut h = &zinv[k] * sigma_mu - &it.x[k];
                    if let Some(c) = corr {
                        h -= &c.dx[k] * &c.dz[k] * &zinv[k];
                    }
                    h
                })
                .collect();
            let hl: Vec<f64> = (0..sp.lp.len())
                .map(|r| {
                    let mut h = sigma_mu / it.zl[r] - it.xl[r];
                    if let Some(c) = corr {
                        h -= c.dxl[r] * c.dzl[r] / it.zl[r];
                    }
                    h
                })
                .collect();
            let xrz: Vec<DMatrix<f64>> = (0..nb).map(|k| &it.x[k] * &rd[k] * &zinv[k]).collect();
            let xrzl: Vec<f64> = (0..sp.lp.len()).map(|r| it.xl[r] * rdl[r] / it.zl[r]).collect();
            let rhs = &rp - sp.a_op(&h, &hl) + sp.a_op(&xrz, &xrzl);
            let dy = m.solve(&rhs);
            let (ady, adyl) = sp.a_adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..nb).map(|k| &rd[k] - &ady[k]).collect();
            let dzl: Vec<f64> = (0..sp.lp.len()).map(|r| rdl[r] - adyl[r]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nb).map(|k| sym(&(&h[k] - &it.x[k] * &dz[k] * &zinv[k]))).collect();
            let dxl: Vec<f64> = (0..sp.lp.len()).map(|r| hl[r] - it.xl[r] * dzl[r] / it.zl[r]).collect();
            Direction { dx, dz, dxl, dzl, dy }
        };
        let steps = |d: &Direction| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..nb {
                ap = ap.min(max_step(&it.x[k], &d.dx[k]));
                ad = ad.min(max_step(&it.z[k], &d.dz[k]));
            }
            for r in 0..sp.lp.len() {
                if d.dxl[r] < 0.0 {
                    ap = ap.min(-it.xl[r] / d.dxl[r]);
                }
                if d.dzl[r] < 0.0 {
                    ad = ad.min(-it.zl[r] / d.dzl[r]);
                }
            }
            (ap, ad)
        };
        let pred = direction(0.0, None);
        let (ap, ad) = steps(&pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let gap_aff: f64 = (0..nb).map(|k| (&it.x[k] + &pred.dx[k] * ap).dot(&(&it.z[k] + &pred.dz[k] * ad))).sum::<f64>()
            + (0..sp.lp.len()).map(|r| (it.xl[r] + ap * pred.dxl[r]) * (it.zl[r] + ad * pred.dzl[r])).sum::<f64>();
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);
        let corr = direction(sigma * mu, Some(&pred));
        let (ap, ad) = steps(&corr);
        let (ap, ad) = ((0.95 * ap).min(1.0), (0.95 * ad).min(1.0));
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls > 3 {
                break;
            }
        }
        for k in 0..nb {
            it.x[k] += &corr.dx[k] * ap;
            it.z[k] += &corr.dz[k] * ad;
        }
        for r in 0..sp.lp.len() {
            it.xl[r] += ap * corr.dxl[r];
            it.zl[r] += ad * corr.dzl[r];
        }
        it.y += &corr.dy * ad;
    }
    let lambda = it.y[sp.lambda];
    let status = if !infeasible && lambda >= -opts.slack { SolverStatus::Feasible } else { SolverStatus::Infeasible };
    let y: Vec<f64> = (0..sp.lambda).map(|k| it.y[k] * sp.c_scale / sp.var_scale[k]).collect();
    let mut blocks: Vec<DMatrix<f64>> = sp.dense.iter().map(|d| &d.c * sp.c_scale).collect();
    for (k, var) in p.vars.iter().enumerate() {
        for (bi, a) in &var.coefficients {
            let entries: Sparse = a.entries().map(|(&(i, j), v)| (i, j, to_f64(v))).collect();
            add_sparse(&mut blocks[*bi], &entries, -y[k]);
        }
    }
    Ok(NumericSolution { status, converged, y, margin: lambda * sp.c_scale, iterations, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::QuadraticForm;
    use crate::sdp::{assemble, LinearKind, TargetBlockInput};
    use crate::rational::int;

    fn diag(entries: &[i64]) -> QuadraticForm {
        let mut q = QuadraticForm::zero(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            q.add_entry(i, i, int(v));
        }
        q
    }

    #[test]
    fn identity_target_has_unit_margin() {
        let input = TargetBlockInput { label: "I".into(), target: diag(&[1, 1, 1]), scalar_parts: vec![], linear: vec![], families: vec![] };
        let p = assemble(&[input], 0).unwrap();
        let sol = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Feasible);
        assert!((sol.margin - 1.0).abs() < 1e-6, "margin {}", sol.margin);
    }

    #[test]
    fn multiplier_fixes_an_indefinite_target() {
        // diag(1, -1) + y * diag(0, 2) needs y close to the box interior.
        let input = TargetBlockInput {
            label: "L".into(),
            target: diag(&[1, -1]),
            scalar_parts: vec![],
            linear: vec![(LinearKind::Quadratic, diag(&[0, -2]))],
            families: vec![],
        };
        let p = assemble(&[input], 0).unwrap();
        let sol = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Feasible);
        assert!(sol.y[0] > 0.5);
    }

    #[test]
    fn negative_definite_target_is_infeasible() {
        let input = TargetBlockInput { label: "N".into(), target: diag(&[-1, 2]), scalar_parts: vec![], linear: vec![], families: vec![] };
        let p = assemble(&[input], 0).unwrap();
        let sol = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Infeasible);
        assert!(sol.margin < -0.5);
    }
}
