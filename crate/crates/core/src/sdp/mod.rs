//! The semidefinite feasibility problem behind a certificate, its numerical
//! solution, and the exact rational decomposition extracted from it.
//!
//! Every block is an affine matrix function `S_b(y) = C_b - sum_k y_k A_{k,b}`.
//! Target blocks hold the reduced target minus multiples of the quadratic
//! constraints and the log-concave products; Gram blocks hold the Gram
//! matrices of the nonnegative multipliers attached to a target block.

mod exact;
mod ipm;

pub use exact::{ldl_decomposition, rationalize_and_certify, ExactSolution, ExactSosDecomposition, RationalizeOptions, SosTerm};
pub use ipm::{solve_feasibility, NumericSolution, SolverOptions, SolverStatus};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::Rational;
use crate::reduction::{ParametricFamily, QuadraticForm};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SdpError {
    #[error("block `{block}`: expected a {expected}x{expected} matrix, got {got}x{got}")]
    BasisMismatch { block: String, expected: usize, got: usize },
    #[error("scalar part count {got} differs from the {expected} shared scalars")]
    ScalarCount { expected: usize, got: usize },
    #[error("the solver broke down: {0}")]
    SolverFailure(String),
    #[error("no exact certificate after {attempts} rationalization attempts (last denominator bound {bound})")]
    Rationalization { attempts: usize, bound: u64 },
}

/// What a linear multiplier multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearKind {
    Quadratic,
    Intrinsic,
}

/// One target block before assembly.
#[derive(Clone, Debug)]
pub struct TargetBlockInput {
    pub label: String,
    pub target: QuadraticForm,
    /// Reduced scalar terms, one per shared scalar.
    pub scalar_parts: Vec<QuadraticForm>,
    pub linear: Vec<(LinearKind, QuadraticForm)>,
    pub families: Vec<ParametricFamily>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockRole {
    Target { label: String },
    Gram { target: usize, family: usize },
}

#[derive(Clone, Debug)]
pub struct SdpBlock {
    pub role: BlockRole,
    pub dim: usize,
    pub constant: QuadraticForm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarRole {
    Linear { block: usize, kind: LinearKind, index: usize },
    /// Gram entry `(i, j)` of family `family` in target block `block`.
    Gram { block: usize, family: usize, entry: (usize, usize) },
    Scalar(usize),
}

#[derive(Clone, Debug)]
pub struct SdpVariable {
    pub role: VarRole,
    /// `(block, A_{k,b})` for every block the variable enters.
    pub coefficients: Vec<(usize, QuadraticForm)>,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub blocks: Vec<SdpBlock>,
    pub vars: Vec<SdpVariable>,
    pub scalars: usize,
}

impl SdpProblem {
    pub fn target_blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().filter(|(_, b)| matches!(b.role, BlockRole::Target { .. })).map(|(i, _)| i)
    }

    /// Exact `S_b(y)` for every block.
    pub fn evaluate(&self, y: &[Rational]) -> Vec<QuadraticForm> {
        let mut out: Vec<QuadraticForm> = self.blocks.iter().map(|b| b.constant.clone()).collect();
        for (var, v) in self.vars.iter().zip(y) {
            if v.is_zero() {
                continue;
            }
            for (b, a) in &var.coefficients {
                out[*b].add_scaled(a, &-v);
            }
        }
        out
    }
}

fn unit(dim: usize, i: usize, j: usize, v: Rational) -> QuadraticForm {
    let mut q = QuadraticForm::zero(dim);
    q.add_entry(i, j, v);
    q
}

/// Build the block problem. Gram entries of product classes that do not reduce
/// to quadratic forms are tied so that those classes get zero coefficient.
pub fn assemble(inputs: &[TargetBlockInput], scalars: usize) -> Result<SdpProblem, SdpError> {
    let mut blocks = Vec::new();
    let mut vars = Vec::new();
    let mut scalar_coeffs: Vec<Vec<(usize, QuadraticForm)>> = vec![Vec::new(); scalars];
    for (bi, input) in inputs.iter().enumerate() {
        let dim = input.target.dim;
        let mismatch = |got: usize| SdpError::BasisMismatch { block: input.label.clone(), expected: dim, got };
        if input.scalar_parts.len() != scalars {
            return Err(SdpError::ScalarCount { expected: scalars, got: input.scalar_parts.len() });
        }
        let target_idx = blocks.len();
        blocks.push(SdpBlock { role: BlockRole::Target { label: input.label.clone() }, dim, constant: input.target.clone() });
        for (s, part) in input.scalar_parts.iter().enumerate() {
            if part.dim != dim {
                return Err(mismatch(part.dim));
            }
            if !part.is_zero() {
                scalar_coeffs[s].push((target_idx, part.scale(&-Rational::one())));
            }
        }
        for (index, (kind, g)) in input.linear.iter().enumerate() {
            if g.dim != dim {
                return Err(mismatch(g.dim));
            }
            vars.push(SdpVariable { role: VarRole::Linear { block: bi, kind: *kind, index }, coefficients: vec![(target_idx, g.clone())] });
        }
        for (fi, fam) in input.families.iter().enumerate() {
            let half = fam.half_basis.len();
            let gram_idx = blocks.len();
            blocks.push(SdpBlock { role: BlockRole::Gram { target: bi, family: fi }, dim: half, constant: QuadraticForm::zero(half) });
            for class in &fam.classes {
                let mult = |(i, j): (usize, usize)| if i == j { Rational::one() } else { Rational::from_integer(2.into()) };
                match &class.reduced {
                    Some(r) => {
                        if r.dim != dim {
                            return Err(mismatch(r.dim));
                        }
                        for &e in &class.pairs {
                            let coefficients = vec![(gram_idx, unit(half, e.0, e.1, -Rational::one())), (target_idx, r.scale(&mult(e)))];
                            vars.push(SdpVariable { role: VarRole::Gram { block: bi, family: fi, entry: e }, coefficients });
                        }
                    }
                    None => {
                        // sum_e mult(e) W_e = 0: eliminate the first entry.
                        let e0 = class.pairs[0];
                        for &e in &class.pairs[1..] {
                            let mut a = unit(half, e.0, e.1, -Rational::one());
                            a.add_entry(e0.0, e0.1, mult(e) / mult(e0));
                            vars.push(SdpVariable { role: VarRole::Gram { block: bi, family: fi, entry: e }, coefficients: vec![(gram_idx, a)] });
                        }
                    }
                }
            }
        }
    }
    for (s, coefficients) in scalar_coeffs.into_iter().enumerate() {
        vars.push(SdpVariable { role: VarRole::Scalar(s), coefficients });
    }
    Ok(SdpProblem { blocks, vars, scalars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    pub(crate) fn diag(entries: &[i64]) -> QuadraticForm {
        let mut q = QuadraticForm::zero(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            q.add_entry(i, i, int(v));
        }
        q
    }

    #[test]
    fn evaluate_is_affine() {
        let input = TargetBlockInput {
            label: "L".into(),
            target: diag(&[1, 1]),
            scalar_parts: vec![],
            linear: vec![(LinearKind::Quadratic, unit(2, 0, 1, int(1)))],
            families: vec![],
        };
        let p = assemble(&[input], 0).unwrap();
        assert_eq!(p.vars.len(), 1);
        let s = p.evaluate(&[int(3)]);
        assert_eq!(s[0].get(0, 1), int(-3));
        assert_eq!(s[0].get(1, 1), int(1));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let input = TargetBlockInput {
            label: "L".into(),
            target: diag(&[1, 1]),
            scalar_parts: vec![],
            linear: vec![(LinearKind::Quadratic, diag(&[1, 1, 1]))],
            families: vec![],
        };
        assert!(matches!(assemble(&[input], 0), Err(SdpError::BasisMismatch { .. })));
    }
}
