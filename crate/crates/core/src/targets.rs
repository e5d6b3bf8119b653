//! Target forms `E_{s,m,n}` whose integrals against `p^{1-2m}` the prover bounds below.
//!
//! Each target is a sum over index tuples in `[n]^m` of abstract-index
//! kernels. The `E1` kernel at `(a_1, ..., a_m)` is
//! `(-1)^(m+1)/2 * p^(2m-1) * D_{a_m} ... D_{a_2} (p_{a_1}^2 / p)` where
//! `D_b` is the derivation `v -> v_bb / 2`, so summing over `a_2..a_m`
//! recovers the heat time derivatives.

use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffform::{Axis, DiffPoly, LaurentForm};
use crate::dimension::{DimCoeff, Dimension, SingularDimension};
use crate::rational::{frac, int, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TargetError {
    #[error("order m = {m} is not supported for family {family}")]
    UnsupportedOrder { family: TargetFamily, m: u32 },
    #[error("concrete form requires a concrete dimension")]
    GenericDimension,
    #[error("kernel sum disagrees with the direct construction for m = {m}, n = {n}")]
    KernelMismatch { m: u32, n: usize },
    #[error("denominator did not cancel")]
    DenominatorLeft,
    #[error(transparent)]
    Singular(#[from] SingularDimension),
}

/// Target family index `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetFamily {
    E0,
    E1,
    E2,
    E3,
}

impl std::fmt::Display for TargetFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TargetFamily::E0 => "E0",
            TargetFamily::E1 => "E1",
            TargetFamily::E2 => "E2",
            TargetFamily::E3 => "E3",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for TargetFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "E0" | "0" => Ok(TargetFamily::E0),
            "E1" | "1" | "C1" => Ok(TargetFamily::E1),
            "E2" | "2" | "C2" => Ok(TargetFamily::E2),
            "E3" | "3" | "C3" => Ok(TargetFamily::E3),
            _ => Err(format!("unknown target family `{s}`")),
        }
    }
}

/// One kernel with its dimension-dependent weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelComponent {
    pub coeff: DimCoeff,
    pub kernel: DiffPoly,
}

/// `sum_c coeff_c(n) * kernel_c(a_1..a_m)` over abstract axes `a, b, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelFamily {
    pub arity: usize,
    pub components: Vec<KernelComponent>,
}

impl KernelFamily {
    /// Combined kernel at a concrete `n`, still over abstract axes.
    pub fn at_dimension(&self, n: usize) -> Result<DiffPoly, SingularDimension> {
        let mut out = DiffPoly::zero();
        for c in &self.components {
            out.add_scaled(&c.kernel, &c.coeff.eval(n)?);
        }
        Ok(out)
    }

    /// Sum of instantiations over every tuple in `[n]^arity`.
    pub fn sum_over(&self, n: usize) -> Result<DiffPoly, SingularDimension> {
        let kernel = self.at_dimension(n)?;
        let axes = Axis::concrete_range(n);
        let mut out = DiffPoly::zero();
        for tuple in tuples(&axes, self.arity) {
            out.add_scaled(&instantiate(&kernel, &tuple), &Rational::one());
        }
        Ok(out)
    }
}

/// Every tuple of length `k` over `axes`.
pub fn tuples(axes: &[Axis], k: usize) -> Vec<Vec<Axis>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out.into_iter().flat_map(|t| axes.iter().map(move |&a| [t.clone(), vec![a]].concat())).collect();
    }
    out
}

/// Substitute abstract axis `i` by `tuple[i]`; equal images merge their orders.
pub fn instantiate(kernel: &DiffPoly, tuple: &[Axis]) -> DiffPoly {
    kernel.map_axes(&|a| match a {
        Axis::Abstract(i) if (i as usize) < tuple.len() => tuple[i as usize],
        other => other,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetForm {
    pub family: TargetFamily,
    pub m: u32,
    pub dimension: Dimension,
    /// Concrete expansion, present when the dimension is concrete.
    pub form: Option<DiffPoly>,
    pub kernels: KernelFamily,
}

fn factorial(k: u32) -> Rational {
    (1..=k).fold(Rational::one(), |acc, i| acc * int(i as i64))
}

fn e1_kernel(m: u32) -> DiffPoly {
    let axes = Axis::abstract_range(m as usize);
    let mut form = LaurentForm::new(DiffPoly::deriv(&[axes[0]]).pow(2), 1);
    for &b in axes[1..].iter().rev() {
        form = form.half_laplacian_along(&[b]);
    }
    let sign = if m % 2 == 1 { frac(1, 2) } else { frac(-1, 2) };
    form.numerator_over(2 * m - 1).expect("power of p stays below 2m-1").scale(&sign)
}

fn log_laplacian_term(a: Axis) -> DiffPoly {
    &DiffPoly::deriv(&[a]).pow(2) - &(&DiffPoly::p() * &DiffPoly::deriv(&[a, a]))
}

fn e0_kernel(m: u32) -> DiffPoly {
    Axis::abstract_range(m as usize).into_iter().fold(DiffPoly::one(), |acc, a| &acc * &log_laplacian_term(a))
}

/// Kernel family for `E_s` at order `m`.
pub fn tuple_kernels(s: TargetFamily, m: u32) -> Result<KernelFamily, TargetError> {
    let unsupported = Err(TargetError::UnsupportedOrder { family: s, m });
    if m == 0 || m > 4 {
        return unsupported;
    }
    let e1 = || KernelComponent { coeff: DimCoeff::constant(Rational::one()), kernel: e1_kernel(m) };
    let e0 = |power: u32| {
        let weight = -factorial(m - 1) / int(2);
        KernelComponent { coeff: DimCoeff::monomial(weight, power, 0, 0), kernel: e0_kernel(m) }
    };
    let components = match s {
        TargetFamily::E0 if m < 2 => return unsupported,
        TargetFamily::E0 => vec![KernelComponent { coeff: DimCoeff::constant(Rational::one()), kernel: e0_kernel(m) }],
        TargetFamily::E1 => vec![e1()],
        TargetFamily::E2 | TargetFamily::E3 if m < 2 => return unsupported,
        TargetFamily::E2 => vec![e1(), e0(m - 1)],
        TargetFamily::E3 => vec![e1(), e0(m)],
    };
    Ok(KernelFamily { arity: m as usize, components })
}

/// `E_{1,m,n}` by repeated heat time derivatives of `|grad p|^2 / p`.
fn e1_direct(m: u32, n: usize) -> Result<DiffPoly, TargetError> {
    let grad: DiffPoly = Axis::concrete_range(n)
        .into_iter()
        .fold(DiffPoly::zero(), |acc, a| &acc + &DiffPoly::deriv(&[a]).pow(2));
    let mut form = LaurentForm::new(grad, 1);
    for _ in 1..m {
        form = form.heat_time_derivative(n).expect("concrete axes");
    }
    let sign = if m % 2 == 1 { frac(1, 2) } else { frac(-1, 2) };
    Ok(form.numerator_over(2 * m - 1).ok_or(TargetError::DenominatorLeft)?.scale(&sign))
}

fn e0_direct(m: u32, n: usize) -> DiffPoly {
    let base = Axis::concrete_range(n).into_iter().fold(DiffPoly::zero(), |acc, a| &acc + &log_laplacian_term(a));
    base.pow(m)
}

fn build(s: TargetFamily, m: u32, dimension: Dimension) -> Result<TargetForm, TargetError> {
    let kernels = tuple_kernels(s, m)?;
    let form = match dimension {
        Dimension::Generic => None,
        Dimension::Concrete(n) => {
            let direct = match s {
                TargetFamily::E0 => e0_direct(m, n),
                TargetFamily::E1 => e1_direct(m, n)?,
                TargetFamily::E2 | TargetFamily::E3 => {
                    let power = if s == TargetFamily::E2 { m - 1 } else { m };
                    let weight = factorial(m - 1) / (int(2) * num_traits::pow(int(n as i64), power as usize));
                    &e1_direct(m, n)? - &e0_direct(m, n).scale(&weight)
                }
            };
            if kernels.sum_over(n)? != direct {
                return Err(TargetError::KernelMismatch { m, n });
            }
            Some(direct)
        }
    };
    Ok(TargetForm { family: s, m, dimension, form, kernels })
}

pub fn target_e0(m: u32, dimension: Dimension) -> Result<TargetForm, TargetError> {
    build(TargetFamily::E0, m, dimension)
}

pub fn target_e1(m: u32, dimension: Dimension) -> Result<TargetForm, TargetError> {
    build(TargetFamily::E1, m, dimension)
}

pub fn target_e(s: TargetFamily, m: u32, dimension: Dimension) -> Result<TargetForm, TargetError> {
    build(s, m, dimension)
}

impl TargetForm {
    pub fn concrete(&self) -> Result<&DiffPoly, TargetError> {
        self.form.as_ref().ok_or(TargetError::GenericDimension)
    }
}

/// Closed-form value of `int E_{1,m,n} / p^(2m-1)` for a Gaussian with variance `s = sigma^2 + t`.
pub fn gaussian_e1_integral(m: u32, n: usize, variance: &Rational) -> Rational {
    int(n as i64) * factorial(m - 1) / (int(2) * num_traits::pow(variance.clone(), m as usize))
}

/// Same for `E_s`, using `int E_0 / p^(2m-1) = n^m / s^m` for a Gaussian.
pub fn gaussian_target_integral(s: TargetFamily, m: u32, n: usize, variance: &Rational) -> Rational {
    let e1 = gaussian_e1_integral(m, n, variance);
    let e0 = num_traits::pow(int(n as i64), m as usize) / num_traits::pow(variance.clone(), m as usize);
    let weight = |power: u32| factorial(m - 1) / (int(2) * num_traits::pow(int(n as i64), power as usize));
    match s {
        TargetFamily::E0 => e0,
        TargetFamily::E1 => e1,
        TargetFamily::E2 => e1 - weight(m - 1) * e0,
        TargetFamily::E3 => e1 - weight(m) * e0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffform::{DerivSymbol, DiffMonomial};
    use num_traits::Zero;

    /// Single-axis monomial from a list of (order, exponent) pairs.
    fn f(spec: &[(u8, u16)]) -> DiffMonomial {
        DiffMonomial::from_factors(spec.iter().map(|&(o, k)| (DerivSymbol::from_orders([(Axis::Concrete(1), o)]), k)))
    }

    fn poly(terms: &[(&[(u8, u16)], Rational)]) -> DiffPoly {
        DiffPoly::from_terms(terms.iter().map(|(m, c)| (f(m), c.clone())))
    }

    #[test]
    fn e1_order_two_one_axis() {
        let t = target_e1(2, Dimension::Concrete(1)).unwrap();
        let expect = poly(&[(&[(0, 2), (1, 1), (3, 1)], frac(-1, 2)), (&[(0, 1), (1, 2), (2, 1)], frac(1, 4))]);
        assert_eq!(t.form.unwrap(), expect);
    }

    #[test]
    fn e2_order_three_one_axis_matches_worked_example() {
        let t = target_e(TargetFamily::E2, 3, Dimension::Concrete(1)).unwrap();
        let expect = poly(&[
            (&[(0, 4), (3, 2)], frac(1, 4)),
            (&[(0, 3), (1, 1), (2, 1), (3, 1)], frac(-1, 2)),
            (&[(0, 4), (1, 1), (5, 1)], frac(1, 4)),
            (&[(0, 2), (1, 2), (2, 2)], frac(-11, 4)),
            (&[(0, 3), (1, 2), (4, 1)], frac(-1, 8)),
            (&[(0, 3), (2, 3)], int(1)),
            (&[(0, 1), (1, 4), (2, 1)], int(3)),
            (&[(1, 6)], int(-1)),
        ]);
        assert_eq!(t.form.unwrap(), expect);
    }

    #[test]
    fn e0_order_three_one_axis() {
        let t = target_e0(3, Dimension::Concrete(1)).unwrap();
        let expect = poly(&[
            (&[(1, 6)], int(1)),
            (&[(0, 1), (1, 4), (2, 1)], int(-3)),
            (&[(0, 2), (1, 2), (2, 2)], int(3)),
            (&[(0, 3), (2, 3)], int(-1)),
        ]);
        assert_eq!(t.form.unwrap(), expect);
        assert!(target_e0(1, Dimension::Concrete(1)).is_err());
    }

    #[test]
    fn kernel_sums_match_direct_targets() {
        for s in [TargetFamily::E0, TargetFamily::E1, TargetFamily::E2, TargetFamily::E3] {
            for m in 2..=3 {
                for n in 1..=4 {
                    let t = target_e(s, m, Dimension::Concrete(n)).unwrap();
                    assert!(t.concrete().unwrap().is_homogeneous(2 * m, 2 * m));
                }
            }
        }
        for n in 1..=2 {
            target_e(TargetFamily::E3, 4, Dimension::Concrete(n)).unwrap();
        }
    }

    #[test]
    fn order_two_kernels_match_displayed_pair_kernels() {
        let (a, b) = (Axis::abs('a'), Axis::abs('b'));
        let p = DiffPoly::p;
        let d = DiffPoly::deriv;
        // T1 = -p^2 p_a p_abb / 2 + p p_a^2 p_bb / 4
        let t1 = &(&(&p().pow(2) * &d(&[a])) * &d(&[a, b, b])).scale(&frac(-1, 2))
            + &(&(&p() * &d(&[a]).pow(2)) * &d(&[b, b])).scale(&frac(1, 4));
        let t2 = &(&d(&[a]).pow(2) - &(&p() * &d(&[a, a]))) * &(&d(&[b]).pow(2) - &(&p() * &d(&[b, b])));
        let k = tuple_kernels(TargetFamily::E2, 2).unwrap();
        assert_eq!(k.components[0].kernel, t1);
        assert_eq!(k.components[1].kernel, t2);
        assert_eq!(k.components[1].coeff.eval(4).unwrap(), frac(-1, 8));
    }

    #[test]
    fn order_three_kernel_leading_term() {
        let (a, b, c) = (Axis::abs('a'), Axis::abs('b'), Axis::abs('c'));
        let k = tuple_kernels(TargetFamily::E3, 3).unwrap();
        let lead = DiffMonomial::from_factors([
            (DerivSymbol::p(), 4),
            (DerivSymbol::along(&[a, c, c]), 1),
            (DerivSymbol::along(&[a, b, b]), 1),
        ]);
        assert_eq!(k.components[0].kernel.coefficient(&lead), frac(1, 4));
        assert_eq!(k.components[1].coeff.eval(2).unwrap(), frac(-1, 8));
    }

    #[test]
    fn gaussian_gap_of_e3() {
        let s = int(2);
        let gap = gaussian_target_integral(TargetFamily::E3, 3, 2, &s);
        // (m-1)! (n-1) / (2 s^m)
        assert_eq!(gap, frac(2, 16));
        assert!(gaussian_target_integral(TargetFamily::E2, 3, 2, &s).is_zero());
    }
}
