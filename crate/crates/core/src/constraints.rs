//! Integral constraints (divergences that integrate to zero) and log-concave
//! constraints (signed principal minors of `L = p Hess(p) - grad(p)^T grad(p)`).

use std::collections::HashSet;

use num_traits::One;
use thiserror::Error;

use crate::diffform::{enumerate_monomials, Axis, DiffMonomial, DiffPoly};
use crate::rational::{int, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("minor size {k} out of range for a {dim}x{dim} matrix")]
    MinorSize { k: usize, dim: usize },
    #[error("order m = {0} is too small")]
    Order(u32),
    #[error("no axes given")]
    NoAxes,
}

/// `p * dG/dx_axis - (2m-2) * G * p_axis`, integrating to zero against `p^(1-2m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralConstraint {
    pub form: DiffPoly,
    pub generator: DiffMonomial,
    pub axis: Axis,
}

/// The divergence form for one generator and axis.
pub fn divergence_constraint(m: u32, generator: &DiffMonomial, axis: Axis) -> DiffPoly {
    let g = DiffPoly::monomial(generator.clone(), Rational::one());
    let mut form = &DiffPoly::p() * &g.differentiate(axis);
    form.add_scaled(&(&g * &DiffPoly::deriv(&[axis])), &-int(2 * m as i64 - 2));
    form
}

/// All generators of degree and total order `2m-1` with factor order at most `2m-2`.
pub fn generators(m: u32, axes: &[Axis]) -> Vec<DiffMonomial> {
    enumerate_monomials(2 * m - 1, 2 * m - 1, 2 * m - 2, axes)
}

pub fn integral_constraints(m: u32, axes: &[Axis]) -> Result<Vec<IntegralConstraint>, ConstraintError> {
    if m < 2 {
        return Err(ConstraintError::Order(m));
    }
    if axes.is_empty() {
        return Err(ConstraintError::NoAxes);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for g in generators(m, axes) {
        for &a in axes {
            let form = divergence_constraint(m, &g, a);
            if form.is_zero() || !seen.insert(form.to_string()) {
                continue;
            }
            out.push(IntegralConstraint { form, generator: g.clone(), axis: a });
        }
    }
    Ok(out)
}

/// The symmetric matrix `L` with DiffPoly entries over the given axes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HessianBilinearForm {
    pub axes: Vec<Axis>,
    entries: Vec<Vec<DiffPoly>>,
}

impl HessianBilinearForm {
    pub fn new(axes: &[Axis]) -> Self {
        let entries = axes
            .iter()
            .map(|&i| {
                axes.iter()
                    .map(|&j| &(&DiffPoly::p() * &DiffPoly::deriv(&[i, j])) - &(&DiffPoly::deriv(&[i]) * &DiffPoly::deriv(&[j])))
                    .collect()
            })
            .collect();
        HessianBilinearForm { axes: axes.to_vec(), entries }
    }

    pub fn from_entries(axes: Vec<Axis>, entries: Vec<Vec<DiffPoly>>) -> Self {
        HessianBilinearForm { axes, entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &DiffPoly {
        &self.entries[i][j]
    }

    /// Determinant of the principal submatrix on `rows`, by cofactor expansion.
    pub fn minor(&self, rows: &[usize]) -> DiffPoly {
        if rows.is_empty() {
            return DiffPoly::one();
        }
        if rows.len() == 1 {
            return self.entries[rows[0]][rows[0]].clone();
        }
        self.det(rows, rows)
    }

    fn det(&self, rows: &[usize], cols: &[usize]) -> DiffPoly {
        if rows.len() == 1 {
            return self.entries[rows[0]][cols[0]].clone();
        }
        let mut out = DiffPoly::zero();
        let rest_rows = &rows[1..];
        for (k, &c) in cols.iter().enumerate() {
            let entry = &self.entries[rows[0]][c];
            if entry.is_zero() {
                continue;
            }
            let rest_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let sub = self.det(rest_rows, &rest_cols);
            let sign = if k % 2 == 0 { int(1) } else { int(-1) };
            out.add_scaled(&(entry * &sub), &sign);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrincipalMinor {
    pub rows: Vec<usize>,
    pub axes: Vec<Axis>,
    pub det: DiffPoly,
}

impl PrincipalMinor {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// `(-1)^k * det`, nonnegative for log-concave densities.
    pub fn signed(&self) -> DiffPoly {
        if self.size() % 2 == 0 {
            self.det.clone()
        } else {
            -&self.det
        }
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn principal_minors(l: &HessianBilinearForm, k: usize) -> Result<Vec<PrincipalMinor>, ConstraintError> {
    if k == 0 || k > l.dim() {
        return Err(ConstraintError::MinorSize { k, dim: l.dim() });
    }
    Ok(subsets(l.dim(), k)
        .into_iter()
        .map(|rows| PrincipalMinor { axes: rows.iter().map(|&r| l.axes[r]).collect(), det: l.minor(&rows), rows })
        .collect())
}

/// A product of signed principal minors times a nonnegative multiplier `Q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogConcaveConstraint {
    pub minors: Vec<PrincipalMinor>,
    /// Product of the signed minors.
    pub product: DiffPoly,
    /// Half the degree of the multiplier; `Q` is a Gram form over `half_basis`.
    pub half_degree: u32,
    pub half_basis: Vec<DiffMonomial>,
    /// Monomials of degree `2 * half_degree` that are products of two half-basis monomials.
    pub multiplier_basis: Vec<DiffMonomial>,
}

impl LogConcaveConstraint {
    fn new(m: u32, minors: Vec<PrincipalMinor>, axes: &[Axis]) -> Self {
        let size: usize = minors.iter().map(PrincipalMinor::size).sum();
        let product = minors.iter().fold(DiffPoly::one(), |acc, mi| &acc * &mi.signed());
        let half_degree = m - size as u32;
        let mut half_basis = enumerate_monomials(half_degree, half_degree, half_degree, axes);
        half_basis.reverse();
        let mut products: Vec<DiffMonomial> = Vec::new();
        let mut seen = HashSet::new();
        for (i, a) in half_basis.iter().enumerate() {
            for b in &half_basis[i..] {
                let prod = a.mul(b);
                if seen.insert(prod.clone()) {
                    products.push(prod);
                }
            }
        }
        products.sort();
        products.reverse();
        LogConcaveConstraint { minors, product, half_degree, half_basis, multiplier_basis: products }
    }

    pub fn total_minor_size(&self) -> usize {
        self.minors.iter().map(PrincipalMinor::size).sum()
    }

    /// Short label such as `-D1[1] * D2[1,2]`.
    pub fn label(&self) -> String {
        self.minors
            .iter()
            .map(|mi| {
                let axes: Vec<String> = mi.axes.iter().map(Axis::to_string).collect();
                let sign = if mi.size() % 2 == 1 { "-" } else { "" };
                format!("{sign}D{}[{}]", mi.size(), axes.join(","))
            })
            .collect::<Vec<_>>()
            .join(" * ")
    }
}

/// Every product of signed principal minors with total size at most `m`.
pub fn log_concave_constraints(m: u32, axes: &[Axis]) -> Result<Vec<LogConcaveConstraint>, ConstraintError> {
    let minors = all_minors(m, axes)?;
    fn rec(
        minors: &[PrincipalMinor],
        start: usize,
        budget: usize,
        cur: &mut Vec<PrincipalMinor>,
        out: &mut Vec<Vec<PrincipalMinor>>,
    ) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        for i in start..minors.len() {
            if minors[i].size() <= budget {
                cur.push(minors[i].clone());
                rec(minors, i, budget - minors[i].size(), cur, out);
                cur.pop();
            }
        }
    }
    let mut products = Vec::new();
    rec(&minors, 0, m as usize, &mut Vec::new(), &mut products);
    Ok(products.into_iter().map(|p| LogConcaveConstraint::new(m, p, axes)).collect())
}

/// One constraint per signed principal minor, the set the prover uses.
pub fn single_minor_constraints(m: u32, axes: &[Axis]) -> Result<Vec<LogConcaveConstraint>, ConstraintError> {
    Ok(all_minors(m, axes)?.into_iter().map(|mi| LogConcaveConstraint::new(m, vec![mi], axes)).collect())
}

fn all_minors(m: u32, axes: &[Axis]) -> Result<Vec<PrincipalMinor>, ConstraintError> {
    if m < 1 {
        return Err(ConstraintError::Order(m));
    }
    if axes.is_empty() {
        return Err(ConstraintError::NoAxes);
    }
    let l = HessianBilinearForm::new(axes);
    let mut out = Vec::new();
    for k in 1..=l.dim().min(m as usize) {
        out.extend(principal_minors(&l, k)?);
    }
    Ok(out)
}

/// The two order-two divergence forms carried as free scalars in the pair decomposition.
pub fn pair_scalar_constraints(a: Axis, b: Axis) -> [DiffPoly; 2] {
    let p = DiffPoly::p;
    let d = DiffPoly::deriv;
    // p^2 p_abb p_a + p_aa (p^2 p_bb - p p_b^2)
    let first = &(&(&p().pow(2) * &d(&[a, b, b])) * &d(&[a]))
        + &(&d(&[a, a]) * &(&(&p().pow(2) * &d(&[b, b])) - &(&p() * &d(&[b]).pow(2))));
    // p p_aa p_b^2 + 2 p_a (p p_ab p_b - p_a p_b^2)
    let second = &(&(&p() * &d(&[a, a])) * &d(&[b]).pow(2))
        + &(&d(&[a]) * &(&(&(&p() * &d(&[a, b])) * &d(&[b])) - &(&d(&[a]) * &d(&[b]).pow(2)))).scale(&int(2));
    [first, second]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffform::DerivSymbol;

    fn f(spec: &[(u8, u16)]) -> DiffMonomial {
        DiffMonomial::from_factors(spec.iter().map(|&(o, k)| (DerivSymbol::from_orders([(Axis::Concrete(1), o)]), k)))
    }

    fn poly(terms: &[(&[(u8, u16)], i64)]) -> DiffPoly {
        DiffPoly::from_terms(terms.iter().map(|(m, c)| (f(m), int(*c))))
    }

    /// The six order-three, one-axis constraints of the worked example.
    pub(crate) fn worked_example_constraints() -> Vec<DiffPoly> {
        vec![
            poly(&[(&[(0, 1), (1, 4), (2, 1)], 5), (&[(1, 6)], -4)]),
            poly(&[(&[(0, 3), (1, 1), (2, 1), (3, 1)], 2), (&[(0, 3), (2, 3)], 1), (&[(0, 2), (1, 2), (2, 2)], -2)]),
            poly(&[(&[(0, 4), (1, 1), (5, 1)], 1), (&[(0, 4), (2, 1), (4, 1)], 1), (&[(0, 3), (1, 2), (4, 1)], -1)]),
            poly(&[(&[(0, 3), (1, 2), (4, 1)], 1), (&[(0, 3), (1, 1), (2, 1), (3, 1)], 2), (&[(0, 2), (1, 3), (3, 1)], -2)]),
            poly(&[(&[(0, 2), (1, 3), (3, 1)], 1), (&[(0, 2), (1, 2), (2, 2)], 3), (&[(0, 1), (1, 4), (2, 1)], -3)]),
            poly(&[(&[(0, 4), (2, 1), (4, 1)], 1), (&[(0, 4), (3, 2)], 1), (&[(0, 3), (1, 1), (2, 1), (3, 1)], -1)]),
        ]
    }

    #[test]
    fn one_axis_order_three_constraints_match_worked_example() {
        let got = integral_constraints(3, &[Axis::Concrete(1)]).unwrap();
        assert_eq!(got.len(), 6);
        let forms: HashSet<String> = got.iter().map(|c| c.form.to_string()).collect();
        for r in worked_example_constraints() {
            assert!(forms.contains(&r.to_string()), "missing {r}");
        }
        let g = f(&[(0, 3), (1, 1), (4, 1)]);
        let r3 = got.iter().find(|c| c.generator == g).unwrap();
        assert_eq!(r3.form, worked_example_constraints()[2]);
    }

    #[test]
    fn generated_constraints_are_homogeneous() {
        for (m, axes) in [(2, Axis::abstract_range(2)), (3, Axis::concrete_range(2)), (4, Axis::concrete_range(1))] {
            for c in integral_constraints(m, &axes).unwrap() {
                assert!(c.form.is_homogeneous(2 * m, 2 * m));
            }
        }
    }

    #[test]
    fn first_order_minors_of_two_by_two() {
        let l = HessianBilinearForm::new(&Axis::concrete_range(2));
        let minors = principal_minors(&l, 1).unwrap();
        assert_eq!(minors.len(), 2);
        let (x1, x2) = (Axis::Concrete(1), Axis::Concrete(2));
        let expect = &(&DiffPoly::p() * &DiffPoly::deriv(&[x1, x1])) - &DiffPoly::deriv(&[x1]).pow(2);
        assert_eq!(minors[0].det, expect);
        assert_eq!(minors[1].det, &(&DiffPoly::p() * &DiffPoly::deriv(&[x2, x2])) - &DiffPoly::deriv(&[x2]).pow(2));
        assert_eq!(principal_minors(&l, 2).unwrap()[0].det, l.minor(&[0, 1]));
        assert!(principal_minors(&l, 3).is_err());
    }

    #[test]
    fn diagonal_determinant() {
        let d1 = DiffPoly::deriv(&[Axis::Concrete(1)]);
        let d2 = DiffPoly::p();
        let l = HessianBilinearForm::from_entries(Axis::concrete_range(2), vec![vec![d1.clone(), DiffPoly::zero()], vec![DiffPoly::zero(), d2.clone()]]);
        assert_eq!(principal_minors(&l, 2).unwrap()[0].det, &d1 * &d2);
    }

    #[test]
    fn log_concave_families() {
        let two = log_concave_constraints(2, &Axis::concrete_range(2)).unwrap();
        let labels: Vec<String> = two.iter().map(|c| c.label()).collect();
        assert!(labels.contains(&"-D1[1]".to_string()));
        assert!(labels.contains(&"D2[1,2]".to_string()));
        assert!(labels.contains(&"-D1[1] * -D1[2]".to_string()));
        let singles = single_minor_constraints(3, &Axis::concrete_range(2)).unwrap();
        assert_eq!(singles.len(), 3);
        assert_eq!(singles[0].half_basis.len(), 6);
        assert_eq!(singles[2].half_degree, 1);
        let triple = single_minor_constraints(3, &Axis::abstract_range(3)).unwrap();
        assert_eq!(triple.len(), 7);
        assert_eq!(triple[6].half_basis, vec![DiffMonomial::one()]);
        // the single-axis multiplier misses f^3 f4 and f^2 f1 f3
        let one = single_minor_constraints(3, &[Axis::Concrete(1)]).unwrap();
        assert_eq!(one[0].multiplier_basis, vec![f(&[(0, 2), (2, 2)]), f(&[(0, 1), (1, 2), (2, 1)]), f(&[(1, 4)])]);
        assert_eq!(one[0].product, poly(&[(&[(1, 2)], 1), (&[(0, 1), (2, 1)], -1)]));
    }
}
