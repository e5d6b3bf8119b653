//! Reduction of a constrained target to quadratic forms over a monomial basis.
//!
//! Monomials of degree `2m` that factor as a product of two basis monomials
//! are *quadratic*. Constraints are row reduced with every quadratic monomial
//! ordered below every other monomial, which splits the span into quadratic
//! constraints and rewrite rules for the remaining monomials.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::constraints::LogConcaveConstraint;
use crate::diffform::{enumerate_monomials, Axis, DiffMonomial, DiffPoly};
use crate::linalg::{SparseRref, SparseVec};
use crate::rational::{frac, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("monomial `{0}` is not a product of two basis monomials and no rule removes it")]
    Irreducible(String),
    #[error("monomial `{0}` is not quadratic over the basis")]
    NotQuadratic(String),
}

/// Products of basis monomials grouped by the monomial they multiply out to.
#[derive(Clone, Debug, Default)]
pub struct ProductTable {
    classes: HashMap<DiffMonomial, Vec<(usize, usize)>>,
}

impl ProductTable {
    pub fn new(monomials: &[DiffMonomial]) -> Self {
        let mut classes: HashMap<DiffMonomial, Vec<(usize, usize)>> = HashMap::new();
        for i in 0..monomials.len() {
            for j in i..monomials.len() {
                classes.entry(monomials[i].mul(&monomials[j])).or_default().push((i, j));
            }
        }
        ProductTable { classes }
    }

    /// All pairs `i <= j` with `m_i m_j = mono`, the first being canonical.
    pub fn pairs(&self, mono: &DiffMonomial) -> Option<&[(usize, usize)]> {
        self.classes.get(mono).map(Vec::as_slice)
    }

    pub fn is_quadratic(&self, mono: &DiffMonomial) -> bool {
        self.classes.contains_key(mono)
    }

    pub fn classes(&self) -> impl Iterator<Item = (&DiffMonomial, &Vec<(usize, usize)>)> {
        self.classes.iter()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Basis monomials listed in decreasing monomial order.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub axes: Vec<Axis>,
    pub degree: u32,
    monomials: Vec<DiffMonomial>,
    products: ProductTable,
}

impl MonomialBasis {
    pub fn from_monomials(axes: Vec<Axis>, degree: u32, monomials: Vec<DiffMonomial>) -> Self {
        let products = ProductTable::new(&monomials);
        MonomialBasis { axes, degree, monomials, products }
    }

    pub fn monomials(&self) -> &[DiffMonomial] {
        &self.monomials
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn products(&self) -> &ProductTable {
        &self.products
    }

    pub fn product(&self, i: usize, j: usize) -> DiffMonomial {
        self.monomials[i].mul(&self.monomials[j])
    }

    pub fn canonical_pair(&self, mono: &DiffMonomial) -> Option<(usize, usize)> {
        self.products.pairs(mono).map(|p| p[0])
    }
}

pub fn enumerate_basis(m: u32, axes: &[Axis]) -> MonomialBasis {
    let mut monomials = enumerate_monomials(m, m, m, axes);
    monomials.reverse();
    MonomialBasis::from_monomials(axes.to_vec(), m, monomials)
}

/// Symmetric exact matrix over a basis, stored as its upper triangle.
/// Entry `(i, j)` is the matrix entry, so `m_i m_j` with `i != j` has coefficient `2 * G_ij`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuadraticForm {
    pub dim: usize,
    entries: BTreeMap<(usize, usize), Rational>,
}

impl QuadraticForm {
    pub fn zero(dim: usize) -> Self {
        QuadraticForm { dim, entries: BTreeMap::new() }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &Rational)> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize, j: usize) -> Rational {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries.get(&key).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_entry(&mut self, i: usize, j: usize, v: Rational) {
        if v.is_zero() {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        let e = self.entries.entry(key).or_insert_with(Rational::zero);
        *e += v;
        if e.is_zero() {
            self.entries.remove(&key);
        }
    }

    /// Add `c * m_i m_j` as a polynomial term.
    pub fn add_monomial_pair(&mut self, i: usize, j: usize, c: Rational) {
        if i == j {
            self.add_entry(i, i, c);
        } else {
            self.add_entry(i, j, c * frac(1, 2));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add_scaled(&mut self, other: &QuadraticForm, c: &Rational) {
        for ((i, j), v) in &other.entries {
            self.add_entry(*i, *j, v * c);
        }
    }

    pub fn scale(&self, c: &Rational) -> QuadraticForm {
        let mut out = QuadraticForm::zero(self.dim);
        out.add_scaled(self, c);
        out
    }

    /// Quadratic form of a polynomial whose monomials are all quadratic, using canonical pairs.
    pub fn from_poly(poly: &DiffPoly, basis: &MonomialBasis) -> Result<QuadraticForm, ReductionError> {
        let mut q = QuadraticForm::zero(basis.len());
        for (m, c) in poly.terms() {
            let (i, j) = basis.canonical_pair(m).ok_or_else(|| ReductionError::NotQuadratic(m.to_string()))?;
            q.add_monomial_pair(i, j, c.clone());
        }
        Ok(q)
    }

    /// Substitute basis monomials back in.
    pub fn to_poly(&self, basis: &MonomialBasis) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for ((i, j), v) in &self.entries {
            let c = if i == j { v.clone() } else { v * Rational::from_integer(2.into()) };
            out.add_term(basis.product(*i, *j), c);
        }
        out
    }

    pub fn dense(&self) -> Vec<Vec<Rational>> {
        let mut out = vec![vec![Rational::zero(); self.dim]; self.dim];
        for ((i, j), v) in &self.entries {
            out[*i][*j] = v.clone();
            out[*j][*i] = v.clone();
        }
        out
    }

    /// Polynomial-coefficient coordinates, one per unordered pair.
    pub fn pair_coordinates(&self) -> impl Iterator<Item = ((usize, usize), Rational)> + '_ {
        self.entries.iter().map(|(&(i, j), v)| ((i, j), if i == j { v.clone() } else { v * Rational::from_integer(2.into()) }))
    }
}

impl std::fmt::Display for QuadraticForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .pair_coordinates()
            .map(|((i, j), c)| {
                let c = crate::rational::format_rational(&c);
                if i == j {
                    format!("{c}*m{}^2", i + 1)
                } else {
                    format!("{c}*m{}*m{}", i + 1, j + 1)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `leading -> leading - row`: the row is `leading + tail` with unit leading coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    pub leading: DiffMonomial,
    pub tail: DiffPoly,
}

/// Column numbering that realizes the elimination order.
#[derive(Clone, Debug, Default)]
struct Columns {
    index: HashMap<DiffMonomial, usize>,
    monomials: Vec<DiffMonomial>,
}

impl Columns {
    fn vector(&self, poly: &DiffPoly) -> (SparseVec, DiffPoly) {
        let mut known = Vec::new();
        let mut unknown = DiffPoly::zero();
        for (m, c) in poly.terms() {
            match self.index.get(m) {
                Some(&i) => known.push((i, c.clone())),
                None => unknown.add_term(m.clone(), c.clone()),
            }
        }
        (SparseVec::from_entries(known), unknown)
    }

    fn poly(&self, v: &SparseVec) -> DiffPoly {
        DiffPoly::from_terms(v.entries().iter().map(|(i, c)| (self.monomials[*i].clone(), c.clone())))
    }
}

/// Result of row reducing the input constraints.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub basis: MonomialBasis,
    pub quadratic: Vec<QuadraticForm>,
    pub quadratic_polys: Vec<DiffPoly>,
    pub rules: Vec<RewriteRule>,
    /// Number of input constraints.
    pub inputs: usize,
    columns: Columns,
    engine: SparseRref,
    rule_rows: Vec<bool>,
}

pub fn split_by_elimination(constraints: &[DiffPoly], basis: &MonomialBasis) -> Elimination {
    eliminate(constraints, basis, false)
}

/// Same as [`split_by_elimination`] but records how every row combines the inputs.
pub fn split_by_elimination_tracked(constraints: &[DiffPoly], basis: &MonomialBasis) -> Elimination {
    eliminate(constraints, basis, true)
}

fn eliminate(constraints: &[DiffPoly], basis: &MonomialBasis, track: bool) -> Elimination {
    let mut monos: Vec<DiffMonomial> = {
        let mut set = std::collections::HashSet::new();
        for c in constraints {
            for (m, _) in c.terms() {
                set.insert(m.clone());
            }
        }
        set.into_iter().collect()
    };
    let products = basis.products();
    monos.sort_by(|a, b| {
        let qa = !products.is_quadratic(a);
        let qb = !products.is_quadratic(b);
        qa.cmp(&qb).then_with(|| a.cmp(b))
    });
    let columns = Columns { index: monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect(), monomials: monos };
    let mut engine = SparseRref::new(track);
    for (k, c) in constraints.iter().enumerate() {
        let (v, _) = columns.vector(c);
        engine.insert(&v, k);
    }
    let mut quadratic = Vec::new();
    let mut quadratic_polys = Vec::new();
    let mut rules = Vec::new();
    let mut rule_rows = Vec::new();
    for row in engine.rows() {
        let poly = columns.poly(row);
        let lead = columns.monomials[row.leading().expect("nonzero").0].clone();
        if products.is_quadratic(&lead) {
            quadratic.push(QuadraticForm::from_poly(&poly, basis).expect("quadratic row"));
            quadratic_polys.push(poly);
            rule_rows.push(false);
        } else {
            let mut tail = poly;
            tail.add_term(lead.clone(), -Rational::one());
            rules.push(RewriteRule { leading: lead, tail });
            rule_rows.push(true);
        }
    }
    Elimination { basis: basis.clone(), quadratic, quadratic_polys, rules, inputs: constraints.len(), columns, engine, rule_rows }
}

impl Elimination {
    pub fn rank(&self) -> usize {
        self.engine.rank()
    }

    /// Normal form under the rewrite rules; quadratic constraints are left alone.
    pub fn normal_form(&self, form: &DiffPoly) -> DiffPoly {
        let (v, mut rest) = self.columns.vector(form);
        let reduced = self.engine.reduce_with(&v, |r| self.rule_rows[r]);
        rest.add_scaled(&self.columns.poly(&reduced), &Rational::one());
        rest
    }

    pub fn reduce_to_quadratic(&self, form: &DiffPoly) -> Result<QuadraticForm, ReductionError> {
        let nf = self.normal_form(form);
        if let Some(bad) = nf.terms().rev().map(|(m, _)| m).find(|m| !self.basis.products().is_quadratic(m)) {
            return Err(ReductionError::Irreducible(bad.to_string()));
        }
        QuadraticForm::from_poly(&nf, &self.basis)
    }

    /// Whether `form` lies in the span of the inputs.
    pub fn in_span(&self, form: &DiffPoly) -> bool {
        let (v, rest) = self.columns.vector(form);
        rest.is_zero() && self.engine.reduce(&v).0.is_zero()
    }

    /// Coefficients on input constraints that sum to `form`. Needs a tracked elimination.
    pub fn express(&self, form: &DiffPoly) -> Option<Vec<(usize, Rational)>> {
        let (v, rest) = self.columns.vector(form);
        if !rest.is_zero() {
            return None;
        }
        self.engine.express(&v).map(|s| s.entries().to_vec())
    }
}

/// Binomial relations `m_i m_j = m_k m_l` among basis products.
#[derive(Clone, Debug)]
pub struct IntrinsicRelations {
    /// One relation per non-canonical pair: canonical minus that pair. Independent.
    pub relations: Vec<QuadraticForm>,
    /// Number of unordered pairs of coinciding products, `sum C(k, 2)`.
    pub pairwise_count: usize,
}

pub fn intrinsic_relations(basis: &MonomialBasis) -> IntrinsicRelations {
    let mut classes: Vec<&Vec<(usize, usize)>> = basis.products().classes().map(|(_, v)| v).filter(|v| v.len() > 1).collect();
    classes.sort();
    let mut relations = Vec::new();
    let mut pairwise_count = 0;
    for pairs in classes {
        let k = pairs.len();
        pairwise_count += k * (k - 1) / 2;
        let (ci, cj) = pairs[0];
        for &(i, j) in &pairs[1..] {
            let mut q = QuadraticForm::zero(basis.len());
            q.add_monomial_pair(ci, cj, Rational::one());
            q.add_monomial_pair(i, j, -Rational::one());
            relations.push(q);
        }
    }
    IntrinsicRelations { relations, pairwise_count }
}

/// Rank of a set of quadratic forms as vectors in the space of symmetric matrices.
pub fn joint_rank(forms: &[&QuadraticForm]) -> usize {
    independent_forms(forms).iter().filter(|&&k| k).count()
}

/// Greedy independent subset, in input order: `true` for forms kept.
pub fn independent_forms(forms: &[&QuadraticForm]) -> Vec<bool> {
    let mut engine = SparseRref::new(false);
    let dim = forms.first().map_or(0, |f| f.dim);
    forms
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let v = SparseVec::from_entries(f.entries().map(|(&(i, j), c)| (i * dim + j, c.clone())));
            engine.insert(&v, k).is_some()
        })
        .collect()
}

/// A product class of half-basis monomials inside a log-concave multiplier.
#[derive(Clone, Debug)]
pub struct MultiplierClass {
    pub monomial: DiffMonomial,
    pub pairs: Vec<(usize, usize)>,
    /// Quadratic normal form of `P * monomial`, absent when it does not reduce.
    pub reduced: Option<QuadraticForm>,
}

/// `P * Q` reduced to quadratic forms, linear in the entries of the Gram matrix of `Q`.
#[derive(Clone, Debug)]
pub struct ParametricFamily {
    pub half_basis: MonomialBasis,
    pub classes: Vec<MultiplierClass>,
}

impl ParametricFamily {
    pub fn usable(&self) -> usize {
        self.classes.iter().filter(|c| c.reduced.is_some()).count()
    }
}

/// Reduce each `P * t` for the multiplier monomials `t`; `None` when nothing reduces.
pub fn reduce_multiplier_products(constraint: &LogConcaveConstraint, elim: &Elimination) -> Option<ParametricFamily> {
    let half = MonomialBasis::from_monomials(elim.basis.axes.clone(), constraint.half_degree, constraint.half_basis.clone());
    let mut classes: Vec<MultiplierClass> = half
        .products()
        .classes()
        .map(|(mono, pairs)| {
            let product = constraint.product.mul_monomial(mono);
            MultiplierClass { monomial: mono.clone(), pairs: pairs.clone(), reduced: elim.reduce_to_quadratic(&product).ok() }
        })
        .collect();
    classes.sort_by(|a, b| b.monomial.cmp(&a.monomial));
    let fam = ParametricFamily { half_basis: half, classes };
    (fam.usable() > 0).then_some(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{integral_constraints, pair_scalar_constraints, single_minor_constraints};
    use crate::diffform::DerivSymbol;
    use crate::rational::int;
    use crate::targets::{target_e, TargetFamily};
    use crate::dimension::Dimension;

    fn f(spec: &[(u8, u16)]) -> DiffMonomial {
        DiffMonomial::from_factors(spec.iter().map(|&(o, k)| (DerivSymbol::from_orders([(Axis::Concrete(1), o)]), k)))
    }

    fn one_axis() -> (MonomialBasis, Elimination) {
        let axes = [Axis::Concrete(1)];
        let basis = enumerate_basis(3, &axes);
        let forms: Vec<DiffPoly> = integral_constraints(3, &axes).unwrap().into_iter().map(|c| c.form).collect();
        let elim = split_by_elimination(&forms, &basis);
        (basis, elim)
    }

    fn qf(dim: usize, terms: &[((usize, usize), Rational)]) -> QuadraticForm {
        let mut q = QuadraticForm::zero(dim);
        for ((i, j), c) in terms {
            q.add_monomial_pair(i - 1, j - 1, c.clone());
        }
        q
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(enumerate_basis(3, &[Axis::Concrete(1)]).monomials(), &[f(&[(0, 2), (3, 1)]), f(&[(0, 1), (1, 1), (2, 1)]), f(&[(1, 3)])]);
        let sizes: Vec<usize> = [
            (3, Axis::concrete_range(1)),
            (3, Axis::concrete_range(2)),
            (3, Axis::abstract_range(3)),
            (4, Axis::concrete_range(2)),
            (2, Axis::abstract_range(2)),
        ]
        .iter()
        .map(|(m, a)| enumerate_basis(*m, a).len())
        .collect();
        assert_eq!(sizes, vec![3, 14, 38, 33, 6]);
        let b = enumerate_basis(3, &Axis::concrete_range(2));
        for w in b.monomials().windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn one_axis_split_spans_worked_example() {
        let (basis, elim) = one_axis();
        assert_eq!(elim.quadratic.len(), 2);
        assert_eq!(elim.rules.len(), 4);
        // R1 = 5 m2 m3 - 4 m3^2, R2 = m1 m3 + 3 m2^2 - 12/5 m3^2
        let r1 = qf(3, &[((2, 3), int(5)), ((3, 3), int(-4))]);
        let r2 = qf(3, &[((1, 3), int(1)), ((2, 2), int(3)), ((3, 3), frac(-12, 5))]);
        for r in [&r1, &r2] {
            assert!(elim.in_span(&r.to_poly(&basis)));
        }
        assert_eq!(joint_rank(&[&r1, &r2, &elim.quadratic[0], &elim.quadratic[1]]), 2);
        for rule in &elim.rules {
            assert!(!basis.products().is_quadratic(&rule.leading));
            for other in &elim.rules {
                assert_eq!(other.tail.coefficient(&rule.leading), Rational::zero());
            }
        }
        assert!(intrinsic_relations(&basis).relations.is_empty());
    }

    #[test]
    fn target_reduces_to_worked_quadratic_form_modulo_constraints() {
        let (basis, elim) = one_axis();
        let e = target_e(TargetFamily::E2, 3, Dimension::Concrete(1)).unwrap();
        let got = elim.reduce_to_quadratic(e.concrete().unwrap()).unwrap();
        let expect = qf(3, &[((1, 1), frac(1, 2)), ((1, 2), int(-3)), ((2, 2), frac(-3, 2)), ((3, 3), int(2))]);
        let mut diff = got.clone();
        diff.add_scaled(&expect, &int(-1));
        assert!(elim.in_span(&diff.to_poly(&basis)));
        assert!(elim.reduce_to_quadratic(&DiffPoly::zero()).unwrap().is_zero());
    }

    #[test]
    fn one_axis_multiplier_family() {
        let (basis, elim) = one_axis();
        let lc = &single_minor_constraints(3, &[Axis::Concrete(1)]).unwrap()[0];
        let fam = reduce_multiplier_products(lc, &elim).unwrap();
        assert_eq!(fam.classes.len(), 3);
        // q11 (2 m1 m2 - m2^2) + q12 (4/5 m3^2 - m2^2) + q13/5 m3^2
        let expect = [
            qf(3, &[((1, 2), int(2)), ((2, 2), int(-1))]),
            qf(3, &[((3, 3), frac(4, 5)), ((2, 2), int(-1))]),
            qf(3, &[((3, 3), frac(1, 5))]),
        ];
        for (class, want) in fam.classes.iter().zip(expect.iter()) {
            let mut diff = class.reduced.clone().unwrap();
            diff.add_scaled(want, &int(-1));
            assert!(elim.in_span(&diff.to_poly(&basis)), "{}", class.monomial);
        }
    }

    #[test]
    fn pair_basis_has_one_intrinsic_relation() {
        let basis = enumerate_basis(2, &Axis::abstract_range(2));
        let rel = intrinsic_relations(&basis);
        assert_eq!(rel.relations.len(), 1);
        assert_eq!(rel.pairwise_count, 1);
        for r in &rel.relations {
            assert!(r.to_poly(&basis).is_zero());
        }
    }

    #[test]
    fn pair_scalars_lie_in_the_span() {
        let axes = Axis::abstract_range(2);
        let basis = enumerate_basis(2, &axes);
        let forms: Vec<DiffPoly> = integral_constraints(2, &axes).unwrap().into_iter().map(|c| c.form).collect();
        let elim = split_by_elimination(&forms, &basis);
        for r in pair_scalar_constraints(axes[0], axes[1]) {
            assert!(elim.in_span(&r));
        }
        assert_eq!(elim.rank(), 17);
        // m1 = pa^2, m2 = pb^2, m3 = pa pb, m4 = p pab, m5 = p paa, m6 = p pbb
        let (a, b) = (axes[0], axes[1]);
        let d = DiffPoly::deriv;
        let m = [
            d(&[a]).pow(2),
            d(&[b]).pow(2),
            &d(&[a]) * &d(&[b]),
            &DiffPoly::p() * &d(&[a, b]),
            &DiffPoly::p() * &d(&[a, a]),
            &DiffPoly::p() * &d(&[b, b]),
        ];
        let q = |t: &[(usize, usize, i64)]| {
            let mut o = DiffPoly::zero();
            for &(i, j, c) in t {
                o.add_scaled(&(&m[i - 1] * &m[j - 1]), &int(c));
            }
            o
        };
        let displayed = [
            q(&[(1, 6, 1), (3, 3, -2), (3, 4, 2)]),
            q(&[(2, 3, -2), (2, 4, 1), (3, 6, 2)]),
            q(&[(2, 2, -2), (2, 6, 3)]),
            q(&[(1, 3, -2), (1, 4, 1), (3, 5, 2)]),
            q(&[(2, 5, 1), (3, 3, -2), (3, 4, 2)]),
            q(&[(2, 3, -2), (2, 4, 3)]),
            q(&[(1, 1, -2), (1, 5, 3)]),
        ];
        for r in &displayed {
            assert!(elim.in_span(r));
        }
    }

    #[test]
    fn span_is_preserved() {
        let axes = Axis::concrete_range(2);
        let basis = enumerate_basis(3, &axes);
        let forms: Vec<DiffPoly> = integral_constraints(3, &axes).unwrap().into_iter().map(|c| c.form).collect();
        let elim = split_by_elimination_tracked(&forms, &basis);
        for f in &forms {
            assert!(elim.in_span(f));
            let combo = elim.express(f).unwrap();
            let mut rebuilt = DiffPoly::zero();
            for (k, c) in combo {
                rebuilt.add_scaled(&forms[k], &c);
            }
            assert_eq!(&rebuilt, f);
        }
        for q in &elim.quadratic_polys {
            assert!(elim.in_span(q));
        }
    }
}
