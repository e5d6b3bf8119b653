//! Regrouping sums over all index tuples into sums over index sets.
//!
//! A sum of `f(i_1..i_k)` over `[n]^k` equals a sum over `a < b (< c)` of
//! weighted repeated-index patterns of `f`. Applied to kernels this gives
//! blocks over abstract axes, one per partial-fraction atom of the weights.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::dimension::{DimAtom, DimCoeff, Dimension, SingularDimension};
use crate::diffform::{Axis, DiffPoly};
use crate::rational::Rational;
use crate::targets::{instantiate, KernelFamily};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymmetryError {
    #[error("no symmetrization for tuples of length {0}")]
    Arity(usize),
    #[error("dimension {n} is smaller than the tuple length {arity}")]
    TooSmall { n: usize, arity: usize },
    #[error(transparent)]
    Singular(#[from] SingularDimension),
}

/// Patterns sharing one weight, as index tuples into the set `{a, b, ...}`.
#[derive(Clone, Debug)]
pub struct PatternClass {
    pub weight: DimCoeff,
    pub tuples: Vec<Vec<usize>>,
}

fn distinct_perms(k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| (0..k).filter(|i| !t.contains(i)).map(|i| [t.clone(), vec![i]].concat()).collect::<Vec<_>>())
            .collect();
    }
    out
}

pub fn pattern_classes(arity: usize) -> Result<Vec<PatternClass>, SymmetryError> {
    let one = Rational::one();
    match arity {
        1 => Ok(vec![PatternClass { weight: DimCoeff::constant(one), tuples: vec![vec![0]] }]),
        2 => Ok(vec![
            PatternClass { weight: DimCoeff::monomial(one.clone(), 0, 1, 0), tuples: vec![vec![0, 0], vec![1, 1]] },
            PatternClass { weight: DimCoeff::constant(one), tuples: distinct_perms(2) },
        ]),
        3 => {
            let diagonal = (0..3).map(|a| vec![a; 3]).collect();
            let mut doubled = Vec::new();
            for (x, y) in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)] {
                doubled.extend([vec![x, x, y], vec![x, y, x], vec![y, x, x]]);
            }
            Ok(vec![
                PatternClass { weight: DimCoeff::monomial(Rational::from_integer(2.into()), 0, 1, 1), tuples: diagonal },
                PatternClass { weight: DimCoeff::monomial(one.clone(), 0, 0, 1), tuples: doubled },
                PatternClass { weight: DimCoeff::constant(one), tuples: distinct_perms(3) },
            ])
        }
        k => Err(SymmetryError::Arity(k)),
    }
}

/// Increasing index sets of size `k` in `0..n`.
pub fn index_sets(n: usize, k: usize) -> Vec<Vec<usize>> {
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

/// Right-hand side of the regrouping for a scalar function, at concrete `n`.
pub fn regrouped_sum(arity: usize, n: usize, f: impl Fn(&[usize]) -> Rational) -> Result<Rational, SymmetryError> {
    if n < arity {
        return Err(SymmetryError::TooSmall { n, arity });
    }
    let classes = pattern_classes(arity)?;
    let mut total = Rational::zero();
    for set in index_sets(n, arity) {
        for class in &classes {
            let w = class.weight.eval(n)?;
            for t in &class.tuples {
                let idx: Vec<usize> = t.iter().map(|&i| set[i]).collect();
                total += &w * f(&idx);
            }
        }
    }
    Ok(total)
}

/// A kernel with its weight; `scalar` marks a term multiplied by a free scalar.
#[derive(Clone, Debug)]
pub struct SymComponent {
    pub coeff: DimCoeff,
    pub kernel: DiffPoly,
    pub scalar: Option<usize>,
}

/// `scale * atom(n) * (base + sum_s c_s scalar_parts[s])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymBlock {
    pub atom: DimAtom,
    pub scale: Rational,
    pub base: DiffPoly,
    pub scalar_parts: Vec<DiffPoly>,
}

impl SymBlock {
    pub fn with_scalars(&self, scalars: &[Rational]) -> DiffPoly {
        let mut out = self.base.clone();
        for (part, c) in self.scalar_parts.iter().zip(scalars) {
            out.add_scaled(part, c);
        }
        out
    }

    pub fn prefactor_text(&self) -> String {
        match (self.scale.is_one(), self.atom) {
            (true, atom) => atom.to_string(),
            (false, DimAtom::One) => crate::rational::format_rational(&self.scale),
            (false, atom) => format!("{}*{atom}", crate::rational::format_rational(&self.scale)),
        }
    }

    /// Smallest `n` from which the prefactor is positive.
    pub fn positive_from(&self) -> usize {
        self.atom.positive_from()
    }
}

#[derive(Clone, Debug)]
pub struct SymmetrizedTarget {
    pub axes: Vec<Axis>,
    pub dimension: Dimension,
    pub blocks: Vec<SymBlock>,
}

impl SymmetrizedTarget {
    /// Smallest `n` for which the regrouping and every prefactor are valid.
    pub fn valid_from(&self) -> usize {
        self.blocks.iter().map(SymBlock::positive_from).chain([self.axes.len()]).max().unwrap_or(1)
    }
}

fn apply_patterns(kernel: &DiffPoly, tuples: &[Vec<usize>], axes: &[Axis]) -> DiffPoly {
    let mut out = DiffPoly::zero();
    for t in tuples {
        let image: Vec<Axis> = t.iter().map(|&i| axes[i]).collect();
        out.add_scaled(&instantiate(kernel, &image), &Rational::one());
    }
    out
}

struct Accum {
    scale: Option<Rational>,
    base: DiffPoly,
    parts: Vec<DiffPoly>,
}

/// Regroup `sum_c coeff_c(n) * kernel_c` over all tuples into blocks over abstract axes.
///
/// At a concrete `n` the weights are numbers and a single block results. For a
/// generic `n` there is one block per atom; its scale is the magnitude of the
/// first contribution so that block polynomials keep small coefficients.
pub fn symmetrize(components: &[SymComponent], arity: usize, dimension: Dimension, scalars: usize) -> Result<SymmetrizedTarget, SymmetryError> {
    let classes = pattern_classes(arity)?;
    let axes = Axis::abstract_range(arity);
    if let Dimension::Concrete(n) = dimension {
        if n < arity {
            return Err(SymmetryError::TooSmall { n, arity });
        }
    }
    let mut acc: BTreeMap<DimAtom, Accum> = BTreeMap::new();
    for comp in components {
        for class in &classes {
            let weight = comp.coeff.mul(&class.weight);
            let contributions: Vec<(DimAtom, Rational)> = match dimension {
                Dimension::Concrete(n) => vec![(DimAtom::One, weight.eval(n)?)],
                Dimension::Generic => weight.terms().map(|(a, q)| (*a, q.clone())).collect(),
            };
            let summed = apply_patterns(&comp.kernel, &class.tuples, &axes);
            for (atom, q) in contributions {
                if q.is_zero() {
                    continue;
                }
                let entry = acc
                    .entry(atom)
                    .or_insert_with(|| Accum { scale: None, base: DiffPoly::zero(), parts: vec![DiffPoly::zero(); scalars] });
                let scale = match (&entry.scale, dimension) {
                    (Some(s), _) => s.clone(),
                    (None, Dimension::Concrete(_)) => Rational::one(),
                    (None, Dimension::Generic) => q.abs(),
                };
                entry.scale = Some(scale.clone());
                let w = &q / &scale;
                match comp.scalar {
                    None => entry.base.add_scaled(&summed, &w),
                    Some(s) => entry.parts[s].add_scaled(&summed, &w),
                }
            }
        }
    }
    let mut blocks: Vec<SymBlock> = acc
        .into_iter()
        .map(|(atom, a)| SymBlock { atom, scale: a.scale.unwrap_or_else(Rational::one), base: a.base, scalar_parts: a.parts })
        .collect();
    blocks.sort_by(|x, y| y.atom.cmp(&x.atom));
    Ok(SymmetrizedTarget { axes, dimension, blocks })
}

/// Components of a target kernel family, plus the free scalar terms.
pub fn target_components(kernels: &KernelFamily, scalar_kernels: &[DiffPoly]) -> Vec<SymComponent> {
    let mut out: Vec<SymComponent> =
        kernels.components.iter().map(|c| SymComponent { coeff: c.coeff.clone(), kernel: c.kernel.clone(), scalar: None }).collect();
    for (s, k) in scalar_kernels.iter().enumerate() {
        out.push(SymComponent { coeff: DimCoeff::constant(Rational::one()), kernel: k.clone(), scalar: Some(s) });
    }
    out
}
