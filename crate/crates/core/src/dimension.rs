//! Problem dimension and coefficients that are rational functions of a generic `n`.
//!
//! Coefficients are kept in partial-fraction form over the atoms `n^-i`,
//! `(n-1)^-j` and `(n-2)^-k`; products of distinct atoms are split with
//! `1/(n(n-1)) = 1/(n-1) - 1/n` and its two siblings.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_rational, frac, int, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    Concrete(usize),
    Generic,
}

impl Dimension {
    pub fn concrete(self) -> Option<usize> {
        match self {
            Dimension::Concrete(n) => Some(n),
            Dimension::Generic => None,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dimension::Concrete(n) => write!(f, "{n}"),
            Dimension::Generic => write!(f, "n"),
        }
    }
}

impl std::str::FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "n" | "generic" => Ok(Dimension::Generic),
            t => t.parse::<usize>().ok().filter(|&n| n >= 1).map(Dimension::Concrete).ok_or_else(|| format!("bad dimension `{s}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("coefficient {coeff} is singular at n = {n}")]
pub struct SingularDimension {
    pub coeff: String,
    pub n: usize,
}

/// One partial-fraction atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DimAtom {
    One,
    InvN(u32),
    InvNMinus1(u32),
    InvNMinus2(u32),
}

impl DimAtom {
    fn shift(self) -> (i64, u32) {
        match self {
            DimAtom::One => (0, 0),
            DimAtom::InvN(k) => (0, k),
            DimAtom::InvNMinus1(k) => (1, k),
            DimAtom::InvNMinus2(k) => (2, k),
        }
    }

    pub fn eval(self, n: usize) -> Option<Rational> {
        let (s, k) = self.shift();
        let base = n as i64 - s;
        if k == 0 {
            return Some(Rational::one());
        }
        if base == 0 {
            return None;
        }
        Some(Rational::one() / num_traits::pow(int(base), k as usize))
    }

    /// Positive for every `n` at which the atom is defined and the path applies (`n >= 3`).
    pub fn positive_from(self) -> usize {
        match self {
            DimAtom::One | DimAtom::InvN(_) => 1,
            DimAtom::InvNMinus1(_) => 2,
            DimAtom::InvNMinus2(_) => 3,
        }
    }
}

impl fmt::Display for DimAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (base, k) = match self {
            DimAtom::One => return write!(f, "1"),
            DimAtom::InvN(k) => ("n", *k),
            DimAtom::InvNMinus1(k) => ("(n-1)", *k),
            DimAtom::InvNMinus2(k) => ("(n-2)", *k),
        };
        if k == 1 {
            write!(f, "1/{base}")
        } else {
            write!(f, "1/{base}^{k}")
        }
    }
}

/// Linear combination of atoms with rational weights.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DimCoeff {
    terms: BTreeMap<DimAtom, Rational>,
}

impl DimCoeff {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(q: Rational) -> Self {
        Self::atom(DimAtom::One, q)
    }

    pub fn atom(a: DimAtom, q: Rational) -> Self {
        let mut c = Self::zero();
        c.add_atom(a, q);
        c
    }

    /// `q * n^-i (n-1)^-j (n-2)^-k`, split into atoms.
    pub fn monomial(q: Rational, i: u32, j: u32, k: u32) -> Self {
        partial_fractions(i, j, k).scale(&q)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&DimAtom, &Rational)> {
        self.terms.iter()
    }

    fn add_atom(&mut self, a: DimAtom, q: Rational) {
        if q.is_zero() {
            return;
        }
        let e = self.terms.entry(a).or_insert_with(Rational::zero);
        *e += q;
        if e.is_zero() {
            self.terms.remove(&a);
        }
    }

    pub fn add(&self, other: &DimCoeff) -> DimCoeff {
        let mut out = self.clone();
        for (a, q) in &other.terms {
            out.add_atom(*a, q.clone());
        }
        out
    }

    pub fn scale(&self, q: &Rational) -> DimCoeff {
        let mut out = DimCoeff::zero();
        for (a, r) in &self.terms {
            out.add_atom(*a, r * q);
        }
        out
    }

    pub fn mul(&self, other: &DimCoeff) -> DimCoeff {
        let mut out = DimCoeff::zero();
        for (a, q) in &self.terms {
            for (b, r) in &other.terms {
                let (i, j, k) = exponents(*a, *b);
                out = out.add(&DimCoeff::monomial(q * r, i, j, k));
            }
        }
        out
    }

    pub fn eval(&self, n: usize) -> Result<Rational, SingularDimension> {
        let mut total = Rational::zero();
        for (a, q) in &self.terms {
            let v = a.eval(n).ok_or_else(|| SingularDimension { coeff: self.to_string(), n })?;
            total += q * v;
        }
        Ok(total)
    }

    /// The single atom with a positive weight, if the coefficient has that shape.
    pub fn as_positive_atom(&self) -> Option<(DimAtom, &Rational)> {
        let mut it = self.terms.iter();
        match (it.next(), it.next()) {
            (Some((a, q)), None) if q.is_positive() => Some((*a, q)),
            _ => None,
        }
    }
}

fn exponents(a: DimAtom, b: DimAtom) -> (u32, u32, u32) {
    let mut e = [0u32; 3];
    for atom in [a, b] {
        match atom {
            DimAtom::One => {}
            DimAtom::InvN(k) => e[0] += k,
            DimAtom::InvNMinus1(k) => e[1] += k,
            DimAtom::InvNMinus2(k) => e[2] += k,
        }
    }
    (e[0], e[1], e[2])
}

fn partial_fractions(i: u32, j: u32, k: u32) -> DimCoeff {
    let one = Rational::one();
    match (i, j, k) {
        (0, 0, 0) => DimCoeff::constant(one),
        (i, 0, 0) => DimCoeff::atom(DimAtom::InvN(i), one),
        (0, j, 0) => DimCoeff::atom(DimAtom::InvNMinus1(j), one),
        (0, 0, k) => DimCoeff::atom(DimAtom::InvNMinus2(k), one),
        (i, j, k) if i > 0 && j > 0 => {
            // 1/(n(n-1)) = 1/(n-1) - 1/n
            partial_fractions(i - 1, j, k).add(&partial_fractions(i, j - 1, k).scale(&-one))
        }
        (i, j, k) if j > 0 && k > 0 => {
            // 1/((n-1)(n-2)) = 1/(n-2) - 1/(n-1)
            partial_fractions(i, j - 1, k).add(&partial_fractions(i, j, k - 1).scale(&-one))
        }
        (i, j, k) => {
            // 1/(n(n-2)) = (1/(n-2) - 1/n)/2
            let half = frac(1, 2);
            partial_fractions(i - 1, j, k).add(&partial_fractions(i, j, k - 1).scale(&-one)).scale(&half)
        }
    }
}

impl fmt::Display for DimCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (a, q)) in self.terms.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}*{a}", format_rational(q))?;
        }
        Ok(())
    }
}
