//! Differential polynomials in the derivatives of a density `p`.
//!
//! A [`DerivSymbol`] is one partial derivative of `p`, a [`DiffMonomial`] is a
//! product of such symbols and a [`DiffPoly`] is an exact rational linear
//! combination of monomials. [`LaurentForm`] adds a power of `p` in the
//! denominator, which is the shape of every integrand the prover handles.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use smallvec::SmallVec;
use thiserror::Error;

use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffFormError {
    #[error("cannot compare concrete and abstract axes")]
    MixedAxes,
    #[error("heat derivative needs concrete axes, found `{0}`")]
    AbstractAxis(Axis),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A coordinate axis: concrete `1..=n` or an abstract label `a, b, c, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Concrete(u8),
    Abstract(u8),
}

impl Axis {
    pub fn abs(label: char) -> Axis {
        Axis::Abstract(label as u8 - b'a')
    }

    pub fn is_abstract(self) -> bool {
        matches!(self, Axis::Abstract(_))
    }

    pub fn concrete_range(n: usize) -> Vec<Axis> {
        (1..=n as u8).map(Axis::Concrete).collect()
    }

    pub fn abstract_range(n: usize) -> Vec<Axis> {
        (0..n as u8).map(Axis::Abstract).collect()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Concrete(i) => write!(f, "{i}"),
            Axis::Abstract(i) => write!(f, "{}", (b'a' + i) as char),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = DiffFormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(i) = s.parse::<u8>() {
            if i == 0 {
                return Err(DiffFormError::Parse("axes are numbered from 1".into()));
            }
            return Ok(Axis::Concrete(i));
        }
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c @ 'a'..='z'), None) => Ok(Axis::abs(c)),
            _ => Err(DiffFormError::Parse(format!("bad axis `{s}`"))),
        }
    }
}

/// A partial derivative of `p`; the empty symbol is `p` itself.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct DerivSymbol {
    orders: SmallVec<[(Axis, u8); 3]>,
}

impl DerivSymbol {
    pub fn p() -> Self {
        Self::default()
    }

    pub fn from_orders(orders: impl IntoIterator<Item = (Axis, u8)>) -> Self {
        let mut out = DerivSymbol::p();
        for (axis, k) in orders {
            for _ in 0..k {
                out = out.bump(axis);
            }
        }
        out
    }

    /// `p` differentiated once along each listed axis.
    pub fn along(axes: &[Axis]) -> Self {
        Self::from_orders(axes.iter().map(|&a| (a, 1)))
    }

    pub fn orders(&self) -> &[(Axis, u8)] {
        &self.orders
    }

    pub fn order(&self) -> u32 {
        self.orders.iter().map(|&(_, k)| k as u32).sum()
    }

    pub fn order_along(&self, axis: Axis) -> u8 {
        self.orders.iter().find(|(a, _)| *a == axis).map_or(0, |&(_, k)| k)
    }

    pub fn is_p(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn bump(&self, axis: Axis) -> Self {
        let mut orders = self.orders.clone();
        match orders.iter().position(|(a, _)| *a >= axis) {
            Some(i) if orders[i].0 == axis => orders[i].1 += 1,
            Some(i) => orders.insert(i, (axis, 1)),
            None => orders.push((axis, 1)),
        }
        DerivSymbol { orders }
    }

    pub fn axes(&self) -> impl Iterator<Item = Axis> + '_ {
        self.orders.iter().map(|&(a, _)| a)
    }

    pub fn map_axes(&self, f: &impl Fn(Axis) -> Axis) -> Self {
        Self::from_orders(self.orders.iter().map(|&(a, k)| (f(a), k)))
    }
}

impl Ord for DerivSymbol {
    /// Graded by order, then by the order along the highest axis downwards.
    fn cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| {
            let (a, b) = (&self.orders, &other.orders);
            let (mut i, mut j) = (a.len(), b.len());
            while i > 0 || j > 0 {
                let xa = (i > 0).then(|| a[i - 1].0);
                let xb = (j > 0).then(|| b[j - 1].0);
                let top = xa.max(xb);
                let ea = if xa == top { a[i - 1].1 } else { 0 };
                let eb = if xb == top { b[j - 1].1 } else { 0 };
                if ea != eb {
                    return ea.cmp(&eb);
                }
                if xa == top {
                    i -= 1;
                }
                if xb == top {
                    j -= 1;
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for DerivSymbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DerivSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d[")?;
        for (i, (a, k)) in self.orders.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}:{k}")?;
        }
        write!(f, "]")
    }
}

impl std::str::FromStr for DerivSymbol {
    type Err = DiffFormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DiffFormError::Parse(format!("bad derivative symbol `{s}`"));
        let inner = s.trim().strip_prefix("d[").and_then(|r| r.strip_suffix(']')).ok_or_else(bad)?;
        let mut pairs = Vec::new();
        for part in inner.split(',').filter(|p| !p.trim().is_empty()) {
            let (a, k) = part.split_once(':').ok_or_else(bad)?;
            let axis: Axis = a.parse()?;
            let k: u8 = k.trim().parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            pairs.push((axis, k));
        }
        let sym = DerivSymbol::from_orders(pairs.iter().copied());
        if sym.orders.len() != pairs.len() {
            return Err(bad());
        }
        Ok(sym)
    }
}

/// A product of derivative symbols, stored in ascending symbol order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct DiffMonomial {
    factors: SmallVec<[(DerivSymbol, u16); 4]>,
}

impl DiffMonomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn symbol(sym: DerivSymbol) -> Self {
        Self::symbol_pow(sym, 1)
    }

    pub fn symbol_pow(sym: DerivSymbol, k: u16) -> Self {
        let mut m = Self::one();
        if k > 0 {
            m.factors.push((sym, k));
        }
        m
    }

    pub fn from_factors(factors: impl IntoIterator<Item = (DerivSymbol, u16)>) -> Self {
        let mut m = Self::one();
        for (s, k) in factors {
            m.mul_symbol(&s, k);
        }
        m
    }

    pub fn factors(&self) -> &[(DerivSymbol, u16)] {
        &self.factors
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|&(_, k)| k as u32).sum()
    }

    pub fn total_order(&self) -> u32 {
        self.factors.iter().map(|(s, k)| s.order() * *k as u32).sum()
    }

    /// Largest order of a single factor.
    pub fn order(&self) -> u32 {
        self.factors.iter().map(|(s, _)| s.order()).max().unwrap_or(0)
    }

    pub fn power_of(&self, sym: &DerivSymbol) -> u16 {
        self.factors.iter().find(|(s, _)| s == sym).map_or(0, |&(_, k)| k)
    }

    pub fn p_power(&self) -> u16 {
        self.power_of(&DerivSymbol::p())
    }

    fn mul_symbol(&mut self, sym: &DerivSymbol, k: u16) {
        if k == 0 {
            return;
        }
        match self.factors.binary_search_by(|(s, _)| s.cmp(sym)) {
            Ok(i) => self.factors[i].1 += k,
            Err(i) => self.factors.insert(i, (sym.clone(), k)),
        }
    }

    pub fn mul(&self, other: &DiffMonomial) -> DiffMonomial {
        let (a, b) = (&self.factors, &other.factors);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().cloned());
        DiffMonomial { factors: out }
    }

    pub fn pow(&self, k: u16) -> DiffMonomial {
        DiffMonomial { factors: self.factors.iter().map(|(s, e)| (s.clone(), e * k)).filter(|f| f.1 > 0).collect() }
    }

    /// Divide by `other` if it divides `self`.
    pub fn div(&self, other: &DiffMonomial) -> Option<DiffMonomial> {
        let mut out = self.clone();
        for (s, k) in &other.factors {
            let i = out.factors.iter().position(|(t, _)| t == s)?;
            if out.factors[i].1 < *k {
                return None;
            }
            out.factors[i].1 -= k;
            if out.factors[i].1 == 0 {
                out.factors.remove(i);
            }
        }
        Some(out)
    }

    pub fn axes(&self) -> impl Iterator<Item = Axis> + '_ {
        self.factors.iter().flat_map(|(s, _)| s.axes())
    }

    pub fn map_axes(&self, f: &impl Fn(Axis) -> Axis) -> DiffMonomial {
        DiffMonomial::from_factors(self.factors.iter().map(|(s, k)| (s.map_axes(f), *k)))
    }
}

impl Ord for DiffMonomial {
    /// Compares the exponent of the largest symbol first.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.factors, &other.factors);
        let (mut i, mut j) = (a.len(), b.len());
        while i > 0 || j > 0 {
            let sa = (i > 0).then(|| &a[i - 1].0);
            let sb = (j > 0).then(|| &b[j - 1].0);
            let top = match (sa, sb) {
                (Some(x), Some(y)) => {
                    if x >= y {
                        x
                    } else {
                        y
                    }
                }
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (None, None) => unreachable!(),
            };
            let ea = if sa == Some(top) { a[i - 1].1 } else { 0 };
            let eb = if sb == Some(top) { b[j - 1].1 } else { 0 };
            if ea != eb {
                return ea.cmp(&eb);
            }
            if sa == Some(top) {
                i -= 1;
            }
            if sb == Some(top) {
                j -= 1;
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for DiffMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Monomial order that refuses to compare across concrete and abstract axes.
pub fn compare_monomials(a: &DiffMonomial, b: &DiffMonomial) -> Result<Ordering, DiffFormError> {
    let kinds: Vec<bool> = a.axes().chain(b.axes()).map(Axis::is_abstract).collect();
    if kinds.iter().any(|&k| k) && kinds.iter().any(|&k| !k) {
        return Err(DiffFormError::MixedAxes);
    }
    Ok(a.cmp(b))
}

impl fmt::Display for DiffMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (i, (s, k)) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            write!(f, "{s}")?;
            if *k > 1 {
                write!(f, "^{k}")?;
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for DiffMonomial {
    type Err = DiffFormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "1" {
            return Ok(DiffMonomial::one());
        }
        let bad = || DiffFormError::Parse(format!("bad monomial `{s}`"));
        let mut m = DiffMonomial::one();
        for part in s.split('*') {
            let (sym, k) = match part.split_once('^') {
                Some((sym, k)) => (sym, k.trim().parse::<u16>().map_err(|_| bad())?),
                None => (part, 1),
            };
            if k == 0 {
                return Err(bad());
            }
            m.mul_symbol(&sym.parse()?, k);
        }
        Ok(m)
    }
}

/// Every derivative symbol over `axes` whose order is at most `max_order`.
pub fn symbols_up_to(axes: &[Axis], max_order: u32) -> Vec<DerivSymbol> {
    let mut out = vec![DerivSymbol::p()];
    for &axis in axes {
        let mut next = Vec::new();
        for s in &out {
            for k in 0..=(max_order - s.order()) {
                next.push(DerivSymbol::from_orders(s.orders().iter().copied().chain((k > 0).then_some((axis, k as u8)))));
            }
        }
        out = next;
    }
    out.sort();
    out
}

/// Monomials over `axes` with the given degree and total order, every factor of order at most `max_factor_order`.
pub fn enumerate_monomials(degree: u32, total_order: u32, max_factor_order: u32, axes: &[Axis]) -> Vec<DiffMonomial> {
    fn rec(
        symbols: &[DerivSymbol],
        start: usize,
        degree: u32,
        order: u32,
        current: &mut Vec<(DerivSymbol, u16)>,
        out: &mut Vec<DiffMonomial>,
    ) {
        if degree == 0 {
            if order == 0 {
                out.push(DiffMonomial::from_factors(current.iter().cloned()));
            }
            return;
        }
        for i in start..symbols.len() {
            let o = symbols[i].order();
            // With symbols graded by order, once one symbol is too big for the remaining
            // budget every later symbol is too.
            if o > order {
                break;
            }
            // The remaining `degree` factors all have order >= o.
            if o * degree > order {
                break;
            }
            for k in 1..=degree {
                if o * k > order {
                    break;
                }
                current.push((symbols[i].clone(), k as u16));
                rec(symbols, i + 1, degree - k, order - o * k, current, out);
                current.pop();
            }
        }
    }
    let symbols = symbols_up_to(axes, max_factor_order.min(total_order));
    let mut out = Vec::new();
    rec(&symbols, 0, degree, total_order, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Exact rational combination of monomials. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DiffPoly {
    terms: BTreeMap<DiffMonomial, Rational>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(DiffMonomial::one(), Rational::one())
    }

    pub fn monomial(m: DiffMonomial, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn symbol(sym: DerivSymbol) -> Self {
        Self::monomial(DiffMonomial::symbol(sym), Rational::one())
    }

    /// `p` differentiated along the given axes, one order each.
    pub fn deriv(axes: &[Axis]) -> Self {
        Self::symbol(DerivSymbol::along(axes))
    }

    pub fn p() -> Self {
        Self::symbol(DerivSymbol::p())
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (DiffMonomial, Rational)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&DiffMonomial, &Rational)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (DiffMonomial, Rational)> {
        self.terms.into_iter()
    }

    pub fn coefficient(&self, m: &DiffMonomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, m: DiffMonomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &DiffPoly, c: &Rational) {
        if c.is_zero() {
            return;
        }
        for (m, d) in &other.terms {
            self.add_term(m.clone(), d * c);
        }
    }

    pub fn scale(&self, c: &Rational) -> DiffPoly {
        if c.is_zero() {
            return DiffPoly::zero();
        }
        DiffPoly { terms: self.terms.iter().map(|(m, d)| (m.clone(), d * c)).collect() }
    }

    pub fn mul_monomial(&self, m: &DiffMonomial) -> DiffPoly {
        DiffPoly { terms: self.terms.iter().map(|(n, c)| (n.mul(m), c.clone())).collect() }
    }

    pub fn pow(&self, k: u32) -> DiffPoly {
        (0..k).fold(DiffPoly::one(), |acc, _| &acc * self)
    }

    /// Largest monomial in the monomial order.
    pub fn leading(&self) -> Option<(&DiffMonomial, &Rational)> {
        self.terms.iter().next_back()
    }

    /// Exponent of `p` common to every term.
    pub fn min_p_power(&self) -> u16 {
        self.terms.keys().map(DiffMonomial::p_power).min().unwrap_or(0)
    }

    /// Divide every term by `p^k`; the caller guarantees divisibility.
    pub fn div_p_power(&self, k: u16) -> DiffPoly {
        if k == 0 {
            return self.clone();
        }
        let pk = DiffMonomial::symbol_pow(DerivSymbol::p(), k);
        DiffPoly { terms: self.terms.iter().map(|(m, c)| (m.div(&pk).expect("p-power divides"), c.clone())).collect() }
    }

    pub fn axes(&self) -> std::collections::BTreeSet<Axis> {
        self.terms.keys().flat_map(|m| m.axes().collect::<Vec<_>>()).collect()
    }

    pub fn map_axes(&self, f: &impl Fn(Axis) -> Axis) -> DiffPoly {
        DiffPoly::from_terms(self.terms.iter().map(|(m, c)| (m.map_axes(f), c.clone())))
    }

    /// Apply the derivation that sends each symbol `v` to `image(v)`.
    pub fn apply_derivation(&self, image: &impl Fn(&DerivSymbol) -> DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero();
        let mut cache: BTreeMap<DerivSymbol, DiffPoly> = BTreeMap::new();
        for (m, c) in &self.terms {
            for (i, (s, k)) in m.factors.iter().enumerate() {
                let img = cache.entry(s.clone()).or_insert_with(|| image(s));
                if img.is_zero() {
                    continue;
                }
                let mut rest = m.clone();
                rest.factors[i].1 -= 1;
                if rest.factors[i].1 == 0 {
                    rest.factors.remove(i);
                }
                let coef = c * Rational::from_integer((*k).into());
                for (n, d) in &img.terms {
                    out.add_term(rest.mul(n), &coef * d);
                }
            }
        }
        out
    }

    pub fn differentiate(&self, axis: Axis) -> DiffPoly {
        self.apply_derivation(&|s: &DerivSymbol| DiffPoly::symbol(s.bump(axis)))
    }

    /// The derivation `v -> v_ee / 2` summed over `axes`.
    pub fn half_laplacian_along(&self, axes: &[Axis]) -> DiffPoly {
        let half = Rational::new(1.into(), 2.into());
        self.apply_derivation(&|s: &DerivSymbol| {
            DiffPoly::from_terms(axes.iter().map(|&e| (DiffMonomial::symbol(s.bump(e).bump(e)), half.clone())))
        })
    }

    /// Time derivative along the heat flow on `n` concrete axes.
    pub fn heat_time_derivative(&self, n: usize) -> Result<DiffPoly, DiffFormError> {
        if let Some(a) = self.axes().into_iter().find(|a| a.is_abstract()) {
            return Err(DiffFormError::AbstractAxis(a));
        }
        Ok(self.half_laplacian_along(&Axis::concrete_range(n)))
    }

    /// Check homogeneity: every monomial has this degree and total order.
    pub fn is_homogeneous(&self, degree: u32, total_order: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == degree && m.total_order() == total_order)
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}*{m}", format_rational(c))?;
        }
        Ok(())
    }
}

impl std::str::FromStr for DiffPoly {
    type Err = DiffFormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "0" {
            return Ok(DiffPoly::zero());
        }
        let mut out = DiffPoly::zero();
        for term in s.split(" + ") {
            let (c, m) = term
                .split_once('*')
                .ok_or_else(|| DiffFormError::Parse(format!("bad term `{term}`")))?;
            let c = parse_rational(c).map_err(|e| DiffFormError::Parse(e.to_string()))?;
            out.add_term(m.parse()?, c);
        }
        Ok(out)
    }
}

impl std::ops::Add for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        out.add_scaled(rhs, &Rational::one());
        out
    }
}

impl std::ops::Sub for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        out.add_scaled(rhs, &-Rational::one());
        out
    }
}

impl std::ops::Mul for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            for (n, d) in &rhs.terms {
                out.add_term(m.mul(n), c * d);
            }
        }
        out
    }
}

impl std::ops::Neg for &DiffPoly {
    type Output = DiffPoly;
    fn neg(self) -> DiffPoly {
        self.scale(&-Rational::one())
    }
}

/// `numerator / p^p_power`, kept with no common factor of `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentForm {
    numerator: DiffPoly,
    p_power: u32,
}

impl LaurentForm {
    pub fn new(numerator: DiffPoly, p_power: u32) -> Self {
        let cancel = (numerator.min_p_power() as u32).min(p_power);
        let cancel = if numerator.is_zero() { p_power } else { cancel };
        LaurentForm { numerator: numerator.div_p_power(cancel as u16), p_power: p_power - cancel }
    }

    pub fn numerator(&self) -> &DiffPoly {
        &self.numerator
    }

    pub fn p_power(&self) -> u32 {
        self.p_power
    }

    /// Apply a derivation `D` with `D(N / p^k) = (p D(N) - k N D(p)) / p^(k+1)`.
    pub fn apply_derivation(&self, image: &impl Fn(&DerivSymbol) -> DiffPoly) -> LaurentForm {
        let k = self.p_power;
        let dn = self.numerator.apply_derivation(image);
        let mut num = &DiffPoly::p() * &dn;
        let dp = image(&DerivSymbol::p());
        num.add_scaled(&(&self.numerator * &dp), &-Rational::from_integer(k.into()));
        LaurentForm::new(num, k + 1)
    }

    pub fn differentiate(&self, axis: Axis) -> LaurentForm {
        self.apply_derivation(&|s: &DerivSymbol| DiffPoly::symbol(s.bump(axis)))
    }

    pub fn half_laplacian_along(&self, axes: &[Axis]) -> LaurentForm {
        let half = Rational::new(1.into(), 2.into());
        self.apply_derivation(&|s: &DerivSymbol| {
            DiffPoly::from_terms(axes.iter().map(|&e| (DiffMonomial::symbol(s.bump(e).bump(e)), half.clone())))
        })
    }

    pub fn heat_time_derivative(&self, n: usize) -> Result<LaurentForm, DiffFormError> {
        if let Some(a) = self.numerator.axes().into_iter().find(|a| a.is_abstract()) {
            return Err(DiffFormError::AbstractAxis(a));
        }
        Ok(self.half_laplacian_along(&Axis::concrete_range(n)))
    }

    /// The numerator after bringing the form to denominator `p^k`.
    pub fn numerator_over(&self, k: u32) -> Option<DiffPoly> {
        let diff = k.checked_sub(self.p_power)?;
        let pk = DiffMonomial::symbol_pow(DerivSymbol::p(), diff as u16);
        Some(self.numerator.mul_monomial(&pk))
    }
}
