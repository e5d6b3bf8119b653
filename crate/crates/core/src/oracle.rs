//! Floating-point ground truth for differential forms: isotropic Gaussian
//! mixtures under the heat flow, with closed-form derivatives, and tensor
//! trapezoid quadrature of forms `N / p^k`.
//!
//! Every symbol is evaluated as the ratio `d^s p / p`, so a monomial of degree
//! `d` in a form over `p^k` contributes `p^(d - k)` times a product of ratios.
//! This keeps far-tail points free of underflow.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffform::{Axis, DerivSymbol, DiffPoly, LaurentForm};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("a mixture needs at least one component")]
    Empty,
    #[error("component {0}: weight must be positive")]
    Weight(usize),
    #[error("weights sum to {0}, not 1")]
    WeightSum(f64),
    #[error("component {0}: variance must be positive")]
    Variance(usize),
    #[error("component {index}: mean has {got} coordinates, expected {expected}")]
    MeanLength { index: usize, expected: usize, got: usize },
    #[error("form uses axis {axis}, outside 1..={dimension}")]
    Axis { axis: Axis, dimension: usize },
    #[error("quadrature supports dimensions 1..=3, got {0}")]
    QuadratureDimension(usize),
    #[error("time must be positive, got {0}")]
    Time(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic variance at time zero.
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureDensity {
    pub dimension: usize,
    pub components: Vec<GaussianComponent>,
}

impl MixtureDensity {
    pub fn new(dimension: usize, components: Vec<GaussianComponent>) -> Result<Self, OracleError> {
        if components.is_empty() {
            return Err(OracleError::Empty);
        }
        for (index, c) in components.iter().enumerate() {
            if !(c.weight > 0.0) {
                return Err(OracleError::Weight(index));
            }
            if !(c.variance > 0.0) {
                return Err(OracleError::Variance(index));
            }
            if c.mean.len() != dimension {
                return Err(OracleError::MeanLength { index, expected: dimension, got: c.mean.len() });
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OracleError::WeightSum(total));
        }
        Ok(MixtureDensity { dimension, components })
    }

    pub fn standard_gaussian(dimension: usize) -> Self {
        Self::gaussian(vec![0.0; dimension], 1.0)
    }

    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Self {
        MixtureDensity { dimension: mean.len(), components: vec![GaussianComponent { weight: 1.0, mean, variance }] }
    }

    /// The fixed two-component mixture used to validate generated identities.
    pub fn test_mixture(dimension: usize) -> Self {
        let shift = |s: f64| (0..dimension).map(|i| s * (1.0 + 0.5 * i as f64)).collect();
        MixtureDensity {
            dimension,
            components: vec![
                GaussianComponent { weight: 0.3, mean: shift(-0.8), variance: 0.6 },
                GaussianComponent { weight: 0.7, mean: shift(0.5), variance: 1.1 },
            ],
        }
    }

    /// Density of `X + Z_t`: every component variance grows by `t`.
    pub fn evolved(&self, t: f64) -> MixtureDensity {
        let components = self.components.iter().map(|c| GaussianComponent { variance: c.variance + t, ..c.clone() }).collect();
        MixtureDensity { dimension: self.dimension, components }
    }

    pub fn max_std(&self) -> f64 {
        self.components.iter().map(|c| c.variance.sqrt()).fold(0.0, f64::max)
    }

    fn check_axes(&self, f: &DiffPoly) -> Result<(), OracleError> {
        for axis in f.axes() {
            match axis {
                Axis::Concrete(i) if (i as usize) <= self.dimension => {}
                _ => return Err(OracleError::Axis { axis, dimension: self.dimension }),
            }
        }
        Ok(())
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        PointValues::new(self, x).log_p.exp()
    }

    /// `d^s p (x)` in closed form.
    pub fn derivative(&self, sym: &DerivSymbol, x: &[f64]) -> f64 {
        let mut pv = PointValues::new(self, x);
        pv.log_p.exp() * pv.ratio(sym)
    }

    /// Value of a polynomial in `p` and its derivatives at `x`.
    pub fn eval_poly(&self, f: &DiffPoly, x: &[f64]) -> Result<f64, OracleError> {
        self.check_axes(f)?;
        Ok(PointValues::new(self, x).eval(f, 0))
    }
}

/// Probabilists' Hermite polynomials `He_0..=He_k` at `z`.
fn hermite(k: usize, z: f64) -> Vec<f64> {
    let mut h = vec![1.0, z];
    for j in 1..k {
        h.push(z * h[j] - j as f64 * h[j - 1]);
    }
    h.truncate(k + 1);
    h
}

/// Per-point cache: log density, posterior component weights and Hermite tables.
struct PointValues<'a> {
    density: &'a MixtureDensity,
    log_p: f64,
    posterior: Vec<f64>,
    z: Vec<Vec<f64>>,
    hermite: Vec<Vec<Vec<f64>>>,
    ratios: HashMap<DerivSymbol, f64>,
}

impl<'a> PointValues<'a> {
    fn new(density: &'a MixtureDensity, x: &[f64]) -> Self {
        let n = density.dimension as f64;
        let mut logs = Vec::with_capacity(density.components.len());
        let mut z = Vec::with_capacity(density.components.len());
        for c in &density.components {
            let s = c.variance.sqrt();
            let zc: Vec<f64> = x.iter().zip(&c.mean).map(|(xi, mi)| (xi - mi) / s).collect();
            let q: f64 = zc.iter().map(|v| v * v).sum();
            logs.push(c.weight.ln() - 0.5 * q - 0.5 * n * (2.0 * std::f64::consts::PI * c.variance).ln());
            z.push(zc);
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        let log_p = top + sum.ln();
        let posterior = logs.iter().map(|l| (l - log_p).exp()).collect();
        PointValues { density, log_p, posterior, z, hermite: vec![Vec::new(); density.components.len()], ratios: HashMap::new() }
    }

    /// `d^s p / p`: posterior average of each component's Hermite factor.
    fn ratio(&mut self, sym: &DerivSymbol) -> f64 {
        if let Some(v) = self.ratios.get(sym) {
            return *v;
        }
        let max_order = sym.orders().iter().map(|(_, k)| *k as usize).max().unwrap_or(0);
        let mut total = 0.0;
        for (ci, c) in self.density.components.iter().enumerate() {
            if self.hermite[ci].first().is_none_or(|h| h.len() <= max_order) {
                self.hermite[ci] = self.z[ci].iter().map(|&zi| hermite(max_order.max(8), zi)).collect();
            }
            let s = c.variance.sqrt();
            let mut factor = 1.0;
            for &(axis, k) in sym.orders() {
                let Axis::Concrete(i) = axis else { unreachable!("axes checked") };
                let k = k as usize;
                let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
                factor *= sign * self.hermite[ci][i as usize - 1][k] / s.powi(k as i32);
            }
            total += self.posterior[ci] * factor;
        }
        self.ratios.insert(sym.clone(), total);
        total
    }

    /// `f / p^k`.
    fn eval(&mut self, f: &DiffPoly, k: u32) -> f64 {
        let mut out = 0.0;
        for (mono, c) in f.terms() {
            let mut v = crate::rational::to_f64(c);
            for (sym, e) in mono.factors() {
                if !sym.is_p() {
                    v *= self.ratio(sym).powi(*e as i32);
                }
            }
            let excess = mono.degree() as f64 - k as f64;
            out += v * (excess * self.log_p).exp();
        }
        out
    }
}

/// Value of the form for the density evolved to time `t`.
pub fn eval_form(f: &LaurentForm, d: &MixtureDensity, x: &[f64], t: f64) -> Result<f64, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::Time(t));
    }
    let dt = d.evolved(t);
    dt.check_axes(f.numerator())?;
    Ok(PointValues::new(&dt, x).eval(f.numerator(), f.p_power()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureScheme {
    /// Composite trapezoid; the estimate compares against every other node.
    Trapezoid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Half-width of the box in units of the largest component standard deviation.
    pub half_width: f64,
    /// Intervals per axis; rounded up to an even count.
    pub points: usize,
    pub scheme: QuadratureScheme,
    /// Results whose error estimate exceeds this are flagged.
    pub tolerance: f64,
}

impl QuadratureSpec {
    pub fn default_for(n: usize) -> Self {
        let points = match n {
            1 => 200,
            2 => 120,
            _ => 60,
        };
        QuadratureSpec { half_width: 8.0, points, scheme: QuadratureScheme::Trapezoid, tolerance: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub flagged: bool,
}

/// Tensor trapezoid quadrature of `f` against the density evolved to `t`.
pub fn integrate_form(f: &LaurentForm, d: &MixtureDensity, t: f64, q: &QuadratureSpec) -> Result<Integral, OracleError> {
    integrate_forms(std::slice::from_ref(f), d, t, q).map(|mut v| v.remove(0))
}

/// Several forms on one grid; symbol ratios are shared across forms at each node.
pub fn integrate_forms(forms: &[LaurentForm], d: &MixtureDensity, t: f64, q: &QuadratureSpec) -> Result<Vec<Integral>, OracleError> {
    let n = d.dimension;
    if !(1..=3).contains(&n) {
        return Err(OracleError::QuadratureDimension(n));
    }
    if !(t > 0.0) {
        return Err(OracleError::Time(t));
    }
    let dt = d.evolved(t);
    for f in forms {
        dt.check_axes(f.numerator())?;
    }
    let intervals = q.points + q.points % 2;
    let reach = q.half_width * dt.max_std();
    let axes: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let lo = dt.components.iter().map(|c| c.mean[i]).fold(f64::INFINITY, f64::min) - reach;
            let hi = dt.components.iter().map(|c| c.mean[i]).fold(f64::NEG_INFINITY, f64::max) + reach;
            (lo, (hi - lo) / intervals as f64)
        })
        .collect();
    let nodes = intervals + 1;
    let mut fine = vec![0.0; forms.len()];
    let mut coarse = vec![0.0; forms.len()];
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        let mut wf = 1.0;
        let mut wc = 1.0;
        for (i, &k) in idx.iter().enumerate() {
            x[i] = axes[i].0 + k as f64 * axes[i].1;
            let end = k == 0 || k == intervals;
            wf *= if end { 0.5 } else { 1.0 };
            wc *= if k % 2 == 1 { 0.0 } else if end { 1.0 } else { 2.0 };
        }
        let mut pv = PointValues::new(&dt, &x);
        for (j, f) in forms.iter().enumerate() {
            let v = pv.eval(f.numerator(), f.p_power());
            fine[j] += wf * v;
            if wc != 0.0 {
                coarse[j] += wc * v;
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                let cell: f64 = axes.iter().map(|a| a.1).product();
                return Ok(fine
                    .iter()
                    .zip(&coarse)
                    .map(|(a, b)| {
                        let value = a * cell;
                        // Coarse weights are already scaled to the fine cell.
                        let error = (value - b * cell).abs();
                        Integral { value, error, flagged: error > q.tolerance }
                    })
                    .collect());
            }
            idx[i] += 1;
            if idx[i] < nodes {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// `n (m-1)! / (2 (sigma^2 + t)^m)`, the Gaussian value of `(-1)^(m+1) d^m/dt^m H(X_t)`.
pub fn gaussian_reference(m: u32, n: usize, variance: &Rational, t: &Rational) -> Rational {
    crate::targets::gaussian_e1_integral(m, n, &(variance + t))
}

/// `(p_{t+h} - p_{t-h}) / 2h - (1/2) laplacian p_t` at `x`, all in closed form except the time difference.
pub fn heat_residual(d: &MixtureDensity, x: &[f64], t: f64, h: f64) -> f64 {
    let fd = (d.evolved(t + h).density(x) - d.evolved(t - h).density(x)) / (2.0 * h);
    let dt = d.evolved(t);
    let lap: f64 = (1..=d.dimension as u8).map(|i| dt.derivative(&DerivSymbol::from_orders([(Axis::Concrete(i), 2)]), x)).sum();
    fd - 0.5 * lap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffform::DiffMonomial;
    use crate::dimension::Dimension;
    use crate::rational::{frac, int};
    use crate::targets::target_e1;
    use proptest::prelude::*;

    fn sym(orders: &[(u8, u8)]) -> DerivSymbol {
        DerivSymbol::from_orders(orders.iter().map(|&(a, k)| (Axis::Concrete(a), k)))
    }

    #[test]
    fn evolved_standard_gaussian_at_origin() {
        let p = LaurentForm::new(DiffPoly::p(), 0);
        let v = eval_form(&p, &MixtureDensity::standard_gaussian(1), &[0.0], 1.0).unwrap();
        assert!((v - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn odd_derivative_vanishes_at_mean() {
        let d = MixtureDensity::gaussian(vec![0.3, -1.2], 0.7);
        assert!(d.derivative(&sym(&[(1, 1)]), &[0.3, -1.2]).abs() < 1e-15);
        assert!(d.derivative(&sym(&[(1, 3), (2, 1)]), &[0.3, -1.2]).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d = MixtureDensity::test_mixture(2);
        let x = [0.4, -0.3];
        let h = 1e-5;
        for base in [sym(&[]), sym(&[(1, 2)]), sym(&[(1, 1), (2, 2)])] {
            let up = base.bump(Axis::Concrete(2));
            let fd = (d.derivative(&base, &[x[0], x[1] + h]) - d.derivative(&base, &[x[0], x[1] - h])) / (2.0 * h);
            assert!((fd - d.derivative(&up, &x)).abs() < 1e-7, "{base}");
        }
    }

    #[test]
    fn log_laplacian_of_a_gaussian_is_constant() {
        // (p lap p - |grad p|^2) / p^2 = -n / (sigma^2 + t)
        let mut num = DiffPoly::zero();
        for a in 1..=2 {
            let a = Axis::Concrete(a);
            num = &num + &(&(&DiffPoly::p() * &DiffPoly::deriv(&[a, a])) - &DiffPoly::deriv(&[a]).pow(2));
        }
        let form = LaurentForm::new(num, 2);
        let d = MixtureDensity::gaussian(vec![1.0, 0.5], 0.5);
        for x in [[0.0, 0.0], [3.0, -2.0], [1.0, 0.5], [-6.0, 4.0]] {
            let v = eval_form(&form, &d, &x, 1.5).unwrap();
            assert!((v + 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn density_normalization() {
        let p = LaurentForm::new(DiffPoly::p(), 0);
        for n in 1..=3 {
            let r = integrate_form(&p, &MixtureDensity::test_mixture(n), 0.5, &QuadratureSpec::default_for(n)).unwrap();
            assert!((r.value - 1.0).abs() < 1e-8, "n={n}: {}", r.value);
            assert!(!r.flagged);
        }
    }

    #[test]
    fn second_order_fisher_information_of_a_gaussian() {
        let e = target_e1(2, Dimension::Concrete(1)).unwrap();
        let form = LaurentForm::new(e.concrete().unwrap().clone(), 3);
        let r = integrate_form(&form, &MixtureDensity::standard_gaussian(1), 1.0, &QuadratureSpec::default_for(1)).unwrap();
        assert!((r.value - 0.125).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn coarse_grids_are_flagged() {
        let form = LaurentForm::new(DiffPoly::monomial(DiffMonomial::symbol(sym(&[(1, 2)])).mul(&DiffMonomial::symbol(sym(&[(1, 2)]))), int(1)), 1);
        let q = QuadratureSpec { points: 6, ..QuadratureSpec::default_for(1) };
        let r = integrate_form(&form, &MixtureDensity::test_mixture(1), 0.1, &q).unwrap();
        assert!(r.flagged);
    }

    #[test]
    fn reference_values() {
        assert_eq!(gaussian_reference(1, 1, &int(1), &int(1)), frac(1, 4));
        assert_eq!(gaussian_reference(3, 2, &int(0), &int(1)), int(2));
        for n in 1..6 {
            assert_eq!(gaussian_reference(2, n, &frac(1, 3), &frac(2, 3)), frac(n as i64, 2));
        }
    }

    #[test]
    fn invalid_mixtures_are_rejected() {
        let c = |w: f64, v: f64| GaussianComponent { weight: w, mean: vec![0.0], variance: v };
        assert_eq!(MixtureDensity::new(1, vec![]), Err(OracleError::Empty));
        assert_eq!(MixtureDensity::new(1, vec![c(0.5, 1.0)]), Err(OracleError::WeightSum(0.5)));
        assert_eq!(MixtureDensity::new(1, vec![c(1.0, 0.0)]), Err(OracleError::Variance(0)));
        assert!(matches!(MixtureDensity::new(2, vec![c(1.0, 1.0)]), Err(OracleError::MeanLength { .. })));
        let abs = LaurentForm::new(DiffPoly::deriv(&[Axis::abs('a')]), 0);
        assert!(matches!(eval_form(&abs, &MixtureDensity::standard_gaussian(1), &[0.0], 1.0), Err(OracleError::Axis { .. })));
    }

    proptest! {
        #[test]
        fn heat_equation_holds(x in proptest::collection::vec(-3.0f64..3.0, 2), t in 0.2f64..3.0) {
            let r = heat_residual(&MixtureDensity::test_mixture(2), &x, t, 1e-4);
            prop_assert!(r.abs() < 1e-6, "{}", r);
        }
    }
}
