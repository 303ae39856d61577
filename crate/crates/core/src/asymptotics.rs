//! Leading-order bias and variance of both estimators, their ratio, and the
//! MSE rate exponents.
//!
//! The regular-scheme bias has three parts:
//!
//! ```text
//! smoothing   −(k_q/2π) ∫|t|^q C(t) e^{-itλ} dt · (ρₙbₙ)^q
//! truncation  −(1/2π)   ∫|t|   C(t) e^{-itλ} dt · ρₙ/n
//! aliasing     A/(2π)^p · Σ_{l≠0} |l|^{-p}      · ρₙ^{-p}
//! ```
//!
//! and the variance is `(1+δ_{0,λ}) φ(λ)² ∫K² / (nbₙ)`. Under Poisson
//! sampling the variance picks up the additive `C(0)/(2πρ)` term and the bias
//! keeps only the smoothing part with `ρₙbₙ` replaced by `bₙ`. Only leading
//! terms are returned; [`exact_mean_regular`] gives the exact finite-sample
//! mean of the regular estimator for comparison.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use num_rational::Ratio;
use thiserror::Error;

use crate::kernels::{Kernel, KernelError};
use crate::process_models::{CarModel, ModelError};
use crate::quadrature::{integrate, integrate_to_infinity, QuadratureError, Tolerance};

/// Absolute tolerance of the transform integrals.
pub const TRANSFORM_TOL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("covariance transform: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("kernel {kernel} has a nonzero derivative of order {order} at 0; the Poisson bias expansion would need derivatives of the spectral density")]
    NonConformingKernel { kernel: Kernel, order: u32 },
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> TheoryError {
    TheoryError::InvalidParameter {
        name,
        value,
        reason,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasBreakdown {
    pub smoothing_term: f64,
    pub truncation_term: f64,
    pub aliasing_term: f64,
    pub total: f64,
}

impl BiasBreakdown {
    fn new(smoothing_term: f64, truncation_term: f64, aliasing_term: f64) -> Self {
        Self {
            smoothing_term,
            truncation_term,
            aliasing_term,
            total: smoothing_term + truncation_term + aliasing_term,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    pub lambdas: Vec<f64>,
    pub bias_theory: Vec<f64>,
    pub var_theory: Vec<f64>,
    pub mse_theory: Vec<f64>,
    /// Regular scheme only; empty for Poisson curves.
    pub breakdown: Vec<BiasBreakdown>,
    /// `|λ| < 2ρbₙ`, where convergence is not uniform and the formulas are
    /// only indicative.
    pub near_origin: Vec<bool>,
}

/// Theory evaluator bound to one model, with a cache of covariance transforms.
#[derive(Debug)]
pub struct TheoryEvaluator {
    model: CarModel,
    cache: RwLock<HashMap<(u64, u64), f64>>,
}

impl Clone for TheoryEvaluator {
    fn clone(&self) -> Self {
        let cache = self.cache.read().map(|c| c.clone()).unwrap_or_default();
        Self {
            model: self.model.clone(),
            cache: RwLock::new(cache),
        }
    }
}

impl TheoryEvaluator {
    pub fn new(model: CarModel) -> Self {
        Self {
            model,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &CarModel {
        &self.model
    }

    /// `∫ |t|^w C(t) e^{-itλ} dt = 2∫₀^∞ t^w C(t) cos(λt) dt`.
    pub fn fourier_weighted_cov(&self, w: f64, lambda: f64) -> Result<f64, TheoryError> {
        let key = (w.to_bits(), lambda.abs().to_bits());
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(v);
        }
        let v = fourier_weighted_cov_tol(&self.model, w, lambda, TRANSFORM_TOL)?;
        if let Ok(mut cache) = self.cache.write() {
            cache.insert(key, v);
        }
        Ok(v)
    }

    pub fn variance_regular(
        &self,
        lambda: f64,
        n: usize,
        b_n: f64,
        kernel: Kernel,
    ) -> Result<f64, TheoryError> {
        check_nb(n, b_n)?;
        let phi = self.model.spectral_density(lambda);
        Ok(delta_factor(lambda) * phi * phi * kernel.l2_norm_sq()? / (n as f64 * b_n))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn bias_regular(
        &self,
        lambda: f64,
        n: usize,
        rho_n: f64,
        b_n: f64,
        q: f64,
        p: f64,
        kernel: Kernel,
    ) -> Result<BiasBreakdown, TheoryError> {
        check_nb(n, b_n)?;
        if !(rho_n.is_finite() && rho_n > 0.0) {
            return Err(invalid("rho_n", rho_n, "must be positive"));
        }
        let k_q = kernel.characteristic_constant(q)?;
        let smoothing = if k_q == 0.0 {
            0.0
        } else {
            -(k_q / (2.0 * PI)) * self.fourier_weighted_cov(q, lambda)? * (rho_n * b_n).powf(q)
        };
        let truncation =
            -(1.0 / (2.0 * PI)) * self.fourier_weighted_cov(1.0, lambda)? * (rho_n / n as f64);
        let a = self.model.tail_limit(p)?;
        let aliasing = if a == 0.0 {
            0.0
        } else {
            a / (2.0 * PI).powf(p) * zeta_tail_sum(p)? * rho_n.powf(-p)
        };
        Ok(BiasBreakdown::new(smoothing, truncation, aliasing))
    }

    pub fn variance_poisson(
        &self,
        lambda: f64,
        n: usize,
        b_n: f64,
        rho: f64,
        kernel: Kernel,
    ) -> Result<f64, TheoryError> {
        check_nb(n, b_n)?;
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid("rho", rho, "must be positive"));
        }
        let phi = self.model.spectral_density(lambda);
        let bracket = phi + self.model.covariance(0.0) / (2.0 * PI * rho);
        Ok(rho * bracket * bracket * delta_factor(lambda) * kernel.l2_norm_sq()?
            / (n as f64 * b_n))
    }

    /// Leading `O(bₙ^q)` term; the `O(1/n)` remainder is not evaluated.
    pub fn bias_poisson(
        &self,
        lambda: f64,
        b_n: f64,
        n: usize,
        q: f64,
        kernel: Kernel,
    ) -> Result<f64, TheoryError> {
        check_nb(n, b_n)?;
        // the middle sum of derivative terms must vanish
        let mut order = 1;
        while (order as f64) < q.floor() {
            if kernel.characteristic_constant(order as f64)? != 0.0 {
                return Err(TheoryError::NonConformingKernel { kernel, order });
            }
            order += 1;
        }
        let k_q = kernel.characteristic_constant(q)?;
        if k_q == 0.0 {
            return Ok(0.0);
        }
        Ok(-k_q * b_n.powf(q) * self.fourier_weighted_cov(q, lambda)? / (2.0 * PI))
    }

    /// Ratio of the Poisson to the regular asymptotic variance constants.
    pub fn variance_ratio(
        &self,
        lambda: f64,
        rho: f64,
        rate_q: f64,
        rate_r: f64,
    ) -> Result<f64, TheoryError> {
        let phi = self.model.spectral_density(lambda);
        if !(phi > 0.0) {
            return Err(invalid("phi(lambda)", phi, "must be positive"));
        }
        let c0 = self.model.covariance(0.0);
        let bracket = 1.0 + c0 / (2.0 * PI * rho * phi);
        Ok(rate_q / rate_r * rho * bracket * bracket)
    }

    /// The smallest value of [`Self::variance_ratio`] over `ρ`, attained at
    /// `ρ = C(0)/(2πφ(λ))`.
    pub fn min_variance_ratio(&self, lambda: f64, rate_q: f64, rate_r: f64) -> f64 {
        let phi = self.model.spectral_density(lambda);
        2.0 * rate_q * self.model.covariance(0.0) / (rate_r * PI * phi)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn regular_curve(
        &self,
        lambdas: &[f64],
        n: usize,
        rho_n: f64,
        b_n: f64,
        q: f64,
        p: f64,
        kernel: Kernel,
    ) -> Result<TheoryCurve, TheoryError> {
        let mut curve = TheoryCurve::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let bias = self.bias_regular(lambda, n, rho_n, b_n, q, p, kernel)?;
            let var = self.variance_regular(lambda, n, b_n, kernel)?;
            curve.push(lambda, bias.total, var, lambda.abs() < 2.0 * rho_n * b_n);
            curve.breakdown.push(bias);
        }
        Ok(curve)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn poisson_curve(
        &self,
        lambdas: &[f64],
        n: usize,
        rho: f64,
        b_n: f64,
        q: f64,
        kernel: Kernel,
    ) -> Result<TheoryCurve, TheoryError> {
        let mut curve = TheoryCurve::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let bias = self.bias_poisson(lambda, b_n, n, q, kernel)?;
            let var = self.variance_poisson(lambda, n, b_n, rho, kernel)?;
            curve.push(lambda, bias, var, lambda.abs() < 2.0 * rho * b_n);
        }
        Ok(curve)
    }
}

impl TheoryCurve {
    fn with_capacity(len: usize) -> Self {
        Self {
            lambdas: Vec::with_capacity(len),
            bias_theory: Vec::with_capacity(len),
            var_theory: Vec::with_capacity(len),
            mse_theory: Vec::with_capacity(len),
            breakdown: Vec::new(),
            near_origin: Vec::with_capacity(len),
        }
    }

    fn push(&mut self, lambda: f64, bias: f64, var: f64, near_origin: bool) {
        self.lambdas.push(lambda);
        self.bias_theory.push(bias);
        self.var_theory.push(var);
        self.mse_theory.push(bias * bias + var);
        self.near_origin.push(near_origin);
    }
}

fn delta_factor(lambda: f64) -> f64 {
    if lambda == 0.0 {
        2.0
    } else {
        1.0
    }
}

fn check_nb(n: usize, b_n: f64) -> Result<(), TheoryError> {
    if n == 0 {
        return Err(invalid("n", 0.0, "must be positive"));
    }
    if !(b_n.is_finite() && b_n > 0.0) {
        return Err(invalid("b_n", b_n, "must be positive"));
    }
    Ok(())
}

/// `2∫₀^∞ t^w C(t) cos(λt) dt` with the default tolerance.
pub fn fourier_weighted_cov(model: &CarModel, w: f64, lambda: f64) -> Result<f64, TheoryError> {
    fourier_weighted_cov_tol(model, w, lambda, TRANSFORM_TOL)
}

pub fn fourier_weighted_cov_tol(
    model: &CarModel,
    w: f64,
    lambda: f64,
    abs_tol: f64,
) -> Result<f64, TheoryError> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(invalid("w", w, "must be a nonnegative exponent"));
    }
    let lambda = lambda.abs();
    let integrand = |t: f64| {
        let base = model.covariance(t) * (lambda * t).cos();
        if w == 0.0 {
            base
        } else {
            t.powf(w) * base
        }
    };
    // Resolve the bulk on a finite range where the oscillation is visible, then
    // map the remaining tail.
    let split = 40.0 / model.alphas().iter().fold(f64::INFINITY, |m, a| m.min(*a));
    let tol = Tolerance::abs(0.5 * abs_tol);
    let head = integrate(integrand, 0.0, split, tol)?.value;
    let tail = integrate_to_infinity(integrand, split, tol)?.value;
    Ok(2.0 * (head + tail))
}

/// `Σ_{l≠0} |l|^{-p} = 2ζ(p)`: direct terms until they drop below `1e-14`,
/// then the midpoint integral of the remaining tail.
pub fn zeta_tail_sum(p: f64) -> Result<f64, TheoryError> {
    if !(p.is_finite() && p > 1.0) {
        return Err(invalid("p", p, "the series diverges for p <= 1"));
    }
    const MAX_TERMS: u64 = 1_000_000;
    let mut sum = 0.0;
    let mut l = 1u64;
    loop {
        let term = (l as f64).powf(-p);
        sum += term;
        if term < 1e-14 || l >= MAX_TERMS {
            break;
        }
        l += 1;
    }
    let tail = (l as f64 + 0.5).powf(1.0 - p) / (p - 1.0);
    Ok(2.0 * (sum + tail))
}

/// MSE exponents `(2pq/(p+q+2pq), 2⌊q⌋/(2⌊q⌋+1))` of the two schemes.
pub fn mse_rate_exponents(p: f64, q: f64) -> Result<(f64, f64), TheoryError> {
    if !(p.is_finite() && p > 1.0) {
        return Err(invalid("p", p, "must exceed 1"));
    }
    if !(q.is_finite() && q > 1.0) {
        return Err(invalid("q", q, "must exceed 1"));
    }
    let regular = 2.0 * p * q / (p + q + 2.0 * p * q);
    let qi = q.floor();
    Ok((regular, 2.0 * qi / (2.0 * qi + 1.0)))
}

/// Rate exponents for integer `p` and `q` as exact fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateExponents {
    /// `ρₙ ∝ n^{rho}`.
    pub rho: Ratio<i64>,
    /// `bₙ ∝ n^{-b_regular}`.
    pub b_regular: Ratio<i64>,
    /// `MSE(φ̂ₙ) = O(n^{-mse_regular})`.
    pub mse_regular: Ratio<i64>,
    /// `bₙ ∝ n^{-b_poisson}`.
    pub b_poisson: Ratio<i64>,
    /// `MSE(ψ̂ₙ) = O(n^{-mse_poisson})`.
    pub mse_poisson: Ratio<i64>,
}

pub fn rate_exponents_exact(p: i64, q: i64) -> Result<RateExponents, TheoryError> {
    if p <= 1 {
        return Err(invalid("p", p as f64, "must exceed 1"));
    }
    if q <= 1 {
        return Err(invalid("q", q as f64, "must exceed 1"));
    }
    let d = p + q + 2 * p * q;
    Ok(RateExponents {
        rho: Ratio::new(q, d),
        b_regular: Ratio::new(p + q, d),
        mse_regular: Ratio::new(2 * p * q, d),
        b_poisson: Ratio::new(1, 2 * q + 1),
        mse_poisson: Ratio::new(2 * q, 2 * q + 1),
    })
}

/// Exact `E[φ̂ₙ(λ)] = 1/(2πρₙ) Σ_{|v|<n} (1−|v|/n) C(v/ρₙ) K(bₙv) e^{-ivλ/ρₙ}`
/// inside the band, zero outside.
pub fn exact_mean_regular(
    model: &CarModel,
    lambda: f64,
    n: usize,
    rho_n: f64,
    b_n: f64,
    kernel: Kernel,
) -> f64 {
    if lambda.abs() > PI * rho_n || n == 0 {
        return 0.0;
    }
    let last = match kernel.support_radius() {
        Some(r) => ((r / b_n).floor() as usize).min(n - 1),
        None => n - 1,
    };
    let nf = n as f64;
    let mut sum = model.covariance(0.0);
    for v in 1..=last {
        let vf = v as f64;
        let k = kernel.eval(b_n * vf);
        if k == 0.0 {
            continue;
        }
        sum += 2.0 * (1.0 - vf / nf) * model.covariance(vf / rho_n) * k * (vf * lambda / rho_n).cos();
    }
    sum / (2.0 * PI * rho_n)
}

pub fn variance_regular(
    model: &CarModel,
    lambda: f64,
    n: usize,
    b_n: f64,
    kernel: Kernel,
) -> Result<f64, TheoryError> {
    TheoryEvaluator::new(model.clone()).variance_regular(lambda, n, b_n, kernel)
}

#[allow(clippy::too_many_arguments)]
pub fn bias_regular(
    model: &CarModel,
    lambda: f64,
    n: usize,
    rho_n: f64,
    b_n: f64,
    q: f64,
    p: f64,
    kernel: Kernel,
) -> Result<BiasBreakdown, TheoryError> {
    TheoryEvaluator::new(model.clone()).bias_regular(lambda, n, rho_n, b_n, q, p, kernel)
}

pub fn variance_poisson(
    model: &CarModel,
    lambda: f64,
    n: usize,
    b_n: f64,
    rho: f64,
    kernel: Kernel,
) -> Result<f64, TheoryError> {
    TheoryEvaluator::new(model.clone()).variance_poisson(lambda, n, b_n, rho, kernel)
}

pub fn bias_poisson(
    model: &CarModel,
    lambda: f64,
    b_n: f64,
    n: usize,
    q: f64,
    kernel: Kernel,
) -> Result<f64, TheoryError> {
    TheoryEvaluator::new(model.clone()).bias_poisson(lambda, b_n, n, q, kernel)
}

pub fn variance_ratio(
    model: &CarModel,
    lambda: f64,
    rho: f64,
    rate_q: f64,
    rate_r: f64,
) -> Result<f64, TheoryError> {
    TheoryEvaluator::new(model.clone()).variance_ratio(lambda, rho, rate_q, rate_r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        let z8 = zeta_tail_sum(8.0).unwrap();
        assert!((z8 - 2.0 * PI.powi(8) / 9450.0).abs() < 1e-8);
        assert!((z8 - 2.008_154_7).abs() < 1e-7);
        let z2 = zeta_tail_sum(2.0).unwrap();
        assert!((z2 - PI * PI / 3.0).abs() < 1e-8, "{z2}");
        let mut prev = f64::INFINITY;
        for p in [1.5, 2.0, 3.0, 5.0, 8.0, 16.0, 40.0] {
            let z = zeta_tail_sum(p).unwrap();
            assert!(z < prev && z > 2.0);
            prev = z;
        }
        assert!(zeta_tail_sum(1.0).is_err());
        assert!(zeta_tail_sum(0.5).is_err());
    }

    #[test]
    fn transform_of_covariance_is_spectral_density() {
        let model = CarModel::reference();
        for lambda in [0.0, 0.4, 1.0, PI / 2.0, 3.0] {
            let f0 = fourier_weighted_cov(&model, 0.0, lambda).unwrap();
            let expected = 2.0 * PI * model.spectral_density(lambda);
            assert!((f0 - expected).abs() / expected < 1e-6, "{lambda}: {f0} vs {expected}");
            assert_eq!(f0, fourier_weighted_cov(&model, 0.0, -lambda).unwrap());
        }
        let f = fourier_weighted_cov(&model, 0.0, 0.0).unwrap();
        assert!((f - 2.0 * PI * 1.0270).abs() < 1e-3);
    }

    #[test]
    fn second_moment_transform_is_positive_at_zero() {
        let model = CarModel::reference();
        assert!(fourier_weighted_cov(&model, 2.0, 0.0).unwrap() > 0.0);
        let b = bias_regular(&model, 0.0, 1000, 1.4, 0.05, 2.0, 8.0, Kernel::Hanning).unwrap();
        assert!(b.smoothing_term < 0.0);
    }

    #[test]
    fn variance_regular_shape() {
        let model = CarModel::reference();
        let v0 = variance_regular(&model, 0.0, 1000, 0.05, Kernel::Hanning).unwrap();
        let phi0 = model.spectral_density(0.0);
        assert!((v0 - 2.0 * phi0 * phi0 * 0.75 / 50.0).abs() < 1e-12);
        let v1 = variance_regular(&model, 1.0, 1000, 0.05, Kernel::Hanning).unwrap();
        let v1h = variance_regular(&model, 1.0, 1000, 0.025, Kernel::Hanning).unwrap();
        assert!((v1h / v1 - 2.0).abs() < 1e-12);
        let (rho, b) = crate::estimators::optimal_rates_regular(10_000, 8.0, 2.0, 1.0, 0.25).unwrap();
        let _ = rho;
        let v = variance_regular(&model, 1.0, 10_000, b, Kernel::Hanning).unwrap();
        let phi = model.spectral_density(1.0);
        assert!((v - phi * phi * 0.75 / (10_000.0 * b)).abs() < 1e-15);
    }

    #[test]
    fn aliasing_term_is_frequency_free() {
        let model = CarModel::reference();
        let a = bias_regular(&model, 0.2, 5000, 1.5, 0.03, 2.0, 8.0, Kernel::Hanning).unwrap();
        let b = bias_regular(&model, 1.4, 5000, 1.5, 0.03, 2.0, 8.0, Kernel::Hanning).unwrap();
        assert_eq!(a.aliasing_term, b.aliasing_term);
        assert!(a.aliasing_term > 0.0);
        assert!((a.total - (a.smoothing_term + a.truncation_term + a.aliasing_term)).abs() < 1e-18);
    }

    #[test]
    fn aliasing_term_matches_direct_fold() {
        // Σ_{l≠0} φ(λ + 2πlρ) against A/(2π)^p · 2ζ(p) · ρ^{-p}
        let model = CarModel::reference();
        let (rho, lambda) = (5.0, 1.0);
        let direct: f64 = (1..=10_000)
            .map(|l| {
                let shift = 2.0 * PI * l as f64 * rho;
                model.spectral_density(lambda + shift) + model.spectral_density(lambda - shift)
            })
            .sum();
        let b = bias_regular(&model, lambda, 1 << 20, rho, 1e-3, 2.0, 8.0, Kernel::Hanning).unwrap();
        assert!((direct / b.aliasing_term - 1.0).abs() < 0.05, "{direct} vs {}", b.aliasing_term);
    }

    #[test]
    fn poisson_variance_exceeds_regular() {
        let model = CarModel::reference();
        let lambda = PI / 2.0;
        let (n, b) = (10_000, 0.03);
        let vr = variance_regular(&model, lambda, n, b, Kernel::Hanning).unwrap();
        let vp = variance_poisson(&model, lambda, n, b, 1.0, Kernel::Hanning).unwrap();
        assert!(vp > vr);
        let v0 = variance_poisson(&model, 0.0, n, b, 1.0, Kernel::Hanning).unwrap();
        let phi0 = model.spectral_density(0.0);
        let c0 = model.covariance(0.0);
        let single = (phi0 + c0 / (2.0 * PI)).powi(2) * 0.75 / (n as f64 * b);
        assert!((v0 - 2.0 * single).abs() < 1e-15);
        // linear growth in rho once C(0)/(2πρ) is negligible
        let v1 = variance_poisson(&model, 0.3, n, b, 1e6, Kernel::Hanning).unwrap();
        let v2 = variance_poisson(&model, 0.3, n, b, 2e6, Kernel::Hanning).unwrap();
        assert!((v2 / v1 - 2.0).abs() < 1e-3);
    }

    #[test]
    fn poisson_bias_matches_regular_smoothing_term() {
        let model = CarModel::reference();
        let (lambda, b) = (0.7, 0.04);
        let bp = bias_poisson(&model, lambda, b, 1000, 2.0, Kernel::Hanning).unwrap();
        let br = bias_regular(&model, lambda, 1000, 1.0, b, 2.0, 8.0, Kernel::Hanning).unwrap();
        assert!((bp - br.smoothing_term).abs() < 1e-15);
        let small = bias_poisson(&model, lambda, 1e-4, 1000, 2.0, Kernel::Hanning).unwrap();
        assert!(small.abs() < bp.abs() * 1e-4);
    }

    #[test]
    fn poisson_bias_smaller_at_reference_config() {
        let model = CarModel::reference();
        let n = 10_000;
        let lambda = PI / 2.0;
        let (rho, b) = crate::estimators::optimal_rates_regular(n, 8.0, 2.0, 1.0, 0.25).unwrap();
        let reg = bias_regular(&model, lambda, n, rho, b, 2.0, 8.0, Kernel::Hanning).unwrap();
        let bp = crate::estimators::optimal_window_poisson(n, 2.0, 0.25);
        let poi = bias_poisson(&model, lambda, bp, n, 2.0, Kernel::Hanning).unwrap();
        assert!(poi.abs() < reg.total.abs(), "{poi} vs {}", reg.total);
    }

    #[test]
    fn variance_ratio_properties() {
        let model = CarModel::reference();
        let mut prev = 0.0;
        for lambda in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let r = variance_ratio(&model, lambda, 1.0, 1.0, 1.0).unwrap();
            assert!(r > prev);
            prev = r;
        }
        let phi = model.spectral_density(0.1);
        let c0 = model.covariance(0.0);
        let r = variance_ratio(&model, 0.1, 1.0, 1.0, 1.0).unwrap();
        assert!((r - (1.0 + c0 / (2.0 * PI * phi)).powi(2)).abs() < 1e-12);
        assert!(r > 1.0);
    }

    #[test]
    fn variance_ratio_minimum_by_search() {
        let model = CarModel::reference();
        let theory = TheoryEvaluator::new(model);
        let (lambda, q, r) = (1.0, 0.25, 0.25);
        let f = |rho: f64| theory.variance_ratio(lambda, rho, q, r).unwrap();
        // coarse grid, then golden section around the best cell
        let grid: Vec<f64> = (1..=10_000).map(|k| k as f64 * 0.01).collect();
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        let (mut lo, mut hi) = ((best - 0.01).max(1e-6), best + 0.01);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let numeric = f(0.5 * (lo + hi));
        let closed = theory.min_variance_ratio(lambda, q, r);
        assert!((numeric - closed).abs() / closed < 1e-9, "{numeric} vs {closed}");
    }

    #[test]
    fn rate_exponents() {
        let (reg, poi) = mse_rate_exponents(8.0, 2.0).unwrap();
        assert!((reg - 16.0 / 21.0).abs() < 1e-15);
        assert!((poi - 0.8).abs() < 1e-15);
        let (reg_big, _) = mse_rate_exponents(1e9, 2.0).unwrap();
        assert!((reg_big - 0.8).abs() < 1e-8);
        for p in [2.0, 4.0, 8.0, 50.0] {
            for q in [2.0, 3.0, 5.0] {
                let (r, s) = mse_rate_exponents(p, q).unwrap();
                assert!(r < s);
            }
        }
        let exact = rate_exponents_exact(8, 2).unwrap();
        assert_eq!(exact.rho, Ratio::new(1, 21));
        assert_eq!(exact.b_regular, Ratio::new(5, 21));
        assert_eq!(exact.mse_regular, Ratio::new(16, 21));
        assert_eq!(exact.b_poisson, Ratio::new(1, 5));
        assert_eq!(exact.mse_poisson, Ratio::new(4, 5));
        assert!(rate_exponents_exact(1, 2).is_err());
    }

    #[test]
    fn non_conforming_kernel_is_flagged() {
        let model = CarModel::reference();
        // Hanning has exponent 2, so asking for q = 3 leaves a nonzero second derivative
        let err = bias_poisson(&model, 1.0, 0.05, 100, 3.0, Kernel::Hanning).unwrap_err();
        assert!(matches!(err, TheoryError::NonConformingKernel { order: 2, .. }), "{err:?}");
    }

    #[test]
    fn cache_returns_identical_values() {
        let theory = TheoryEvaluator::new(CarModel::reference());
        let a = theory.fourier_weighted_cov(2.0, 0.9).unwrap();
        let b = theory.fourier_weighted_cov(2.0, -0.9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, fourier_weighted_cov(theory.model(), 2.0, 0.9).unwrap());
    }

    #[test]
    fn exact_mean_band_limit() {
        let model = CarModel::reference();
        assert_eq!(exact_mean_regular(&model, 10.0, 100, 2.0, 0.1, Kernel::Hanning), 0.0);
        let (n, rho, b) = (10_000_000, 3.0, 0.002);
        let m = exact_mean_regular(&model, 1.0, n, rho, b, Kernel::Hanning);
        let bias = bias_regular(&model, 1.0, n, rho, b, 2.0, 8.0, Kernel::Hanning).unwrap();
        let exact_bias = m - model.spectral_density(1.0);
        assert!((exact_bias / bias.total - 1.0).abs() < 0.05, "{exact_bias} vs {}", bias.total);
    }
}
