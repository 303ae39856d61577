//! Lag-window spectral estimators for regular and Poisson sampling, and the
//! rules that pick sampling rate and window width.
//!
//! Under regular sampling at rate `ρₙ` the estimator is the smoothed
//! periodogram
//!
//! ```text
//! φ̂ₙ(λ) = 1/(2πρₙ) Σ_{|v|<n} γ̂ₙ(v) K(bₙv) e^{-ivλ/ρₙ} 1[|λ| ≤ πρₙ]
//! ```
//!
//! with the biased (divisor `n`) sample autocovariance `γ̂ₙ`. Under Poisson
//! sampling at mean rate `ρ` the estimator weights every pair of samples by
//! the kernel evaluated at their time separation:
//!
//! ```text
//! ψ̂ₙ(λ) = 1/(πρn) Σ_{j<k} x_j x_k K(bₙ(t_k − t_j)) cos(λ(t_k − t_j))
//! ```
//!
//! Both sums are truncated where the kernel vanishes. No mean is subtracted
//! unless `demean` is set; the estimates may be negative.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::kernels::Kernel;
use crate::sampling::{SamplePath, Scheme, SchemeKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("path was sampled with {found:?}, estimator expects {expected:?}")]
    SchemeMismatch { expected: Scheme, found: Scheme },
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency {0} is not finite")]
    NonFiniteFrequency(f64),
    #[error("lag {lag} is out of range for {n} samples")]
    LagOutOfRange { lag: i64, n: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("the Poisson estimator needs a kernel with finite support")]
    UnboundedKernel,
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> EstimatorError {
    EstimatorError::InvalidParameter {
        name,
        value,
        reason,
    }
}

/// Non-fatal departures from the regime the asymptotic theory assumes.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigWarning {
    /// `ρₙbₙ ≥ 1`: the frequency-domain window is not narrow.
    WideWindow { rho_b: f64 },
    /// The kernel's characteristic exponent is below the assumed smoothness.
    ExponentMismatch { q: f64, kernel_exponent: f64 },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::WideWindow { rho_b } => {
                write!(f, "rho_n * b_n = {rho_b} is not small; smoothing bias will dominate")
            }
            ConfigWarning::ExponentMismatch { q, kernel_exponent } => write!(
                f,
                "kernel characteristic exponent {kernel_exponent} is below q = {q}"
            ),
        }
    }
}

/// Everything the estimators and rate rules need for one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub n: usize,
    pub rho_n: f64,
    pub b_n: f64,
    pub kernel: Kernel,
    /// Smoothness exponent of the covariance.
    pub q: f64,
    /// Decay exponent of the spectral density.
    pub p: f64,
    pub rate_p: f64,
    pub rate_q: f64,
    pub rate_r: f64,
    pub demean: bool,
}

impl EstimatorConfig {
    /// Configuration with the rate rules of the regular scheme applied.
    pub fn with_optimal_rates(
        n: usize,
        kernel: Kernel,
        p: f64,
        q: f64,
        rate_p: f64,
        rate_q: f64,
    ) -> Result<Self, EstimatorError> {
        let (rho_n, b_n) = optimal_rates_regular(n, p, q, rate_p, rate_q)?;
        Ok(Self {
            n,
            rho_n,
            b_n,
            kernel,
            q,
            p,
            rate_p,
            rate_q,
            rate_r: rate_q,
            demean: false,
        })
    }

    pub fn validate(&self) -> Result<Vec<ConfigWarning>, EstimatorError> {
        if self.n < 2 {
            return Err(EstimatorError::TooFewSamples {
                needed: 2,
                got: self.n,
            });
        }
        if !(self.rho_n.is_finite() && self.rho_n > 0.0) {
            return Err(invalid("rho_n", self.rho_n, "must be positive"));
        }
        if !(self.b_n.is_finite() && self.b_n > 0.0) {
            return Err(invalid("b_n", self.b_n, "must be positive"));
        }
        let mut warnings = Vec::new();
        let rho_b = self.rho_n * self.b_n;
        if rho_b >= 1.0 {
            warnings.push(ConfigWarning::WideWindow { rho_b });
        }
        let kernel_exponent = self.kernel.char_exponent();
        if kernel_exponent < self.q {
            warnings.push(ConfigWarning::ExponentMismatch {
                q: self.q,
                kernel_exponent,
            });
        }
        Ok(warnings)
    }
}

/// Settings of the Poisson-sampling estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonConfig {
    pub rho: f64,
    pub b_n: f64,
    pub kernel: Kernel,
    pub demean: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub scheme: Scheme,
    pub n: usize,
    pub b_n: f64,
    pub kernel: Kernel,
}

impl SpectralEstimate {
    pub fn scheme_kind(&self) -> SchemeKind {
        self.scheme.kind()
    }
}

/// `γ̂ₙ(v) = (1/n) Σ_{j=1}^{n-|v|} x_j x_{j+|v|}`.
pub fn sample_autocovariance(values: &[f64], lag: i64) -> Result<f64, EstimatorError> {
    let n = values.len();
    let v = lag.unsigned_abs() as usize;
    if v >= n {
        return Err(EstimatorError::LagOutOfRange { lag, n });
    }
    let sum: f64 = values[..n - v]
        .iter()
        .zip(&values[v..])
        .map(|(a, b)| a * b)
        .sum();
    Ok(sum / n as f64)
}

/// `γ̂ₙ(0..=max_lag)`.
pub fn autocovariances(values: &[f64], max_lag: usize) -> Result<Vec<f64>, EstimatorError> {
    if max_lag >= values.len() {
        return Err(EstimatorError::LagOutOfRange {
            lag: max_lag as i64,
            n: values.len(),
        });
    }
    (0..=max_lag)
        .map(|v| sample_autocovariance(values, v as i64))
        .collect()
}

fn centered(values: &[f64], demean: bool) -> Vec<f64> {
    if !demean {
        return values.to_vec();
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|x| x - mean).collect()
}

fn check_lambdas(lambdas: &[f64]) -> Result<(), EstimatorError> {
    if lambdas.is_empty() {
        return Err(EstimatorError::EmptyGrid);
    }
    if let Some(&bad) = lambdas.iter().find(|l| !l.is_finite()) {
        return Err(EstimatorError::NonFiniteFrequency(bad));
    }
    Ok(())
}

fn expect_regular(path: &SamplePath, rho: f64) -> Result<(), EstimatorError> {
    match path.scheme {
        Scheme::Regular { rho: r } if r == rho => Ok(()),
        found => Err(EstimatorError::SchemeMismatch {
            expected: Scheme::Regular { rho },
            found,
        }),
    }
}

/// Largest lag with a possibly nonzero kernel weight.
fn max_lag(n: usize, b_n: f64, kernel: Kernel) -> usize {
    match kernel.support_radius() {
        Some(r) => {
            let m = (r / b_n).floor();
            if m >= (n - 1) as f64 {
                n - 1
            } else {
                m as usize
            }
        }
        None => n - 1,
    }
}

/// `φ̂ₙ` on a frequency grid, in the cosine form of the lag-window sum.
pub fn regular_smoothed_periodogram(
    path: &SamplePath,
    config: &EstimatorConfig,
    lambdas: &[f64],
) -> Result<SpectralEstimate, EstimatorError> {
    expect_regular(path, config.rho_n)?;
    check_lambdas(lambdas)?;
    config.validate()?;
    let n = path.len();
    if n < 2 {
        return Err(EstimatorError::TooFewSamples { needed: 2, got: n });
    }
    let x = centered(&path.values, config.demean);
    let m = max_lag(n, config.b_n, config.kernel);
    let gamma = autocovariances(&x, m)?;
    let weighted: Vec<f64> = gamma
        .iter()
        .enumerate()
        .map(|(v, g)| g * config.kernel.eval(config.b_n * v as f64))
        .collect();

    let rho = config.rho_n;
    let band = PI * rho;
    let norm = 1.0 / (2.0 * PI * rho);
    let values = lambdas
        .iter()
        .map(|&lambda| {
            // closed interval: the band edges are kept
            if lambda.abs() > band {
                return 0.0;
            }
            let w = lambda / rho;
            let tail: f64 = weighted[1..]
                .iter()
                .enumerate()
                .map(|(k, g)| g * ((k + 1) as f64 * w).cos())
                .sum();
            norm * (weighted[0] + 2.0 * tail)
        })
        .collect();

    Ok(SpectralEstimate {
        lambdas: lambdas.to_vec(),
        values,
        scheme: path.scheme,
        n,
        b_n: config.b_n,
        kernel: config.kernel,
    })
}

/// Raw periodogram `Iₙ(λ) = |Σ x_t e^{-itλ/ρₙ}|²/(2πnρₙ)` inside the band.
pub fn periodogram(
    path: &SamplePath,
    config: &EstimatorConfig,
    lambda: f64,
) -> Result<f64, EstimatorError> {
    expect_regular(path, config.rho_n)?;
    check_lambdas(&[lambda])?;
    let n = path.len();
    if n == 0 {
        return Err(EstimatorError::TooFewSamples { needed: 1, got: 0 });
    }
    let rho = config.rho_n;
    if lambda.abs() > PI * rho {
        return Ok(0.0);
    }
    let x = centered(&path.values, config.demean);
    let w = lambda / rho;
    let (mut re, mut im) = (0.0, 0.0);
    for (t, xt) in x.iter().enumerate() {
        let phase = (t + 1) as f64 * w;
        re += xt * phase.cos();
        im -= xt * phase.sin();
    }
    Ok((re * re + im * im) / (2.0 * PI * n as f64 * rho))
}

/// `ψ̂ₙ` on a frequency grid. Pairs further apart than the kernel support
/// are skipped; times are increasing so the inner scan stops at the first one.
pub fn poisson_smoothed_estimator(
    path: &SamplePath,
    config: &PoissonConfig,
    lambdas: &[f64],
) -> Result<SpectralEstimate, EstimatorError> {
    match path.scheme {
        Scheme::Poisson { rho } if rho == config.rho => {}
        found => {
            return Err(EstimatorError::SchemeMismatch {
                expected: Scheme::Poisson { rho: config.rho },
                found,
            })
        }
    }
    check_lambdas(lambdas)?;
    if !(config.b_n.is_finite() && config.b_n > 0.0) {
        return Err(invalid("b_n", config.b_n, "must be positive"));
    }
    let radius = config
        .kernel
        .support_radius()
        .ok_or(EstimatorError::UnboundedKernel)?;
    let n = path.len();
    if n < 2 {
        return Err(EstimatorError::TooFewSamples { needed: 2, got: n });
    }
    let x = centered(&path.values, config.demean);
    let t = &path.times;
    let max_gap = radius / config.b_n;

    let mut gaps = Vec::new();
    let mut weights = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            let gap = t[k] - t[j];
            if gap > max_gap {
                break;
            }
            gaps.push(gap);
            weights.push(x[j] * x[k] * config.kernel.eval(config.b_n * gap));
        }
    }

    let norm = 1.0 / (PI * config.rho * n as f64);
    let values = lambdas
        .iter()
        .map(|&lambda| {
            let s: f64 = gaps
                .iter()
                .zip(&weights)
                .map(|(g, w)| w * (lambda * g).cos())
                .sum();
            norm * s
        })
        .collect();

    Ok(SpectralEstimate {
        lambdas: lambdas.to_vec(),
        values,
        scheme: path.scheme,
        n,
        b_n: config.b_n,
        kernel: config.kernel,
    })
}

/// MSE-optimal `ρₙ = P n^{q/(p+q+2pq)}` and `bₙ = Q n^{-(p+q)/(p+q+2pq)}`.
pub fn optimal_rates_regular(
    n: usize,
    p: f64,
    q: f64,
    rate_p: f64,
    rate_q: f64,
) -> Result<(f64, f64), EstimatorError> {
    if !(p.is_finite() && p > 1.0) {
        return Err(invalid("p", p, "must exceed 1"));
    }
    if !(q.is_finite() && q > 1.0) {
        return Err(invalid("q", q, "must exceed 1"));
    }
    if !(rate_p.is_finite() && rate_p > 0.0) {
        return Err(invalid("P", rate_p, "must be positive"));
    }
    if !(rate_q.is_finite() && rate_q > 0.0) {
        return Err(invalid("Q", rate_q, "must be positive"));
    }
    let d = p + q + 2.0 * p * q;
    let n = n as f64;
    Ok((rate_p * n.powf(q / d), rate_q * n.powf(-(p + q) / d)))
}

/// Window width balancing smoothing bias against variance for a given rate:
/// `bₙ = (n ρ^{2q})^{-1/(2q+1)}`.
pub fn optimal_window_given_rate(n: usize, rho: f64, q: f64) -> f64 {
    optimal_window_given_rate_scaled(n, rho, q, 1.0)
}

pub fn optimal_window_given_rate_scaled(n: usize, rho: f64, q: f64, scale: f64) -> f64 {
    scale * (n as f64 * rho.powf(2.0 * q)).powf(-1.0 / (2.0 * q + 1.0))
}

/// Poisson window rule `bₙ = R n^{-1/(2⌊q⌋+1)}`.
pub fn optimal_window_poisson(n: usize, q: f64, rate_r: f64) -> f64 {
    let qi = q.floor().max(1.0);
    rate_r * (n as f64).powf(-1.0 / (2.0 * qi + 1.0))
}
