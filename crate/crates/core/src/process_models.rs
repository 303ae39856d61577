//! Continuous-time autoregressive CAR(p) models with an exponential-mixture
//! impulse response.
//!
//! A model is the stationary process `X(t) = σ ∫_{-∞}^t h(t-s) dW(s)` with
//! `h(t) = Σ cᵢ e^{-αᵢ t}` for `t ≥ 0`, where the coefficients are fixed by
//! `h(0) = h'(0) = … = h^{(p-2)}(0) = 0` and `h^{(p-1)}(0) = 1`. Its spectral
//! density is the rational function `σ²/(2π ∏(λ² + αᵢ²))`.
//!
//! Covariance and tail variance use the closed forms obtained by integrating
//! products of exponentials; the quadrature oracles in the tests check them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("a CAR model needs at least one decay rate")]
    Empty,
    #[error("decay rate alpha[{index}] = {value} must be finite and strictly positive")]
    NonPositiveRate { index: usize, value: f64 },
    #[error("decay rates alpha[{0}] and alpha[{1}] coincide; repeated roots are not supported")]
    DuplicateRates(usize, usize),
    #[error("noise scale sigma = {0} must be finite and strictly positive")]
    NonPositiveSigma(f64),
    #[error("the impulse moment system is singular")]
    SingularSystem,
    #[error("burn-in tolerance {tol} must lie in (0, C(0) = {c0})")]
    InvalidTolerance { tol: f64, c0: f64 },
    #[error("decay exponent {requested} exceeds the model's spectral decay 2p = {decay}; the tail limit is infinite")]
    TailLimitInfinite { requested: f64, decay: f64 },
}

/// Continuous-time AR(p) model with distinct decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CarModel {
    alphas: Vec<f64>,
    sigma: f64,
    coeffs: ImpulseCoeffs,
}

/// Coefficients `cᵢ` of the impulse response, in the order of the rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseCoeffs {
    pub c: Vec<f64>,
}

impl CarModel {
    pub fn new(alphas: Vec<f64>, sigma: f64) -> Result<Self, ModelError> {
        if alphas.is_empty() {
            return Err(ModelError::Empty);
        }
        for (index, &value) in alphas.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::NonPositiveRate { index, value });
            }
        }
        for i in 0..alphas.len() {
            for j in (i + 1)..alphas.len() {
                if alphas[i] == alphas[j] {
                    return Err(ModelError::DuplicateRates(i, j));
                }
            }
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ModelError::NonPositiveSigma(sigma));
        }
        let coeffs = solve_impulse_coeffs(&alphas)?;
        Ok(Self {
            alphas,
            sigma,
            coeffs,
        })
    }

    /// The AR(4) model used throughout the simulation study:
    /// rates 0.65, 0.75, 0.85, 0.95 and unit noise scale.
    pub fn reference() -> Self {
        Self::new(vec![0.65, 0.75, 0.85, 0.95], 1.0).expect("reference model is valid")
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn order(&self) -> usize {
        self.alphas.len()
    }

    pub fn coeffs(&self) -> &ImpulseCoeffs {
        &self.coeffs
    }

    /// `h(t)`, zero for negative times.
    pub fn impulse_response(&self, t: f64) -> f64 {
        impulse_response(&self.alphas, &self.coeffs, t)
    }

    /// Autocovariance `C(τ) = σ² ∫₀^∞ h(s) h(s+|τ|) ds`.
    pub fn covariance(&self, tau: f64) -> f64 {
        let tau = tau.abs();
        let c = &self.coeffs.c;
        let a = &self.alphas;
        let mut acc = 0.0;
        for j in 0..a.len() {
            let decay = (-a[j] * tau).exp();
            let mut inner = 0.0;
            for i in 0..a.len() {
                inner += c[i] / (a[i] + a[j]);
            }
            acc += c[j] * decay * inner;
        }
        self.sigma * self.sigma * acc
    }

    /// Spectral density `φ(λ)` in power per rad/time.
    pub fn spectral_density(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        let denom: f64 = self.alphas.iter().map(|a| l2 + a * a).product();
        self.sigma * self.sigma / (2.0 * PI * denom)
    }

    /// `Var(X₀(t) − X(t)) = σ² ∫_t^∞ h(s)² ds`, the variance still missing
    /// from a path started at zero once it has run for time `t`.
    pub fn tail_variance(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let c = &self.coeffs.c;
        let a = &self.alphas;
        let mut acc = 0.0;
        for i in 0..a.len() {
            for j in 0..a.len() {
                let s = a[i] + a[j];
                acc += c[i] * c[j] * (-s * t).exp() / s;
            }
        }
        // the closed form loses about log10(max|c|²) digits at t = 0
        (self.sigma * self.sigma * acc).max(0.0)
    }

    /// Smallest time (within `1e-3`) after which the tail variance drops below `tol`.
    pub fn burn_in_time(&self, tol: f64) -> Result<f64, ModelError> {
        let c0 = self.tail_variance(0.0);
        if !(tol > 0.0 && tol < c0) {
            return Err(ModelError::InvalidTolerance { tol, c0 });
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.tail_variance(hi) >= tol {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if self.tail_variance(mid) < tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Spectral decay exponent `2p` and the constant `A = lim λ^{2p} φ(λ) = σ²/2π`.
    pub fn tail_decay_constant(&self) -> (f64, f64) {
        (
            2.0 * self.order() as f64,
            self.sigma * self.sigma / (2.0 * PI),
        )
    }

    /// `lim_{λ→∞} λ^p φ(λ)` for an arbitrary exponent `p`.
    pub fn tail_limit(&self, p: f64) -> Result<f64, ModelError> {
        let (decay, a) = self.tail_decay_constant();
        if p == decay {
            Ok(a)
        } else if p < decay {
            Ok(0.0)
        } else {
            Err(ModelError::TailLimitInfinite {
                requested: p,
                decay,
            })
        }
    }
}

/// Solves `Σ cᵢ (−αᵢ)^k = δ_{k,p−1}` for `k = 0..p−1` by LU on the moment matrix.
pub fn solve_impulse_coeffs(alphas: &[f64]) -> Result<ImpulseCoeffs, ModelError> {
    let p = alphas.len();
    if p == 0 {
        return Err(ModelError::Empty);
    }
    let moments = DMatrix::from_fn(p, p, |k, i| (-alphas[i]).powi(k as i32));
    let mut rhs = DVector::zeros(p);
    rhs[p - 1] = 1.0;
    let lu = moments.clone().full_piv_lu();
    let mut sol = lu.solve(&rhs).ok_or(ModelError::SingularSystem)?;
    // one step of iterative refinement; the system is a Vandermonde matrix
    let residual = &rhs - &moments * &sol;
    if let Some(correction) = lu.solve(&residual) {
        sol += correction;
    }
    if sol.iter().any(|c| !c.is_finite()) {
        return Err(ModelError::SingularSystem);
    }
    Ok(ImpulseCoeffs {
        c: sol.iter().copied().collect(),
    })
}

pub fn impulse_response(alphas: &[f64], coeffs: &ImpulseCoeffs, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    alphas
        .iter()
        .zip(&coeffs.c)
        .map(|(a, c)| c * (-a * t).exp())
        .sum()
}
