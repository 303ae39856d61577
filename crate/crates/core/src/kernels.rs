//! Lag-window kernels.
//!
//! All built-in kernels are even, equal to one at the origin, bounded by one
//! and supported on `[-1, 1]`. Each one also provides an accurate `1 − K(x)`
//! so that the characteristic constant can be extracted near the origin
//! without cancellation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::quadrature::{integrate, integrate_to_infinity, QuadratureError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("unknown kernel '{0}' (expected hanning, rect or parzen)")]
    Unknown(String),
    #[error("characteristic exponent q = {0} must be positive")]
    InvalidExponent(f64),
    #[error("(1 - K(x))/|x|^{q} diverges as x -> 0; the kernel's exponent is below q")]
    Divergent { q: f64 },
    #[error("(1 - K(x))/|x|^{q} does not settle along the dyadic sequence (last values {a}, {b})")]
    NonConvergent { q: f64, a: f64, b: f64 },
    #[error("kernel L2 norm: {0}")]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    /// `½(1 + cos πx)` on `[-1, 1]`.
    Hanning,
    /// Indicator of `[-1, 1]`.
    Rectangular,
    /// Parzen's cubic window on `[-1, 1]`.
    Parzen,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Hanning => "hanning",
            Kernel::Rectangular => "rect",
            Kernel::Parzen => "parzen",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            Kernel::Hanning => hanning(x),
            Kernel::Rectangular => {
                if ax <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Parzen => {
                if ax <= 0.5 {
                    1.0 - 6.0 * ax * ax + 6.0 * ax * ax * ax
                } else if ax <= 1.0 {
                    2.0 * (1.0 - ax).powi(3)
                } else {
                    0.0
                }
            }
        }
    }

    /// `1 − K(x)` evaluated without cancellation near the origin.
    pub fn one_minus(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            Kernel::Hanning => {
                if ax <= 1.0 {
                    (0.5 * PI * ax).sin().powi(2)
                } else {
                    1.0
                }
            }
            Kernel::Rectangular => 1.0 - self.eval(x),
            Kernel::Parzen => {
                if ax <= 0.5 {
                    6.0 * ax * ax * (1.0 - ax)
                } else {
                    1.0 - self.eval(x)
                }
            }
        }
    }

    /// All built-in kernels vanish outside `[-1, 1]`.
    pub fn support_radius(self) -> Option<f64> {
        Some(1.0)
    }

    /// Claimed characteristic exponent.
    pub fn char_exponent(self) -> f64 {
        match self {
            Kernel::Hanning | Kernel::Parzen => 2.0,
            Kernel::Rectangular => f64::INFINITY,
        }
    }

    pub fn l2_norm_sq(self) -> Result<f64, KernelError> {
        l2_norm_sq(|x| self.eval(x), self.support_radius())
    }

    pub fn characteristic_constant(self, q: f64) -> Result<f64, KernelError> {
        characteristic_constant(|x| self.one_minus(x), q)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hanning" | "hann" => Ok(Kernel::Hanning),
            "rect" | "rectangular" => Ok(Kernel::Rectangular),
            "parzen" => Ok(Kernel::Parzen),
            other => Err(KernelError::Unknown(other.to_string())),
        }
    }
}

pub fn hanning(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.5 * (1.0 + (PI * x).cos())
    } else {
        0.0
    }
}

/// `∫ K(x)² dx`, over `[-r, r]` for finite support or the real line otherwise.
pub fn l2_norm_sq<F: Fn(f64) -> f64>(kernel: F, support: Option<f64>) -> Result<f64, KernelError> {
    let tol = Tolerance::abs(1e-11);
    let sq = |x: f64| {
        let k = kernel(x);
        k * k
    };
    let value = match support {
        Some(r) => {
            integrate(&sq, -r, 0.0, tol)?.value + integrate(&sq, 0.0, r, tol)?.value
        }
        None => {
            integrate_to_infinity(&sq, 0.0, tol)?.value
                + integrate_to_infinity(|x| sq(-x), 0.0, tol)?.value
        }
    };
    Ok(value)
}

/// `k_q = lim_{x→0} (1 − K(x))/|x|^q`, taken along `x = 2^{-m}`, `m = 8..20`.
///
/// Returns `0` when the ratio vanishes (kernel exponent above `q`) and an
/// error when it blows up (exponent below `q`) or fails to settle.
pub fn characteristic_constant<F: Fn(f64) -> f64>(one_minus: F, q: f64) -> Result<f64, KernelError> {
    if !(q.is_finite() && q > 0.0) {
        return Err(KernelError::InvalidExponent(q));
    }
    let seq: Vec<f64> = (8..=20)
        .map(|m| {
            let x = 2f64.powi(-m);
            one_minus(x) / x.powf(q)
        })
        .collect();
    let scale = seq.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let last = seq[seq.len() - 1];
    let first = seq[0];
    // pure growth by 2^{r} per halving means the true exponent is q - r < q
    if last.abs() > 16.0 * first.abs() {
        return Err(KernelError::Divergent { q });
    }
    // geometric decay to zero: the kernel's exponent exceeds q
    if last.abs() <= 1e-3 * first.abs() {
        return Ok(0.0);
    }

    // Aitken Δ² on consecutive triples; early triples sit well above rounding.
    let aitken: Vec<f64> = seq
        .windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            let denom = d2 - d1;
            if denom == 0.0 || d1 == 0.0 {
                w[2]
            } else {
                w[2] - d2 * d2 / denom
            }
        })
        .collect();
    let a = aitken[2];
    let b = aitken[3];
    let limit = b;
    if limit.abs() <= 1e-9 * scale {
        return Ok(0.0);
    }
    if (a - b).abs() > 1e-9 * limit.abs() + 1e-12 {
        return Err(KernelError::NonConvergent { q, a, b });
    }
    Ok(limit)
}
