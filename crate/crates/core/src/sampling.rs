//! Sampling grids and exact simulation of Gaussian CAR paths.
//!
//! The impulse response is a sum of exponentials, so the process is a linear
//! combination `X = σ Σ cᵢ Yᵢ` of Ornstein–Uhlenbeck components driven by the
//! same Wiener process, `Yᵢ(t) = ∫₀^t e^{-αᵢ(t-s)} dW(s)`. Over a gap `Δ` the
//! state advances exactly as `Yᵢ ← e^{-αᵢΔ} Yᵢ + εᵢ` with a jointly Gaussian
//! innovation of covariance `(1 − e^{-(αᵢ+αⱼ)Δ})/(αᵢ+αⱼ)`.
//!
//! Paths start from the zero state at time 0 and are only observed after the
//! burn-in time `t₀` at which `Var(X₀(t) − X(t)) < 1e-9`. Reported times are
//! re-zeroed at `t₀`.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

use crate::process_models::{CarModel, ModelError};

/// Variance tolerance that defines the burn-in time.
pub const BURN_IN_TOLERANCE: f64 = 1e-9;

/// Relative jitter (times the trace) allowed when a gap covariance is not
/// numerically positive semidefinite.
pub const PSD_JITTER: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample count must be at least 1")]
    EmptyGrid,
    #[error("sampling rate {0} must be finite and strictly positive")]
    InvalidRate(f64),
    #[error("sampling times must be strictly increasing (index {index}: {prev} then {next})")]
    NotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("sampling times must be positive and finite (first time {0})")]
    NonPositiveTime(f64),
    #[error("gap covariance for delta = {delta} is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NotPsd { delta: f64, min_eigenvalue: f64 },
    #[error("gap must be strictly positive, got {0}")]
    InvalidGap(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("path file {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("path file {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// How a path was sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// `tⱼ = j/ρ`, `j = 1..n`.
    Regular { rho: f64 },
    /// Homogeneous Poisson process with mean rate `ρ`.
    Poisson { rho: f64 },
}

impl Scheme {
    pub fn rho(&self) -> f64 {
        match *self {
            Scheme::Regular { rho } | Scheme::Poisson { rho } => rho,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Scheme::Regular { .. } => SchemeKind::Regular,
            Scheme::Poisson { .. } => SchemeKind::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Regular,
    Poisson,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Regular => "regular",
            SchemeKind::Poisson => "poisson",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            SchemeKind::Regular => 1,
            SchemeKind::Poisson => 2,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regular" => Ok(SchemeKind::Regular),
            "poisson" => Ok(SchemeKind::Poisson),
            other => Err(format!("unknown scheme '{other}' (expected regular or poisson)")),
        }
    }
}

/// Reproducibility token: the pair fully determines every random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimSeed {
    pub master_seed: u64,
    pub replication_index: u64,
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Times = 0x7469_6d65,
    Noise = 0x6e6f_6973,
}

impl SimSeed {
    pub fn new(master_seed: u64, replication_index: u64) -> Self {
        Self {
            master_seed,
            replication_index,
        }
    }

    // Independent ChaCha stream per replication: no sequential generation needed.
    fn rng(&self, purpose: Purpose) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(mix_words(&[self.master_seed, purpose as u64]));
        rng.set_stream(self.replication_index);
        rng
    }
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &w| mix64(acc ^ mix64(w)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub scheme: Scheme,
    pub seed: SimSeed,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes the `t,x` dump with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,x")?;
        for (t, x) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t:.16e},{x:.16e}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), SimError> {
        let io_err = |source| SimError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut out = io::BufWriter::new(file);
        self.write_csv(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)
    }
}

/// Reads a `t,x` dump back into `(times, values)`.
pub fn read_path_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| SimError::Io {
        path: name.clone(),
        source,
    })?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| SimError::Io {
            path: name.clone(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (idx == 0 && line == "t,x") {
            continue;
        }
        let parse_err = |message: String| SimError::Parse {
            path: name.clone(),
            line: idx + 1,
            message,
        };
        let (t, x) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected two comma separated columns".into()))?;
        times.push(t.trim().parse().map_err(|e| parse_err(format!("{e}")))?);
        values.push(x.trim().parse().map_err(|e| parse_err(format!("{e}")))?);
    }
    Ok((times, values))
}

pub fn regular_grid(n: usize, rho: f64) -> Result<Vec<f64>, SimError> {
    check_count_rate(n, rho)?;
    Ok((1..=n).map(|j| j as f64 / rho).collect())
}

/// Cumulative sums of i.i.d. Exponential(ρ) gaps.
pub fn poisson_times(n: usize, rho: f64, seed: SimSeed) -> Result<Vec<f64>, SimError> {
    check_count_rate(n, rho)?;
    let exp = Exp::new(rho).map_err(|_| SimError::InvalidRate(rho))?;
    let mut rng = seed.rng(Purpose::Times);
    let mut t = 0.0;
    let mut times = Vec::with_capacity(n);
    while times.len() < n {
        let gap: f64 = exp.sample(&mut rng);
        // a zero draw would break strict monotonicity; it has probability 2^-53-ish
        if gap <= 0.0 {
            continue;
        }
        t += gap;
        times.push(t);
    }
    Ok(times)
}

fn check_count_rate(n: usize, rho: f64) -> Result<(), SimError> {
    if n == 0 {
        return Err(SimError::EmptyGrid);
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(SimError::InvalidRate(rho));
    }
    Ok(())
}

/// Innovation law over one gap: decay factors and a lower-triangular factor
/// `L` with `LLᵀ = Cov(ε)`, stored row-major.
#[derive(Debug, Clone)]
pub struct GapNoise {
    pub delta: f64,
    pub decay: Vec<f64>,
    factor: Vec<f64>,
    dim: usize,
}

impl GapNoise {
    pub fn new(alphas: &[f64], delta: f64) -> Result<Self, SimError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(SimError::InvalidGap(delta));
        }
        let p = alphas.len();
        let cov = gap_covariance(alphas, delta);
        let factor = factor_psd(&cov, delta)?;
        Ok(Self {
            delta,
            decay: alphas.iter().map(|a| (-a * delta).exp()).collect(),
            factor,
            dim: p,
        })
    }

    /// One draw of the innovation vector.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let p = self.dim;
        let mut buf = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if p <= buf.len() {
            &mut buf[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for (i, o) in out.iter_mut().enumerate().take(p) {
            let row = &self.factor[i * p..i * p + p];
            *o = row[..=i].iter().zip(&z[..=i]).map(|(l, z)| l * z).sum();
        }
    }

    /// Reconstructs `L Lᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let l = DMatrix::from_row_slice(self.dim, self.dim, &self.factor);
        &l * l.transpose()
    }
}

/// `Cov(εᵢ, εⱼ) = (1 − e^{-(αᵢ+αⱼ)Δ})/(αᵢ+αⱼ)`.
pub fn gap_covariance(alphas: &[f64], delta: f64) -> DMatrix<f64> {
    let p = alphas.len();
    DMatrix::from_fn(p, p, |i, j| {
        let s = alphas[i] + alphas[j];
        -(-s * delta).exp_m1() / s
    })
}

fn factor_psd(cov: &DMatrix<f64>, delta: f64) -> Result<Vec<f64>, SimError> {
    let p = cov.nrows();
    if let Some(chol) = cov.clone().cholesky() {
        let l = chol.l();
        return Ok(row_major(&l));
    }
    // Nearly singular for small gaps: factor through the eigenbasis and clip
    // eigenvalues that are negative only by rounding.
    let trace = cov.trace();
    let eig = SymmetricEigen::new(cov.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue < -PSD_JITTER * trace {
        return Err(SimError::NotPsd {
            delta,
            min_eigenvalue,
        });
    }
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let mut b = eig.eigenvectors.clone();
    for (j, s) in sqrt_vals.iter().enumerate() {
        b.column_mut(j).scale_mut(*s);
    }
    // B Bᵀ = cov; a QR of Bᵀ turns B into a lower-triangular factor
    let qr = b.transpose().qr();
    let r = qr.r();
    let mut l = r.transpose();
    for j in 0..p {
        if l[(j, j)] < 0.0 {
            l.column_mut(j).neg_mut();
        }
    }
    Ok(row_major(&l))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            out.push(if j <= i { m[(i, j)] } else { 0.0 });
        }
    }
    out
}

// Δ rounded to 15 significant digits.
fn gap_key(delta: f64) -> (i64, i32) {
    let exp = delta.log10().floor() as i32;
    let mantissa = (delta * 10f64.powi(14 - exp)).round() as i64;
    (mantissa, exp)
}

/// Draws one innovation vector for gap `delta` (uncached).
pub fn cholesky_gap_noise<R: Rng + ?Sized>(
    model: &CarModel,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SimError> {
    let noise = GapNoise::new(model.alphas(), delta)?;
    let mut out = vec![0.0; model.order()];
    noise.draw(rng, &mut out);
    Ok(out)
}

/// Exact simulator bound to a model; holds the burn-in time.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    model: CarModel,
    burn_in: f64,
}

impl PathSimulator {
    pub fn new(model: CarModel) -> Result<Self, SimError> {
        let burn_in = model.burn_in_time(BURN_IN_TOLERANCE)?;
        Ok(Self { model, burn_in })
    }

    pub fn model(&self) -> &CarModel {
        &self.model
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in
    }

    /// Simulates `X` at `burn_in + times[j]` and reports it at `times[j]`.
    pub fn simulate(
        &self,
        times: &[f64],
        scheme: Scheme,
        seed: SimSeed,
    ) -> Result<SamplePath, SimError> {
        validate_times(times)?;
        let alphas = self.model.alphas();
        let c = &self.model.coeffs().c;
        let sigma = self.model.sigma();
        let p = alphas.len();

        let mut cache: HashMap<(i64, i32), GapNoise> = HashMap::new();
        let mut rng = seed.rng(Purpose::Noise);
        let mut state = vec![0.0; p];
        let mut eps = vec![0.0; p];
        let mut values = Vec::with_capacity(times.len());
        let mut prev = -self.burn_in;

        for &t in times {
            let delta = t - prev;
            prev = t;
            let key = gap_key(delta);
            let noise = match cache.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(GapNoise::new(alphas, delta)?)
                }
            };
            noise.draw(&mut rng, &mut eps);
            for i in 0..p {
                state[i] = noise.decay[i] * state[i] + eps[i];
            }
            let x: f64 = c.iter().zip(&state).map(|(c, y)| c * y).sum();
            values.push(sigma * x);
        }

        Ok(SamplePath {
            times: times.to_vec(),
            values,
            scheme,
            seed,
        })
    }

    pub fn regular(&self, n: usize, rho: f64, seed: SimSeed) -> Result<SamplePath, SimError> {
        let times = regular_grid(n, rho)?;
        self.simulate(&times, Scheme::Regular { rho }, seed)
    }

    pub fn poisson(&self, n: usize, rho: f64, seed: SimSeed) -> Result<SamplePath, SimError> {
        let times = poisson_times(n, rho, seed)?;
        self.simulate(&times, Scheme::Poisson { rho }, seed)
    }
}

/// One-shot simulation; see [`PathSimulator`] to reuse the burn-in computation.
pub fn simulate_path(
    model: &CarModel,
    times: &[f64],
    scheme: Scheme,
    seed: SimSeed,
) -> Result<SamplePath, SimError> {
    PathSimulator::new(model.clone())?.simulate(times, scheme, seed)
}

fn validate_times(times: &[f64]) -> Result<(), SimError> {
    let first = *times.first().ok_or(SimError::EmptyGrid)?;
    if !(first.is_finite() && first > 0.0) {
        return Err(SimError::NonPositiveTime(first));
    }
    for (index, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(SimError::NotIncreasing {
                index: index + 1,
                prev: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}
