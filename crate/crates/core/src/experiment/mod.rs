//! Monte Carlo driver: simulate replications for each scheme and sample size,
//! estimate on a frequency grid, and aggregate against the asymptotic curves.

use std::f64::consts::PI;
use std::io;
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::asymptotics::{TheoryError, TheoryEvaluator};
use crate::estimators::{
    optimal_rates_regular, optimal_window_poisson, poisson_smoothed_estimator,
    regular_smoothed_periodogram, EstimatorConfig, EstimatorError, PoissonConfig,
};
use crate::kernels::Kernel;
use crate::process_models::CarModel;
use crate::sampling::{mix_words, PathSimulator, SchemeKind, SimError, SimSeed};

pub mod config;
pub mod csv;
pub mod figures;
pub mod svg;

pub use self::config::KeyValues;
pub use self::csv::{parse_csv, read_csv, write_csv, write_csv_to};
pub use self::figures::{figure_config, reproduce_figure, Figure, FigureOutput, Scale};
pub use self::svg::{emit_svg_figure, emit_svg_plot, render_svg, Panel};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{scheme} n={n} replication {rep}: {source}")]
    Simulation {
        scheme: SchemeKind,
        n: usize,
        rep: u64,
        source: SimError,
    },
    #[error("{scheme} n={n} replication {rep}: {source}")]
    Estimation {
        scheme: SchemeKind,
        n: usize,
        rep: u64,
        source: EstimatorError,
    },
    #[error("{scheme} n={n} theory: {source}")]
    Theory {
        scheme: SchemeKind,
        n: usize,
        source: TheoryError,
    },
    #[error("{scheme} n={n} lambda={lambda}: {field} is not finite")]
    NonFinite {
        scheme: SchemeKind,
        n: usize,
        lambda: f64,
        field: &'static str,
    },
    #[error("no statistics to write")]
    EmptyStats,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Parse { .. } => 2,
            HarnessError::Simulation { .. }
            | HarnessError::Estimation { .. }
            | HarnessError::Theory { .. }
            | HarnessError::NonFinite { .. } => 3,
            HarnessError::EmptyStats | HarnessError::Io { .. } => 1,
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// `steps` equispaced points from `min` to `max` inclusive.
    Uniform { min: f64, max: f64, steps: usize },
    Explicit(Vec<f64>),
}

impl LambdaGrid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            LambdaGrid::Uniform { min, max, steps } => match *steps {
                0 => Vec::new(),
                1 => vec![*min],
                s => (0..s)
                    .map(|i| {
                        if i == s - 1 {
                            *max
                        } else {
                            min + (max - min) * i as f64 / (s - 1) as f64
                        }
                    })
                    .collect(),
            },
            LambdaGrid::Explicit(v) => v.clone(),
        }
    }

    /// The grid with `extra` merged in, sorted and without duplicates.
    pub fn with_points(&self, extra: &[f64]) -> LambdaGrid {
        let mut pts = self.points();
        pts.extend_from_slice(extra);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        LambdaGrid::Explicit(pts)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let pts = self.points();
        if pts.is_empty() {
            return Err(config_err("lambda grid is empty"));
        }
        if let LambdaGrid::Uniform { min, max, .. } = self {
            if min > max {
                return Err(config_err(format!("lambda_min {min} exceeds lambda_max {max}")));
            }
        }
        if let Some(bad) = pts.iter().find(|l| !l.is_finite()) {
            return Err(config_err(format!("lambda grid contains {bad}")));
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("lambda grid must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: CarModel,
    pub schemes: Vec<SchemeKind>,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub lambda_grid: LambdaGrid,
    pub seed: u64,
    pub p: f64,
    pub q: f64,
    pub rate_p: f64,
    pub rate_q: f64,
    pub rate_r: f64,
    pub poisson_rho: f64,
    pub kernel: Kernel,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: CarModel::reference(),
            schemes: vec![SchemeKind::Regular],
            n_values: vec![100, 1000, 10_000],
            replications: 500,
            lambda_grid: LambdaGrid::Uniform {
                min: 0.0,
                max: PI / 2.0,
                steps: 65,
            },
            seed: 0,
            p: 8.0,
            q: 2.0,
            rate_p: 1.0,
            rate_q: 0.25,
            rate_r: 0.25,
            poisson_rho: 1.0,
            kernel: Kernel::Hanning,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications < 2 {
            return Err(config_err(format!(
                "replications = {} (at least 2 are needed for a variance)",
                self.replications
            )));
        }
        if self.schemes.is_empty() {
            return Err(config_err("no sampling scheme selected"));
        }
        if self.n_values.is_empty() {
            return Err(config_err("no sample sizes given"));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(config_err(format!("sample size {n} is below 2")));
        }
        for (name, v) in [
            ("p", self.p),
            ("q", self.q),
            ("P", self.rate_p),
            ("Q", self.rate_q),
            ("R", self.rate_r),
            ("poisson_rho", self.poisson_rho),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!("{name} = {v} must be positive")));
            }
        }
        if self.p <= 1.0 || self.q <= 1.0 {
            return Err(config_err("p and q must exceed 1"));
        }
        self.lambda_grid.validate()?;
        if self.schemes.contains(&SchemeKind::Regular) {
            let lambda_max = self.lambda_grid.points().into_iter().fold(0.0f64, |m, l| m.max(l.abs()));
            for &n in &self.n_values {
                let (rho, _) = self.regular_rates(n)?;
                if lambda_max > PI * rho {
                    return Err(config_err(format!(
                        "lambda {lambda_max} lies outside the band [0, {}] of n={n}, where the regular estimate is zero",
                        PI * rho
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn regular_rates(&self, n: usize) -> Result<(f64, f64), HarnessError> {
        optimal_rates_regular(n, self.p, self.q, self.rate_p, self.rate_q)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn poisson_window(&self, n: usize) -> f64 {
        optimal_window_poisson(n, self.q, self.rate_r)
    }

    /// Master seed of one (scheme, n) block; replications index streams in it.
    pub fn block_seed(&self, scheme: SchemeKind, n: usize) -> u64 {
        mix_words(&[self.seed, scheme.tag(), n as u64])
    }
}

/// Per-frequency Monte Carlo summary. `var_emp` divides by the number of
/// replications, so `mse_emp = bias_emp² + var_emp` is the average squared
/// error.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyStats {
    pub scheme: SchemeKind,
    pub n: usize,
    pub lambda: f64,
    pub mean_est: f64,
    pub true_phi: f64,
    pub bias_emp: f64,
    pub bias_theory: f64,
    pub var_emp: f64,
    pub var_theory: f64,
    pub mse_emp: f64,
    pub mse_theory: f64,
}

impl FrequencyStats {
    fn check_finite(&self) -> Result<(), HarnessError> {
        for (field, v) in [
            ("mean_est", self.mean_est),
            ("true_phi", self.true_phi),
            ("bias_emp", self.bias_emp),
            ("bias_theory", self.bias_theory),
            ("var_emp", self.var_emp),
            ("var_theory", self.var_theory),
            ("mse_emp", self.mse_emp),
            ("mse_theory", self.mse_theory),
        ] {
            if !v.is_finite() {
                return Err(HarnessError::NonFinite {
                    scheme: self.scheme,
                    n: self.n,
                    lambda: self.lambda,
                    field,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Serial,
}

pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<Vec<FrequencyStats>, HarnessError> {
    run_monte_carlo_with(config, Execution::Parallel)
}

pub fn run_monte_carlo_with(
    config: &ExperimentConfig,
    execution: Execution,
) -> Result<Vec<FrequencyStats>, HarnessError> {
    config.validate()?;
    let simulator = PathSimulator::new(config.model.clone()).map_err(|e| config_err(e.to_string()))?;
    let theory = TheoryEvaluator::new(config.model.clone());
    let lambdas = config.lambda_grid.points();

    let mut schemes = config.schemes.clone();
    schemes.sort();
    schemes.dedup();
    let mut n_values = config.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();

    let mut stats = Vec::with_capacity(schemes.len() * n_values.len() * lambdas.len());
    for &scheme in &schemes {
        for &n in &n_values {
            log::info!("{scheme} n={n}: {} replications", config.replications);
            let block = run_block(config, &simulator, &theory, &lambdas, scheme, n, execution)?;
            stats.extend(block);
        }
    }
    Ok(stats)
}

fn run_block(
    config: &ExperimentConfig,
    simulator: &PathSimulator,
    theory: &TheoryEvaluator,
    lambdas: &[f64],
    scheme: SchemeKind,
    n: usize,
    execution: Execution,
) -> Result<Vec<FrequencyStats>, HarnessError> {
    let master = config.block_seed(scheme, n);
    let (curve, one_rep): (_, Box<dyn Fn(u64) -> Result<Vec<f64>, HarnessError> + Sync + '_>) =
        match scheme {
            SchemeKind::Regular => {
                let (rho_n, b_n) = config.regular_rates(n)?;
                let est = EstimatorConfig {
                    n,
                    rho_n,
                    b_n,
                    kernel: config.kernel,
                    q: config.q,
                    p: config.p,
                    rate_p: config.rate_p,
                    rate_q: config.rate_q,
                    rate_r: config.rate_r,
                    demean: false,
                };
                let curve = theory
                    .regular_curve(lambdas, n, rho_n, b_n, config.q, config.p, config.kernel)
                    .map_err(|source| HarnessError::Theory { scheme, n, source })?;
                let f = move |rep: u64| {
                    let path = simulator
                        .regular(n, rho_n, SimSeed::new(master, rep))
                        .map_err(|source| HarnessError::Simulation { scheme, n, rep, source })?;
                    regular_smoothed_periodogram(&path, &est, lambdas)
                        .map(|e| e.values)
                        .map_err(|source| HarnessError::Estimation { scheme, n, rep, source })
                };
                (curve, Box::new(f))
            }
            SchemeKind::Poisson => {
                let rho = config.poisson_rho;
                let b_n = config.poisson_window(n);
                let est = PoissonConfig {
                    rho,
                    b_n,
                    kernel: config.kernel,
                    demean: false,
                };
                let curve = theory
                    .poisson_curve(lambdas, n, rho, b_n, config.q, config.kernel)
                    .map_err(|source| HarnessError::Theory { scheme, n, source })?;
                let f = move |rep: u64| {
                    let path = simulator
                        .poisson(n, rho, SimSeed::new(master, rep))
                        .map_err(|source| HarnessError::Simulation { scheme, n, rep, source })?;
                    poisson_smoothed_estimator(&path, &est, lambdas)
                        .map(|e| e.values)
                        .map_err(|source| HarnessError::Estimation { scheme, n, rep, source })
                };
                (curve, Box::new(f))
            }
        };

    let reps = config.replications as u64;
    let estimates: Vec<Vec<f64>> = match execution {
        Execution::Parallel => (0..reps).into_par_iter().map(&one_rep).collect::<Result<_, _>>()?,
        Execution::Serial => (0..reps).map(&one_rep).collect::<Result<_, _>>()?,
    };

    let r = estimates.len() as f64;
    let mut out = Vec::with_capacity(lambdas.len());
    for (i, &lambda) in lambdas.iter().enumerate() {
        let mean = estimates.iter().map(|e| e[i]).sum::<f64>() / r;
        let var = estimates.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / r;
        let true_phi = config.model.spectral_density(lambda);
        let bias = mean - true_phi;
        let row = FrequencyStats {
            scheme,
            n,
            lambda,
            mean_est: mean,
            true_phi,
            bias_emp: bias,
            bias_theory: curve.bias_theory[i],
            var_emp: var,
            var_theory: curve.var_theory[i],
            mse_emp: bias * bias + var,
            mse_theory: curve.mse_theory[i],
        };
        row.check_finite()?;
        out.push(row);
    }
    Ok(out)
}

/// Rows of one (scheme, n) block in frequency order.
pub fn block<'a>(stats: &'a [FrequencyStats], scheme: SchemeKind, n: usize) -> Vec<&'a FrequencyStats> {
    let mut rows: Vec<_> = stats.iter().filter(|s| s.scheme == scheme && s.n == n).collect();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    rows
}

/// Average of `mse_emp` over the frequency grid of one block.
pub fn grid_mean_mse(stats: &[FrequencyStats], scheme: SchemeKind, n: usize) -> Option<f64> {
    let rows = block(stats, scheme, n);
    if rows.is_empty() {
        return None;
    }
    Some(rows.iter().map(|s| s.mse_emp).sum::<f64>() / rows.len() as f64)
}
