//! The two reference experiments: the regular estimator against its theory
//! curves, and the regular estimator against the Poisson one.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{
    emit_svg_figure, run_monte_carlo, write_csv, ExperimentConfig, FrequencyStats, HarnessError,
    Panel,
};
use crate::sampling::SchemeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Regular sampling: mean, bias and variance against theory.
    Fig1,
    /// Regular against Poisson sampling: bias, variance and MSE.
    Fig2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 200 replications, n up to 5000.
    Desk,
    /// 500 replications, n up to 10000.
    Full,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
        }
    }

    pub fn panels(self) -> [Panel; 3] {
        match self {
            Figure::Fig1 => [Panel::Mean, Panel::Bias, Panel::Var],
            Figure::Fig2 => [Panel::Bias, Panel::Var, Panel::Mse],
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            other => Err(format!("unknown figure '{other}' (expected fig1 or fig2)")),
        }
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(format!("unknown scale '{other}' (expected desk or full)")),
        }
    }
}

pub fn figure_config(figure: Figure, scale: Scale, seed: u64, out_dir: &Path) -> ExperimentConfig {
    let (replications, n_values) = match scale {
        Scale::Desk => (200, vec![100, 1000, 5000]),
        Scale::Full => (500, vec![100, 1000, 10_000]),
    };
    let schemes = match figure {
        Figure::Fig1 => vec![SchemeKind::Regular],
        Figure::Fig2 => vec![SchemeKind::Regular, SchemeKind::Poisson],
    };
    ExperimentConfig {
        schemes,
        n_values,
        replications,
        seed,
        output_dir: out_dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub csv: PathBuf,
    pub svgs: Vec<PathBuf>,
    pub stats: Vec<FrequencyStats>,
}

pub fn reproduce_figure(
    figure: Figure,
    scale: Scale,
    seed: u64,
    out_dir: &Path,
) -> Result<FigureOutput, HarnessError> {
    run_figure(figure, &figure_config(figure, scale, seed, out_dir))
}

/// Run `config` and write `<fig>.csv` plus one three-panel `<fig>_n<n>.svg`
/// per sample size into its output directory.
pub fn run_figure(figure: Figure, config: &ExperimentConfig) -> Result<FigureOutput, HarnessError> {
    let stats = run_monte_carlo(config)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.clone(),
        source,
    })?;
    let csv = dir.join(format!("{}.csv", figure.name()));
    write_csv(&stats, &csv)?;

    let mut sizes: Vec<usize> = stats.iter().map(|s| s.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut svgs = Vec::with_capacity(sizes.len());
    for n in sizes {
        let rows: Vec<FrequencyStats> = stats.iter().filter(|s| s.n == n).cloned().collect();
        let path = dir.join(format!("{}_n{n}.svg", figure.name()));
        emit_svg_figure(&rows, &figure.panels(), &path)?;
        svgs.push(path);
    }
    Ok(FigureOutput { csv, svgs, stats })
}
