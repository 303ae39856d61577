use std::f64::consts::PI;

use ctspectral::experiment::{
    block, figure_config, grid_mean_mse, read_csv, reproduce_figure, run_monte_carlo,
    run_monte_carlo_with, write_csv, Execution, ExperimentConfig, Figure, LambdaGrid, Scale,
};
use ctspectral::sampling::SchemeKind;

fn tiny(schemes: Vec<SchemeKind>) -> ExperimentConfig {
    ExperimentConfig {
        schemes,
        n_values: vec![32],
        replications: 2,
        lambda_grid: LambdaGrid::Uniform {
            min: 0.0,
            max: PI / 2.0,
            steps: 9,
        },
        seed: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn rows_cover_grid_schemes_and_sizes() {
    let cfg = ExperimentConfig {
        n_values: vec![32, 48, 64],
        ..tiny(vec![SchemeKind::Regular, SchemeKind::Poisson])
    };
    let stats = run_monte_carlo(&cfg).unwrap();
    assert_eq!(stats.len(), 9 * 2 * 3);
}

#[test]
fn parallel_and_serial_runs_agree() {
    let cfg = ExperimentConfig {
        replications: 16,
        n_values: vec![64, 200],
        ..tiny(vec![SchemeKind::Regular, SchemeKind::Poisson])
    };
    let a = run_monte_carlo_with(&cfg, Execution::Parallel).unwrap();
    let b = run_monte_carlo_with(&cfg, Execution::Serial).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_files_are_reproducible_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        replications: 5,
        ..tiny(vec![SchemeKind::Poisson, SchemeKind::Regular])
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let stats = run_monte_carlo(&cfg).unwrap();
    write_csv(&stats, &a).unwrap();
    write_csv(&run_monte_carlo(&cfg).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let back = read_csv(&a).unwrap();
    assert_eq!(back.len(), stats.len());
    for s in &stats {
        assert!(back.contains(s));
    }
    for pair in back.windows(2) {
        if pair[0].scheme == pair[1].scheme && pair[0].n == pair[1].n {
            assert!(pair[0].lambda < pair[1].lambda);
        }
    }
}

#[test]
fn regular_variance_matches_theory_at_ten_thousand() {
    let cfg = ExperimentConfig {
        schemes: vec![SchemeKind::Regular],
        n_values: vec![10_000],
        replications: 500,
        lambda_grid: LambdaGrid::Explicit(vec![1.0]),
        seed: 12,
        ..ExperimentConfig::default()
    };
    let stats = run_monte_carlo(&cfg).unwrap();
    let ratio = stats[0].var_emp / stats[0].var_theory;
    assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn fig1_desk_bias_is_negative_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = reproduce_figure(Figure::Fig1, Scale::Desk, 1, dir.path()).unwrap();
    assert_eq!(out.svgs.len(), 3);
    assert!(out.csv.exists());
    let rows = block(&out.stats, SchemeKind::Regular, 1000);
    assert_eq!(rows.len(), 65);
    for s in rows.iter().take(4) {
        assert!(s.bias_emp < 0.0, "lambda {}: {}", s.lambda, s.bias_emp);
        assert!(s.bias_theory < 0.0);
    }
    let svg = std::fs::read_to_string(&out.svgs[1]).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);
}

#[test]
fn full_scale_patterns() {
    // both schemes at the full sample sizes
    let cfg = ExperimentConfig {
        replications: 500,
        seed: 13,
        ..figure_config(Figure::Fig2, Scale::Full, 13, std::path::Path::new("unused"))
    };
    let stats = run_monte_carlo(&cfg).unwrap();
    for scheme in [SchemeKind::Regular, SchemeKind::Poisson] {
        let mses: Vec<f64> = [100, 1000, 10_000]
            .iter()
            .map(|&n| grid_mean_mse(&stats, scheme, n).unwrap())
            .collect();
        assert!(mses[0] > mses[1] && mses[1] > mses[2], "{scheme}: {mses:?}");
    }
    let reg = block(&stats, SchemeKind::Regular, 10_000);
    let poi = block(&stats, SchemeKind::Poisson, 10_000);
    let (mut total, mut bias_ok, mut var_ok) = (0, 0, 0);
    for (r, p) in reg.iter().zip(&poi) {
        assert_eq!(r.lambda, p.lambda);
        if r.lambda < 0.5 {
            continue;
        }
        total += 1;
        bias_ok += (p.bias_emp.abs() <= r.bias_emp.abs()) as usize;
        var_ok += (p.var_emp >= r.var_emp) as usize;
    }
    assert!(bias_ok as f64 >= 0.8 * total as f64, "bias {bias_ok}/{total}");
    assert!(var_ok as f64 >= 0.8 * total as f64, "var {var_ok}/{total}");
    let (r_end, p_end) = (reg.last().unwrap(), poi.last().unwrap());
    assert!(p_end.mse_emp > r_end.mse_emp);
    // Poisson MSE levels off over the upper half of the band; regular keeps falling
    let upper = |rows: &[&ctspectral::experiment::FrequencyStats]| {
        let a = rows.iter().find(|s| s.lambda >= PI / 4.0).unwrap().mse_emp;
        a / rows.last().unwrap().mse_emp
    };
    assert!(upper(&poi) < 10.0, "poisson drop {}", upper(&poi));
    assert!(upper(&reg) > 100.0, "regular drop {}", upper(&reg));
}
