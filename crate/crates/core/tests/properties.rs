use std::path::Path;

use ctspectral::estimators::{
    poisson_smoothed_estimator, regular_smoothed_periodogram, sample_autocovariance,
    EstimatorConfig, PoissonConfig,
};
use ctspectral::experiment::{parse_csv, write_csv_to, FrequencyStats, LambdaGrid};
use ctspectral::kernels::Kernel;
use ctspectral::process_models::CarModel;
use ctspectral::sampling::{SamplePath, Scheme, SchemeKind, SimSeed};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![Just(Kernel::Hanning), Just(Kernel::Rectangular), Just(Kernel::Parzen)]
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

proptest! {
    #[test]
    fn kernels_are_even_and_bounded(k in kernel(), x in -5.0..5.0f64) {
        prop_assert_eq!(k.eval(x), k.eval(-x));
        prop_assert!(k.eval(x).abs() <= 1.0);
        prop_assert!((k.one_minus(x) - (1.0 - k.eval(x))).abs() < 1e-14);
    }

    #[test]
    fn covariance_is_even_and_dominated_by_variance(tau in -50.0..50.0f64) {
        let m = CarModel::reference();
        prop_assert_eq!(m.covariance(tau), m.covariance(-tau));
        prop_assert!(m.covariance(tau).abs() <= m.covariance(0.0) * (1.0 + 1e-12));
    }

    #[test]
    fn autocovariance_is_symmetric_in_lag(xs in prop::collection::vec(-10.0..10.0f64, 2..60), v in 0i64..60) {
        let v = v % xs.len() as i64;
        prop_assert_eq!(sample_autocovariance(&xs, v).unwrap(), sample_autocovariance(&xs, -v).unwrap());
        let g0 = sample_autocovariance(&xs, 0).unwrap();
        prop_assert!(sample_autocovariance(&xs, v).unwrap().abs() <= g0 * (1.0 + 1e-12));
    }

    #[test]
    fn regular_estimate_is_even(
        xs in prop::collection::vec(-3.0..3.0f64, 2..80),
        k in kernel(),
        rho in 0.5..3.0f64,
        b in 0.02..1.0f64,
        lambda in 0.0..10.0f64,
    ) {
        let n = xs.len();
        let path = SamplePath {
            times: (1..=n).map(|j| j as f64 / rho).collect(),
            values: xs,
            scheme: Scheme::Regular { rho },
            seed: SimSeed::new(0, 0),
        };
        let cfg = EstimatorConfig {
            n, rho_n: rho, b_n: b, kernel: k, q: 2.0, p: 8.0,
            rate_p: 1.0, rate_q: 0.25, rate_r: 0.25, demean: false,
        };
        let e = regular_smoothed_periodogram(&path, &cfg, &[lambda, -lambda]).unwrap();
        prop_assert_eq!(e.values[0], e.values[1]);
        if lambda > std::f64::consts::PI * rho {
            prop_assert_eq!(e.values[0], 0.0);
        }
    }

    #[test]
    fn poisson_estimate_is_even(
        gaps in prop::collection::vec(0.01..3.0f64, 2..60),
        k in kernel(),
        b in 0.05..2.0f64,
        lambda in 0.0..6.0f64,
    ) {
        let times: Vec<f64> = gaps.iter().scan(0.0, |t, g| { *t += g; Some(*t) }).collect();
        let values: Vec<f64> = times.iter().map(|t| (1.3 * t).sin() + 0.2).collect();
        let path = SamplePath { times, values, scheme: Scheme::Poisson { rho: 1.0 }, seed: SimSeed::new(0, 0) };
        let cfg = PoissonConfig { rho: 1.0, b_n: b, kernel: k, demean: false };
        let e = poisson_smoothed_estimator(&path, &cfg, &[lambda, -lambda]).unwrap();
        prop_assert_eq!(e.values[0], e.values[1]);
    }

    #[test]
    fn csv_round_trips(rows in prop::collection::vec((any::<bool>(), 2usize..100_000, 0.0..2.0f64, prop::array::uniform8(finite())), 1..20)) {
        let mut stats: Vec<FrequencyStats> = rows.into_iter().map(|(poisson, n, lambda, v)| FrequencyStats {
            scheme: if poisson { SchemeKind::Poisson } else { SchemeKind::Regular },
            n, lambda,
            mean_est: v[0], true_phi: v[1], bias_emp: v[2], bias_theory: v[3],
            var_emp: v[4], var_theory: v[5], mse_emp: v[6], mse_theory: v[7],
        }).collect();
        let mut buf = Vec::new();
        write_csv_to(&stats, &mut buf).unwrap();
        let back = parse_csv(std::str::from_utf8(&buf).unwrap(), Path::new("mem")).unwrap();
        stats.sort_by(|a, b| a.scheme.name().cmp(b.scheme.name()).then(a.n.cmp(&b.n)).then(a.lambda.total_cmp(&b.lambda)));
        prop_assert_eq!(back.len(), stats.len());
        for (a, b) in back.iter().zip(&stats) {
            prop_assert_eq!((a.scheme, a.n, a.lambda.to_bits()), (b.scheme, b.n, b.lambda.to_bits()));
            prop_assert_eq!(a.mse_theory.to_bits(), b.mse_theory.to_bits());
            prop_assert_eq!(a.mean_est.to_bits(), b.mean_est.to_bits());
        }
    }

    #[test]
    fn uniform_grids_hit_both_ends(min in -2.0..2.0f64, width in 0.0..5.0f64, steps in 2usize..200) {
        let g = LambdaGrid::Uniform { min, max: min + width, steps };
        let pts = g.points();
        prop_assert_eq!(pts.len(), steps);
        prop_assert_eq!(pts[0], min);
        prop_assert_eq!(pts[steps - 1], min + width);
    }
}
