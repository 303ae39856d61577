use ctspectral::estimators::sample_autocovariance;
use ctspectral::process_models::CarModel;
use ctspectral::sampling::{PathSimulator, Scheme, SimSeed};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn first_retained_value_has_stationary_variance() {
    let model = CarModel::reference();
    let c0 = model.covariance(0.0);
    let sim = PathSimulator::new(model).unwrap();
    for scheme in ["regular", "poisson"] {
        let squares: Vec<f64> = (0..2000)
            .map(|r| {
                let seed = SimSeed::new(41, r);
                let path = match scheme {
                    "regular" => sim.regular(4, 1.0, seed).unwrap(),
                    _ => sim.poisson(4, 1.0, seed).unwrap(),
                };
                path.values[0].powi(2)
            })
            .collect();
        let (m, se) = mean_and_se(&squares);
        assert!((m - c0).abs() < 3.0 * se, "{scheme}: {m} vs {c0} (se {se})");
    }
}

#[test]
fn lag_one_covariance_at_unit_spacing() {
    let model = CarModel::reference();
    let c1 = model.covariance(1.0);
    let sim = PathSimulator::new(model).unwrap();
    let products: Vec<f64> = (0..2000)
        .map(|r| {
            let path = sim.regular(256, 1.0, SimSeed::new(42, r)).unwrap();
            path.values[127] * path.values[128]
        })
        .collect();
    let (m, se) = mean_and_se(&products);
    assert!((m - c1).abs() < 3.0 * se, "{m} vs {c1} (se {se})");
}

#[test]
fn empirical_covariance_matrix_on_irregular_times() {
    let model = CarModel::reference();
    let times = [0.3, 0.35, 1.1, 2.0, 2.05, 4.4, 7.0, 7.9];
    let k = times.len();
    let sim = PathSimulator::new(model.clone()).unwrap();
    let draws: Vec<Vec<f64>> = (0..20_000)
        .map(|r| {
            sim.simulate(&times, Scheme::Poisson { rho: 1.0 }, SimSeed::new(43, r))
                .unwrap()
                .values
        })
        .collect();
    for i in 0..k {
        for j in i..k {
            let prods: Vec<f64> = draws.iter().map(|x| x[i] * x[j]).collect();
            let (m, se) = mean_and_se(&prods);
            let c = model.covariance(times[i] - times[j]);
            assert!((m - c).abs() < 4.0 * se, "({i},{j}): {m} vs {c} (se {se})");
        }
    }
}

#[test]
fn autocovariance_expectation_at_lag_two() {
    let model = CarModel::reference();
    let expected = (1.0 - 2.0 / 64.0) * model.covariance(2.0);
    let sim = PathSimulator::new(model).unwrap();
    let gammas: Vec<f64> = (0..2000)
        .map(|r| {
            let path = sim.regular(64, 1.0, SimSeed::new(44, r)).unwrap();
            sample_autocovariance(&path.values, 2).unwrap()
        })
        .collect();
    let (m, se) = mean_and_se(&gammas);
    assert!((m - expected).abs() < 3.0 * se, "{m} vs {expected} (se {se})");
}

#[test]
fn paths_are_determined_by_the_seed() {
    let sim = PathSimulator::new(CarModel::reference()).unwrap();
    let a = sim.poisson(300, 1.0, SimSeed::new(5, 9)).unwrap();
    let b = sim.poisson(300, 1.0, SimSeed::new(5, 9)).unwrap();
    let c = sim.poisson(300, 1.0, SimSeed::new(5, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values, c.values);
    assert_ne!(a.times, c.times);
}
