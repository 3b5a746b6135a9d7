use cellplan::model_select::{grid_search, GridSpec, Metric, SearchMode, Split, SvrTask};
use cellplan::svr::{
    build_features, fit_scaled, mse, normalized_mse, train, FeatureVector4, SvrParams, SvrSample,
};
use cellplan_testkit::{naive_mse, rbf_matrix, svr_dual_optimum};
use chrono::{Datelike, Days, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn monday() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 1, 7).unwrap()
}

fn curve(k: u32) -> f64 {
    50.0 + 40.0 * (2.0 * std::f64::consts::PI * (k as f64 - 1.0) / 144.0).sin()
}

fn sin_days(start: NaiveDate, days: u64) -> Vec<SvrSample> {
    (0..days)
        .flat_map(|d| {
            let date = start + Days::new(d);
            let (weekday, week, year) = cellplan::svr::calendar(date, 2013);
            (1..=144).map(move |k| SvrSample {
                features: FeatureVector4::new(k, weekday, week, year).unwrap(),
                label: curve(k),
            })
        })
        .collect()
}

#[test]
fn sin_curve_next_day_after_grid_search() {
    let history = sin_days(monday(), 21);
    let grid = GridSpec {
        c: vec![10.0, 100.0],
        gamma: vec![1.0, 10.0, 30.0],
        epsilon: vec![0.8, 4.0],
        metric: Metric::Mse,
        split: Split::Holdout {
            train_fraction: 6.0 / 7.0,
        },
        mode: SearchMode::Cartesian,
    };
    let task = SvrTask {
        samples: &history,
        first_year: 2013,
        tol: 1e-3,
    };
    let best = grid_search(&task, &grid, 0).unwrap().best;
    let model = train(
        &history,
        2013,
        &SvrParams::<f64>::new(best.c, best.gamma, best.epsilon.unwrap()),
    )
    .unwrap();
    let next = monday() + Days::new(21);
    let predicted = model.predict_date(next).unwrap();
    let actual: Vec<f64> = (1..=144).map(curve).collect();
    let nmse = normalized_mse(&predicted, &actual).unwrap();
    assert!(nmse <= 1e-2, "normalized MSE {nmse}, params {best:?}");
}

#[test]
fn constant_labels_predict_the_constant() {
    let samples: Vec<SvrSample> = sin_days(monday(), 2)
        .into_iter()
        .map(|s| SvrSample { label: 7.0, ..s })
        .collect();
    let model = train(&samples, 2013, &SvrParams::<f64>::new(10.0, 1.0, 0.1)).unwrap();
    assert!(model.support_vectors.is_empty());
    for k in [1, 50, 144] {
        let x = FeatureVector4::new(k, 3, 40, 1).unwrap();
        assert!((model.predict(&x) - 7.0).abs() <= 1e-9);
    }
    assert!(model
        .predict_day(2, 5, 1)
        .unwrap()
        .iter()
        .all(|v| (v - 7.0).abs() <= 1e-9));
}

#[test]
fn day_sweep_equals_pointwise_predictions() {
    let samples = sin_days(monday(), 3);
    let model = train(&samples, 2013, &SvrParams::<f64>::new(10.0, 5.0, 1.0)).unwrap();
    let day = model.predict_day(4, 2, 1).unwrap();
    for k in 1..=144u32 {
        let p = model.predict(&FeatureVector4::new(k, 4, 2, 1).unwrap());
        assert_eq!(day[k as usize - 1], p.max(0.0));
    }
}

#[test]
fn negative_forecasts_clamp_to_zero() {
    let mut samples = sin_days(monday(), 2);
    for s in samples.iter_mut() {
        s.label = if s.features.interval < 72 { 0.0 } else { 100.0 };
    }
    let model = train(&samples, 2013, &SvrParams::<f64>::new(100.0, 30.0, 0.5)).unwrap();
    let raw: Vec<f64> = (1..=144)
        .map(|k| model.predict(&FeatureVector4::new(k, 1, 2, 1).unwrap()))
        .collect();
    let day = model.predict_day(1, 2, 1).unwrap();
    assert!(day.iter().all(|&v| v >= 0.0));
    for (r, d) in raw.iter().zip(&day) {
        assert_eq!(*d, r.max(0.0));
    }
}

#[test]
fn feature_counts_and_calendar() {
    let series: Vec<_> = (0..21)
        .map(|d| cellplan::LoadSeries::new("s", monday() + Days::new(d), vec![1; 144]).unwrap())
        .collect();
    let samples = build_features(&series, None).unwrap();
    assert_eq!(samples.len(), 21 * 144);
    assert_eq!(
        samples[0].features,
        FeatureVector4::new(1, 1, 2, 1).unwrap()
    );
    assert_eq!(samples[60].features.interval, 61);
    let mut dup = series.clone();
    dup.push(series[3].clone());
    assert!(matches!(
        build_features(&dup, None),
        Err(cellplan::Error::DuplicateDay { .. })
    ));
    assert_eq!(series[6].date.weekday(), chrono::Weekday::Sun);
}

fn random_regression(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=6);
    let xs: Vec<Vec<f64>> = (0..m)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let ys: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c = [0.5, 2.0, 10.0][rng.random_range(0..3)];
    (
        xs,
        ys,
        c,
        rng.random_range(0.2..3.0),
        rng.random_range(0.01..0.3),
    )
}

#[test]
fn small_duals_match_projected_gradient() {
    for seed in 0..20 {
        let (xs, ys, c, gamma, eps) = random_regression(seed);
        let fit = fit_scaled(&xs, &ys, &SvrParams::<f64>::new(c, gamma, eps), true).unwrap();
        let oracle = svr_dual_optimum(&rbf_matrix(gamma, &xs), &ys, c, eps);
        let rel = (fit.dual_objective - oracle).abs() / oracle.abs().max(1e-12);
        assert!(
            rel <= 1e-2,
            "seed {seed}: {} vs {oracle}",
            fit.dual_objective
        );
        assert!(fit.coefs.iter().sum::<f64>().abs() <= 1e-8);
        for ((x, &y), &coef) in xs.iter().zip(&ys).zip(&fit.coefs) {
            assert!(coef.abs() <= c + 1e-12);
            if coef != 0.0 && coef.abs() < c {
                let r = (fit.model.predict_scaled(x) - y).abs();
                assert!(
                    r <= eps + 1e-3 + 1e-9,
                    "seed {seed}: residual {r}, eps {eps}"
                );
            }
        }
        assert!(fit.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }
}

#[test]
fn mse_examples() {
    assert_eq!(mse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2.0);
    assert_eq!(mse(&[1.5, 2.5], &[1.5, 2.5]).unwrap(), 0.0);
    assert!(mse::<f64>(&[], &[]).is_err());
    assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
}

proptest! {
    #[test]
    fn mse_matches_two_pass(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..200)) {
        let (p, a): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let got = mse(&p, &a).unwrap();
        let want = naive_mse(&p, &a);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }
}

#[test]
fn label_shift_moves_predictions() {
    for seed in 0..5 {
        let (xs, ys, c, gamma, eps) = random_regression(50 + seed);
        let params = SvrParams::<f64>::new(c, gamma, eps).with_tol(1e-6);
        let a = fit_scaled(&xs, &ys, &params, false).unwrap().model;
        let shifted: Vec<f64> = ys.iter().map(|y| y + 25.0).collect();
        let b = fit_scaled(&xs, &shifted, &params, false).unwrap().model;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let q = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            assert!((b.predict_scaled(&q) - a.predict_scaled(&q) - 25.0).abs() <= 1e-6);
        }
    }
}
