mod common;

use std::f64::consts::PI;

use common::{normal_residual, normal_scale, savgol_brute};
use flas_core::forecast::model_io::{linear_from_text, linear_to_text, trend_from_text, trend_to_text};
use flas_core::forecast::smoothing::fit_weights;
use flas_core::forecast::trend::trend_series;
use flas_core::forecast::{
    first_derivative, fit_scaling_time, fit_trend_model, forecast_trend, kfold_cv, savgol_filter, LinearModel,
    ScalingTimeRow, TrendFitParams, TrendKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn savgol_matches_brute_force_on_fifty_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let window = 2 * rng.random_range(1..8) + 1;
        let degree = rng.random_range(0..window.min(6));
        let n = rng.random_range(window..window + 40);
        let series: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let got = savgol_filter(&series, window, degree).unwrap();
        let want = savgol_brute(&series, window, degree);
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!(close(*g, *w, 1e-9), "case {case} (w={window}, d={degree}) index {i}: {g} vs {w}");
        }
    }
}

#[test]
fn five_point_quadratic_weights() {
    let w = fit_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 2).unwrap();
    for (got, want) in w.iter().zip([-3.0, 12.0, 17.0, 12.0, -3.0]) {
        assert!((got - want / 35.0).abs() < 1e-9);
    }
}

#[test]
fn savgol_keeps_polynomials_of_its_degree() {
    let series: Vec<f64> = (0..30).map(|i| 2.0 - 0.5 * i as f64 + 0.03 * (i * i) as f64).collect();
    let out = savgol_filter(&series, 7, 2).unwrap();
    for (a, b) in out.iter().zip(&series) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn derivative_is_exact_on_quadratics_inside() {
    let s: Vec<f64> = (0..10).map(|i| 3.0 * (i * i) as f64 + i as f64).collect();
    let d = first_derivative(&s, 0.5).unwrap();
    for i in 1..9 {
        // d/dt of 3 i^2 + i with t = 0.5 i
        assert!((d[i] - (12.0 * i as f64 + 2.0)).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn savgol_oracle(series in proptest::collection::vec(-1e3f64..1e3, 15..60), half in 1usize..7, deg in 0usize..5) {
        let window = 2 * half + 1;
        let degree = deg.min(window - 1);
        let got = savgol_filter(&series, window, degree).unwrap();
        let want = savgol_brute(&series, window, degree);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!(close(*g, *w, 1e-9), "{} vs {}", g, w);
        }
    }

    #[test]
    fn ols_recovers_planted_coefficients(
        coef in proptest::collection::vec(-5.0f64..5.0, 1..5),
        intercept in -10.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = coef.len();
        let x: Vec<Vec<f64>> = (0..40).map(|_| (0..p).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| intercept + r.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>()).collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let m = LinearModel::fit(&names, &x, &y).unwrap();
        prop_assert!((m.intercept - intercept).abs() < 1e-6);
        for (got, want) in m.coefficients.iter().zip(&coef) {
            prop_assert!((got - want).abs() < 1e-6);
        }
        prop_assert!(m.r2 > 1.0 - 1e-9);
    }

    #[test]
    fn ols_satisfies_normal_equations(
        p in 1usize..6,
        seed in any::<u64>(),
        scale in prop_oneof![Just(1.0), Just(1e3), Just(1e6)],
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..p).map(|j| scale * (j + 1) as f64 * rng.random_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() / scale + rng.random_range(-1.0..1.0)).collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let m = LinearModel::fit(&names, &x, &y).unwrap();
        let g = normal_residual(&x, &y, m.intercept, &m.coefficients);
        let s = normal_scale(&x, &y);
        for (gi, si) in g.iter().zip(&s) {
            prop_assert!(gi.abs() <= 1e-7 * si, "{} vs scale {}", gi, si);
        }
    }

    #[test]
    fn model_text_round_trips(coef in proptest::collection::vec(-1e9f64..1e9, 2), b in -1e3f64..1e3) {
        let m = LinearModel {
            intercept: b,
            predictor_names: vec!["notif_rate".into(), "stored_subs".into()],
            coefficients: coef,
            r2: 0.5,
            mae: 0.25,
        };
        prop_assert_eq!(linear_from_text(&linear_to_text(&m)).unwrap(), m);
    }
}

fn sinusoid_rt(period: u64, amplitude: f64, n: u64) -> Vec<(u64, f64)> {
    (1..=n).map(|t| (t, 0.5 + amplitude * (2.0 * PI * t as f64 / period as f64).sin())).collect()
}

#[test]
fn harmonic_model_is_selected_on_a_clean_sinusoid() {
    let p = TrendFitParams { seasonal_period: 40, harmonics: 3, ..TrendFitParams::default() };
    let rt = sinusoid_rt(40, 0.2, 400);
    let model = fit_trend_model(&rt, 1.0, &p).unwrap();
    assert_eq!(model.kind, TrendKind::HarmonicAr);
    // amplitude of the trend series itself (ms/s)
    let rt_s: Vec<f64> = rt.iter().map(|r| r.1).collect();
    let y = trend_series(&rt_s, 1.0, p.sg_window, p.sg_degree).unwrap();
    let amp = y[20..380].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(model.cv_mae < 1e-6 * amp, "cv_mae {} amplitude {amp}", model.cv_mae);
    assert!(model.cv_mae < 1e-6 * 0.2 * 1000.0);

    // and the forecast follows the level exactly
    let h = trend_series(&rt_s, 1.0, p.sg_window, p.sg_degree).unwrap();
    let f = forecast_trend(&model, &h[..300], 300, 300, 2.5, 4, 1.0).unwrap();
    for (i, v) in f.values.iter().enumerate() {
        let t = 303 + i;
        assert!((v - h[t - 1]).abs() < 1e-6 * amp, "t={t}: {v} vs {}", h[t - 1]);
    }
}

#[test]
fn trend_text_round_trips() {
    let p = TrendFitParams { seasonal_period: 40, harmonics: 3, ..TrendFitParams::default() };
    let model = fit_trend_model(&sinusoid_rt(40, 0.2, 400), 1.0, &p).unwrap();
    assert_eq!(trend_from_text(&trend_to_text(&model)).unwrap(), model);
}

#[test]
fn kfold_on_unrelated_noise_has_no_skill() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    let y: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
    let (r2, mae) = kfold_cv(&["a", "b"], &x, &y, 5, 3).unwrap();
    assert!(r2 < 0.05, "null data out-of-fold r2 {r2}");
    // a uniform(0,1) target around its mean has MAE 0.25
    assert!((mae - 0.25).abs() < 0.03, "{mae}");
}

#[test]
fn scaling_time_fit_matches_direct_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<ScalingTimeRow> = (0..50)
        .map(|_| {
            let n = rng.random_range(5e3..2e4);
            let s = rng.random_range(0.0..2e5);
            ScalingTimeRow { notif_rate: n, stored_subs: s, t_sa: 1.0 + 5e-5 * n + 3e-6 * s + rng.random_range(-0.05..0.05) }
        })
        .collect();
    let m = fit_scaling_time(&rows).unwrap();
    // oracle: plain normal equations on [1, N, S]
    let mut ata = vec![vec![0.0; 3]; 3];
    let mut aty = vec![0.0; 3];
    for r in &rows {
        let v = [1.0, r.notif_rate, r.stored_subs];
        for i in 0..3 {
            aty[i] += v[i] * r.t_sa;
            for j in 0..3 {
                ata[i][j] += v[i] * v[j];
            }
        }
    }
    let b = common::gauss_solve(ata, aty);
    assert!(close(m.intercept, b[0], 1e-6));
    assert!(close(m.coefficients[0], b[1], 1e-6));
    assert!(close(m.coefficients[1], b[2], 1e-6));
}
