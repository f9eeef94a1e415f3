//! Ordinary least squares models: the scaling-time forecaster, the
//! performance (RT / throughput) estimator and k-fold validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ForecastError;
use crate::forecast::linalg::lstsq;
use crate::metrics::CleanSample;

/// Affine model `intercept + sum coefficients[i] * x[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub predictor_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// In-sample coefficient of determination.
    pub r2: f64,
    /// In-sample mean absolute error, in target units.
    pub mae: f64,
}

impl LinearModel {
    /// Least-squares fit. Predictors are centred and scaled before the solve,
    /// so byte-sized and percentage channels can share one design matrix.
    pub fn fit(names: &[&str], x: &[Vec<f64>], y: &[f64]) -> Result<Self, ForecastError> {
        let p = names.len();
        let n = x.len();
        if n != y.len() {
            return Err(ForecastError::InvalidArgument(format!("{n} rows but {} targets", y.len())));
        }
        if n < p + 1 {
            return Err(ForecastError::InsufficientData { need: p + 1, got: n });
        }
        if x.iter().any(|r| r.len() != p) {
            return Err(ForecastError::InvalidArgument("row width differs from predictor count".into()));
        }
        let (means, sds) = column_stats(x, p);
        if sds.iter().any(|&s| !(s > 0.0)) {
            return Err(ForecastError::RankDeficient);
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let z: Vec<Vec<f64>> =
            x.iter().map(|r| (0..p).map(|j| (r[j] - means[j]) / sds[j]).collect()).collect();
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let beta_z = lstsq(&z, &yc)?;
        let coefficients: Vec<f64> = beta_z.iter().zip(&sds).map(|(b, s)| b / s).collect();
        let intercept = y_mean - coefficients.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
        let mut model = Self {
            intercept,
            predictor_names: names.iter().map(|s| s.to_string()).collect(),
            coefficients,
            r2: 0.0,
            mae: 0.0,
        };
        let preds: Vec<f64> = x.iter().map(|r| model.predict(r)).collect();
        model.r2 = r_squared(y, &preds);
        model.mae = mean_abs_error(y, &preds);
        Ok(model)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.predictor_names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }
}

fn column_stats(x: &[Vec<f64>], p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let means: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sds = (0..p)
        .map(|j| {
            let var = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            // a column equal to its mean up to rounding is constant
            if sd <= 1e-12 * means[j].abs() {
                0.0
            } else {
                sd
            }
        })
        .collect();
    (means, sds)
}

pub fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    if sst == 0.0 {
        if sse == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - sse / sst
    }
}

pub fn mean_abs_error(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len().max(1) as f64
}

/// Observed scaling action: workload at the triggering point and its duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingTimeRow {
    pub notif_rate: f64,
    pub stored_subs: f64,
    pub t_sa: f64,
}

pub const SCALING_TIME_PREDICTORS: [&str; 2] = ["notif_rate", "stored_subs"];

pub fn fit_scaling_time(rows: &[ScalingTimeRow]) -> Result<LinearModel, ForecastError> {
    if rows.len() < 3 {
        return Err(ForecastError::InsufficientData { need: 3, got: rows.len() });
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.notif_rate, r.stored_subs]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.t_sa).collect();
    LinearModel::fit(&SCALING_TIME_PREDICTORS, &x, &y)
}

/// Predicted duration of a scaling action started now, never below one tick.
pub fn forecast_scaling_time(model: &LinearModel, notif_rate: f64, stored_subs: f64, dt: f64) -> f64 {
    model.predict(&[notif_rate, stored_subs]).max(dt)
}

/// Predictors of the performance models, in design-matrix order. `cpu_idle`
/// is left out: it is the complement of the other cpu channels.
pub const PERF_PREDICTORS: [&str; 14] = [
    "cpu_user",
    "cpu_system",
    "cpu_wait",
    "ctx_switches",
    "intr",
    "mem_used",
    "mem_free",
    "mem_cache",
    "mem_buffers",
    "disk_read",
    "disk_write",
    "net_recv",
    "net_send",
    "mem_used_pct",
];

/// One profiling observation: cleaned metrics with the measured RT (s) and X (msg/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfRow {
    pub sample: CleanSample,
    pub rt: f64,
    pub throughput: f64,
}

pub fn perf_features(sample: &CleanSample) -> Vec<f64> {
    PERF_PREDICTORS.iter().map(|n| sample.get(n).unwrap_or(0.0)).collect()
}

/// Fitted RT and throughput estimators plus predictor rankings.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceModels {
    pub rt_model: LinearModel,
    pub x_model: LinearModel,
    pub rt_kpis: Vec<(String, f64)>,
    pub x_kpis: Vec<(String, f64)>,
}

pub fn fit_performance_model(rows: &[PerfRow]) -> Result<PerformanceModels, ForecastError> {
    let usable: Vec<&PerfRow> = rows.iter().filter(|r| !r.sample.outlier_flag).collect();
    let need = PERF_PREDICTORS.len() + 2;
    if usable.len() < need {
        return Err(ForecastError::InsufficientData { need, got: usable.len() });
    }
    let x: Vec<Vec<f64>> = usable.iter().map(|r| perf_features(&r.sample)).collect();
    let rt: Vec<f64> = usable.iter().map(|r| r.rt).collect();
    let tp: Vec<f64> = usable.iter().map(|r| r.throughput).collect();
    let rt_model = LinearModel::fit(&PERF_PREDICTORS, &x, &rt)?;
    let x_model = LinearModel::fit(&PERF_PREDICTORS, &x, &tp)?;
    let rt_kpis = kpi_ranking(&rt_model, &x, &rt);
    let x_kpis = kpi_ranking(&x_model, &x, &tp);
    Ok(PerformanceModels { rt_model, x_model, rt_kpis, x_kpis })
}

/// Predictors ordered by |standardized coefficient| = |b_j| sd(x_j) / sd(y), largest first.
pub fn kpi_ranking(model: &LinearModel, x: &[Vec<f64>], y: &[f64]) -> Vec<(String, f64)> {
    let p = model.coefficients.len();
    let (_, sds) = column_stats(x, p);
    let n = y.len() as f64;
    let ym = y.iter().sum::<f64>() / n;
    let sdy = (y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / n).sqrt();
    let mut out: Vec<(String, f64)> = model
        .predictor_names
        .iter()
        .zip(&model.coefficients)
        .zip(&sds)
        .map(|((name, b), s)| (name.clone(), if sdy > 0.0 { (b * s / sdy).abs() } else { 0.0 }))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

/// Estimated response time (s) from a cleaned sample, never negative.
pub fn estimate_rt(rt_model: &LinearModel, sample: &CleanSample) -> f64 {
    let x: Vec<f64> = rt_model.predictor_names.iter().map(|n| sample.get(n).unwrap_or(0.0)).collect();
    rt_model.predict(&x).max(0.0)
}

/// Out-of-fold R^2 and MAE of an OLS model, averaged over `k` folds.
///
/// Row indices are shuffled with `seed` and cut into `k` contiguous folds.
pub fn kfold_cv(
    names: &[&str],
    x: &[Vec<f64>],
    y: &[f64],
    k: usize,
    seed: u64,
) -> Result<(f64, f64), ForecastError> {
    let n = x.len();
    if k < 2 || n < k {
        return Err(ForecastError::TooFewRows { rows: n, k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut r2_sum = 0.0;
    let mut mae_sum = 0.0;
    for f in 0..k {
        let lo = f * n / k;
        let hi = (f + 1) * n / k;
        let test = &idx[lo..hi];
        let train: Vec<usize> = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = LinearModel::fit(names, &tx, &ty)?;
        let obs: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let pred: Vec<f64> = test.iter().map(|&i| model.predict(&x[i])).collect();
        let r2 = r_squared(&obs, &pred);
        r2_sum += if r2.is_finite() { r2 } else { 0.0 };
        mae_sum += mean_abs_error(&obs, &pred);
    }
    Ok((r2_sum / k as f64, mae_sum / k as f64))
}
