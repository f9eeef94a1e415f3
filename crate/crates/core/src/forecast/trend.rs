//! Response-time trend forecaster.
//!
//! The modelled series is the smoothed first derivative of the response time,
//! in milliseconds per second. Two candidates are fitted and the one with the
//! lower rolling-origin cross-validation error is kept:
//!
//! * `HarmonicAr`: a Fourier seasonal level over a fixed period plus AR(2)
//!   residuals;
//! * `PureAr`: a constant level plus AR(2) deviations.

use std::f64::consts::PI;

use crate::error::ForecastError;
use crate::forecast::linalg::lstsq;
use crate::forecast::smoothing::{first_derivative, savgol_filter};
use crate::sim::ticks_for;

/// Trend series are expressed in milliseconds of response time.
pub const RT_TREND_SCALE: f64 = 1000.0;

/// Autoregressive roots must stay this far inside the unit circle.
const STATIONARITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendKind {
    HarmonicAr,
    PureAr,
}

impl TrendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrendKind::HarmonicAr => "harmonic_ar",
            TrendKind::PureAr => "pure_ar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "harmonic_ar" => Some(TrendKind::HarmonicAr),
            "pure_ar" => Some(TrendKind::PureAr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendModel {
    pub kind: TrendKind,
    /// Seasonal period in ticks.
    pub period: u64,
    /// Constant part of the level.
    pub intercept: f64,
    /// `(a_k, b_k)` for harmonics k = 1..=K; empty for `PureAr`.
    pub fourier_coeffs: Vec<(f64, f64)>,
    pub ar_coeffs: (f64, f64),
    /// RMS of in-sample one-step residuals.
    pub residual_sigma: f64,
    pub cv_mae: f64,
}

impl TrendModel {
    /// Deterministic level at absolute tick `t`.
    pub fn level(&self, t: u64) -> f64 {
        let mut v = self.intercept;
        if self.period > 0 {
            let phase = 2.0 * PI * (t % self.period) as f64 / self.period as f64;
            for (k, (a, b)) in self.fourier_coeffs.iter().enumerate() {
                let w = (k + 1) as f64 * phase;
                v += a * w.cos() + b * w.sin();
            }
        }
        v
    }

    pub fn harmonics(&self) -> usize {
        self.fourier_coeffs.len()
    }

    /// Forecast for `ticks[i]` from the two preceding observations.
    fn one_step(&self, ticks: &[u64], y: &[f64], i: usize) -> f64 {
        let (p1, p2) = self.ar_coeffs;
        let e1 = y[i - 1] - self.level(ticks[i - 1]);
        let e2 = y[i - 2] - self.level(ticks[i - 2]);
        self.level(ticks[i]) + p1 * e1 + p2 * e2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendFitParams {
    pub seasonal_period: u64,
    pub sg_window: usize,
    pub sg_degree: usize,
    pub harmonics: usize,
    /// Trailing fraction of the series used as forecast origins.
    pub cv_fraction: f64,
    /// Upper bound on refits across the origins; the model is refitted every
    /// `ceil(origins / max_refits)` origins.
    pub max_refits: usize,
}

impl Default for TrendFitParams {
    fn default() -> Self {
        Self { seasonal_period: 60, sg_window: 11, sg_degree: 2, harmonics: 8, cv_fraction: 0.2, max_refits: 60 }
    }
}

/// `h` consecutive trend forecasts starting `ceil(t_sa_pred / dt)` ticks after `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastVector {
    pub t0: u64,
    pub t_sa_pred: f64,
    pub values: Vec<f64>,
}

/// Smoothed derivative (ms/s) of an RT series given in seconds.
pub fn trend_series(rt_seconds: &[f64], dt: f64, sg_window: usize, sg_degree: usize) -> Result<Vec<f64>, ForecastError> {
    let ms: Vec<f64> = rt_seconds.iter().map(|v| v * RT_TREND_SCALE).collect();
    let d = first_derivative(&ms, dt)?;
    savgol_filter(&d, sg_window, sg_degree)
}

fn is_stationary((p1, p2): (f64, f64)) -> bool {
    // characteristic roots of z^2 - p1 z - p2
    let disc = p1 * p1 + 4.0 * p2;
    let max_mod = if disc >= 0.0 {
        let s = disc.sqrt();
        ((p1 + s) / 2.0).abs().max(((p1 - s) / 2.0).abs())
    } else {
        (-p2).sqrt()
    };
    max_mod.is_finite() && max_mod < 1.0 - STATIONARITY_MARGIN
}

fn fourier_row(t: u64, period: u64, k: usize) -> Vec<f64> {
    let phase = 2.0 * PI * (t % period) as f64 / period as f64;
    let mut row = Vec::with_capacity(2 * k + 1);
    row.push(1.0);
    for j in 1..=k {
        let w = j as f64 * phase;
        row.push(w.cos());
        row.push(w.sin());
    }
    row
}

/// AR(2) by conditional least squares on a (roughly) zero-mean series.
fn fit_ar2(e: &[f64]) -> Result<(f64, f64), ForecastError> {
    let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if e.len() < 5 || scale < 1e-9 {
        return Ok((0.0, 0.0));
    }
    let rows: Vec<Vec<f64>> = (2..e.len()).map(|t| vec![e[t - 1], e[t - 2]]).collect();
    let y: Vec<f64> = (2..e.len()).map(|t| e[t]).collect();
    match lstsq(&rows, &y) {
        Ok(b) => Ok((b[0], b[1])),
        Err(ForecastError::RankDeficient) => Ok((0.0, 0.0)),
        Err(err) => Err(err),
    }
}

fn fit_candidate(kind: TrendKind, ticks: &[u64], y: &[f64], p: &TrendFitParams) -> Result<TrendModel, ForecastError> {
    let mut model = match kind {
        TrendKind::HarmonicAr => {
            let k = p.harmonics;
            let rows: Vec<Vec<f64>> = ticks.iter().map(|&t| fourier_row(t, p.seasonal_period, k)).collect();
            let beta = lstsq(&rows, y)?;
            let fourier_coeffs = (0..k).map(|j| (beta[1 + 2 * j], beta[2 + 2 * j])).collect();
            let mut m = TrendModel {
                kind,
                period: p.seasonal_period,
                intercept: beta[0],
                fourier_coeffs,
                ar_coeffs: (0.0, 0.0),
                residual_sigma: 0.0,
                cv_mae: f64::NAN,
            };
            let resid: Vec<f64> = ticks.iter().zip(y).map(|(&t, v)| v - m.level(t)).collect();
            m.ar_coeffs = fit_ar2(&resid)?;
            m
        }
        TrendKind::PureAr => {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
            let ar = fit_ar2(&centred)?;
            TrendModel {
                kind,
                period: p.seasonal_period,
                intercept: mean,
                fourier_coeffs: Vec::new(),
                ar_coeffs: ar,
                residual_sigma: 0.0,
                cv_mae: f64::NAN,
            }
        }
    };
    if !is_stationary(model.ar_coeffs) && model.ar_coeffs != (0.0, 0.0) {
        return Err(ForecastError::NonStationary);
    }
    let sq: f64 = (2..y.len()).map(|i| (y[i] - model.one_step(ticks, y, i)).powi(2)).sum();
    model.residual_sigma = (sq / (y.len().saturating_sub(2)).max(1) as f64).sqrt();
    Ok(model)
}

/// Indices of the rolling forecast origins over the trailing `cv_fraction`.
pub fn cv_origins(n: usize, cv_fraction: f64) -> std::ops::Range<usize> {
    let n_test = ((n as f64 * cv_fraction).ceil() as usize).clamp(1, n.saturating_sub(3).max(1));
    n - n_test..n
}

/// Rolling-origin one-step-ahead MAE of one candidate.
pub fn rolling_cv_mae(kind: TrendKind, ticks: &[u64], y: &[f64], p: &TrendFitParams) -> Result<f64, ForecastError> {
    let origins = cv_origins(y.len(), p.cv_fraction);
    let stride = origins.len().div_ceil(p.max_refits.max(1));
    let start = origins.start;
    let mut model: Option<TrendModel> = None;
    let mut err = 0.0;
    for i in origins.clone() {
        if (i - start) % stride == 0 || model.is_none() {
            model = Some(fit_candidate(kind, &ticks[..i], &y[..i], p)?);
        }
        let m = model.as_ref().expect("fitted above");
        err += (m.one_step(ticks, y, i) - y[i]).abs();
    }
    Ok(err / origins.len() as f64)
}

fn validate_params(p: &TrendFitParams) -> Result<(), ForecastError> {
    if p.seasonal_period < 2 || 2 * p.harmonics >= p.seasonal_period as usize {
        return Err(ForecastError::InvalidArgument(format!(
            "{} harmonics need a seasonal period above {}",
            p.harmonics,
            2 * p.harmonics
        )));
    }
    if p.harmonics == 0 {
        return Err(ForecastError::InvalidArgument("at least one harmonic is required".into()));
    }
    if !(p.cv_fraction > 0.0 && p.cv_fraction < 1.0) {
        return Err(ForecastError::InvalidArgument(format!("cv_fraction {} outside (0, 1)", p.cv_fraction)));
    }
    Ok(())
}

/// Fit both candidates to the smoothed derivative of `rt_series` (ticks, RT in
/// seconds) and return the one with the lower cross-validated MAE.
pub fn fit_trend_model(rt_series: &[(u64, f64)], dt: f64, p: &TrendFitParams) -> Result<TrendModel, ForecastError> {
    validate_params(p)?;
    if rt_series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(ForecastError::InvalidArgument("rt series ticks must be strictly increasing".into()));
    }
    let need = (2 * p.seasonal_period as usize).max(p.sg_window).max(2 * p.harmonics + 8);
    if rt_series.len() < need {
        return Err(ForecastError::TooShort { need, got: rt_series.len() });
    }
    let ticks: Vec<u64> = rt_series.iter().map(|r| r.0).collect();
    let rt: Vec<f64> = rt_series.iter().map(|r| r.1).collect();
    let y = trend_series(&rt, dt, p.sg_window, p.sg_degree)?;
    // edge points rest on clipped windows and one-sided differences
    let edge = p.sg_window / 2 + 1;
    let inner = edge..y.len() - edge;
    select_trend_model(&ticks[inner.clone()], &y[inner], p)
}

/// Candidate selection on an already smoothed trend series `y` observed at `ticks`.
pub fn select_trend_model(ticks: &[u64], y: &[f64], p: &TrendFitParams) -> Result<TrendModel, ForecastError> {
    if ticks.len() != y.len() {
        return Err(ForecastError::InvalidArgument(format!("{} ticks but {} values", ticks.len(), y.len())));
    }
    let need = 2 * p.harmonics + 8;
    if y.len() < need {
        return Err(ForecastError::TooShort { need, got: y.len() });
    }
    validate_params(p)?;
    let (ticks, y) = (ticks.to_vec(), y.to_vec());
    let mut best: Option<(TrendKind, f64)> = None;
    let mut last_err = ForecastError::NonStationary;
    for kind in [TrendKind::HarmonicAr, TrendKind::PureAr] {
        match rolling_cv_mae(kind, &ticks, &y, p) {
            Ok(mae) => {
                if best.is_none_or(|(_, b)| mae < b) {
                    best = Some((kind, mae));
                }
            }
            Err(ForecastError::NonStationary) => {}
            Err(e) => last_err = e,
        }
    }
    let (kind, cv_mae) = best.ok_or(last_err)?;
    let mut model = fit_candidate(kind, &ticks, &y, p)?;
    model.cv_mae = cv_mae;
    Ok(model)
}

/// Forecast the trend at `t0 + ceil(t_sa_pred / dt) + i`, i in 0..h.
///
/// `history` holds smoothed trend values whose last element is at tick
/// `history_end` (<= `t0`). The seasonal level is evaluated at the absolute
/// target ticks; the AR part is iterated forward on its own forecasts.
pub fn forecast_trend(
    model: &TrendModel,
    history: &[f64],
    history_end: u64,
    t0: u64,
    t_sa_pred: f64,
    h: usize,
    dt: f64,
) -> Result<ForecastVector, ForecastError> {
    if history.len() < 2 || history_end < 1 {
        return Err(ForecastError::InsufficientHistory { need: 2, got: history.len() });
    }
    if h == 0 || history_end > t0 {
        return Err(ForecastError::InvalidArgument(format!("h = {h}, history end {history_end}, t0 {t0}")));
    }
    let first = t0 + ticks_for(t_sa_pred, dt);
    let last = first + h as u64 - 1;
    let (p1, p2) = model.ar_coeffs;
    let n = history.len();
    let mut e1 = history[n - 1] - model.level(history_end);
    let mut e2 = history[n - 2] - model.level(history_end - 1);
    let mut values = Vec::with_capacity(h);
    for t in history_end + 1..=last {
        let e = p1 * e1 + p2 * e2;
        e2 = e1;
        e1 = e;
        if t >= first {
            values.push(model.level(t) + e);
        }
    }
    Ok(ForecastVector { t0, t_sa_pred, values })
}
