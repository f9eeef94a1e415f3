//! Per-tick scaling decision combining trend forecasts (proactive) with
//! thresholds on the estimated response time (reactive).

use std::collections::VecDeque;
use std::fmt;

use log::warn;

use crate::error::ForecastError;
use crate::forecast::regression::{estimate_rt, forecast_scaling_time, LinearModel};
use crate::forecast::trend::{forecast_trend, trend_series, ForecastVector, TrendModel};
use crate::metrics::CleanSample;
use crate::sim::{ServiceConfig, WorkloadPoint, MAX_MATCHERS};

/// Entries kept in the estimate buffer between scaling actions.
const BUFFER_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct DeciderConfig {
    pub h: usize,
    pub react_w: usize,
    /// ms of RT per second.
    pub inc_trend_th: f64,
    pub dec_trend_th: f64,
    /// seconds
    pub react_upper_th: f64,
    pub react_lower_th: f64,
    pub majority: usize,
    pub cooldown_multiplier: f64,
    /// RT estimates fed to the trend forecaster.
    pub history_window: usize,
    pub sg_window: usize,
    pub sg_degree: usize,
}

impl Default for DeciderConfig {
    fn default() -> Self {
        Self {
            h: 4,
            react_w: 2,
            inc_trend_th: 0.9,
            dec_trend_th: -0.9,
            react_upper_th: 0.750,
            react_lower_th: 0.010,
            majority: 3,
            cooldown_multiplier: 2.0,
            history_window: 48,
            sg_window: 11,
            sg_degree: 2,
        }
    }
}

impl DeciderConfig {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.h >= 1
            && (1..=self.h).contains(&self.majority)
            && self.react_w >= 1
            && self.dec_trend_th < 0.0
            && 0.0 < self.inc_trend_th
            && 0.0 < self.react_lower_th
            && self.react_lower_th < self.react_upper_th
            && self.cooldown_multiplier >= 0.0
            && self.history_window >= self.sg_window;
        if ok {
            Ok(())
        } else {
            Err(format!("invalid decider configuration {self:?}"))
        }
    }

    /// Trend conditions switched off.
    pub fn reactive_only(&self) -> Self {
        Self { inc_trend_th: f64::INFINITY, dec_trend_th: f64::NEG_INFINITY, ..self.clone() }
    }

    /// Threshold conditions switched off.
    pub fn proactive_only(&self) -> Self {
        Self { react_w: usize::MAX, ..self.clone() }
    }
}

/// Recent RT estimates `(t, seconds)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateBuffer {
    values: VecDeque<(u64, f64)>,
}

impl EstimateBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: &[(u64, f64)]) -> Self {
        let mut b = Self::new();
        for &(t, v) in values {
            b.push(t, v);
        }
        b
    }

    /// Appends unless `t` does not advance past the last entry.
    pub fn push(&mut self, t: u64, rt: f64) {
        if self.values.back().is_some_and(|&(last, _)| last >= t) {
            return;
        }
        if self.values.len() == BUFFER_CAP {
            self.values.pop_front();
        }
        self.values.push_back((t, rt));
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last_n(&self, n: usize) -> Option<impl Iterator<Item = f64> + '_> {
        (n <= self.values.len()).then(|| self.values.iter().skip(self.values.len() - n).map(|v| v.1))
    }

    pub fn values(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    None,
    ScaleOut,
    ScaleIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    None,
    Proactive,
    Reactive,
    Cooldown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::ScaleOut => "scale_out",
            Verdict::ScaleIn => "scale_in",
        }
    }
}

impl Trigger {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trigger::None => "none",
            Trigger::Proactive => "proactive",
            Trigger::Reactive => "reactive",
            Trigger::Cooldown => "cooldown",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub trigger: Trigger,
    pub t_sa_pred: Option<f64>,
}

impl Decision {
    pub const fn none(trigger: Trigger) -> Self {
        Self { verdict: Verdict::None, trigger, t_sa_pred: None }
    }
}

/// Fitted predictors used by [`decide`].
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub scaling_time: LinearModel,
    pub trend: TrendModel,
    pub rt_model: LinearModel,
}

/// Loop state carried between ticks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeciderState {
    pub buffer: EstimateBuffer,
    pub cooldown: u64,
}

/// Everything observed at tick `t0`.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub t0: u64,
    pub wp: &'a WorkloadPoint,
    pub stored_subs: f64,
    pub config: ServiceConfig,
    pub sample: &'a CleanSample,
    /// RT estimates (seconds) of the ticks before `t0`, oldest first.
    pub rt_history: &'a [f64],
}

/// Forecasts and estimate that feed the conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    pub t0: u64,
    pub t_sa_pred: f64,
    /// Missing while the trend history is too short; reactive checks still run.
    pub forecast: Option<ForecastVector>,
    pub rt_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub decision: Decision,
    pub state: DeciderState,
    pub rt_estimate: f64,
    pub forecast: Option<ForecastVector>,
}

pub fn inc_trend(forecast: &ForecastVector, th: f64, majority: usize) -> bool {
    forecast.values.iter().filter(|&&v| v > th).count() >= majority
}

pub fn dec_trend(forecast: &ForecastVector, th: f64, majority: usize) -> bool {
    forecast.values.iter().filter(|&&v| v < th).count() >= majority
}

pub fn rt_above_th(buffer: &EstimateBuffer, th: f64, react_w: usize) -> bool {
    buffer.last_n(react_w).is_some_and(|mut it| it.all(|v| v > th))
}

pub fn rt_below_th(buffer: &EstimateBuffer, th: f64, react_w: usize) -> bool {
    buffer.last_n(react_w).is_some_and(|mut it| it.all(|v| v < th))
}

pub fn cool_down_time(t_sa: f64, multiplier: f64, _config: &ServiceConfig, dt: f64) -> u64 {
    let ticks = (multiplier * t_sa / dt - 1e-9).ceil();
    if ticks > 0.0 {
        ticks as u64
    } else {
        0
    }
}

/// Trend forecast at `t0` from the RT estimate history (ending at `t0 - 1`).
///
/// The last `sg_window / 2 + 1` smoothed points rest on clipped windows and
/// are dropped; the AR recursion starts from the newest fully smoothed point.
pub fn trend_forecast(
    models: &Models,
    t0: u64,
    rt_history: &[f64],
    t_sa_pred: f64,
    cfg: &DeciderConfig,
    dt: f64,
) -> Result<ForecastVector, ForecastError> {
    // only points with a complete smoothing window are used, as in training
    let edge = cfg.sg_window / 2 + 1;
    let need = cfg.sg_window.max(edge + 2);
    if rt_history.len() < need || t0 <= edge as u64 + 1 {
        return Err(ForecastError::InsufficientHistory { need, got: rt_history.len() });
    }
    let start = rt_history.len().saturating_sub(cfg.history_window);
    let smoothed = trend_series(&rt_history[start..], dt, cfg.sg_window, cfg.sg_degree)?;
    let usable = &smoothed[..smoothed.len() - edge];
    forecast_trend(&models.trend, usable, t0 - 1 - edge as u64, t0, t_sa_pred, cfg.h, dt)
}

/// The condition checks, given already computed signals.
///
/// `config` bounds the verdict: no scale-in at one matcher, no scale-out at the maximum.
pub fn decide_from_signals(
    signals: Option<&Signals>,
    rt_estimate: f64,
    t0: u64,
    state: &DeciderState,
    config: &ServiceConfig,
    cfg: &DeciderConfig,
    dt: f64,
) -> (Decision, DeciderState) {
    let mut next = state.clone();
    if state.cooldown > 0 {
        next.cooldown -= 1;
        next.buffer.push(t0, rt_estimate);
        return (Decision::none(Trigger::Cooldown), next);
    }
    let Some(sig) = signals else {
        next.buffer.push(t0, rt_estimate);
        return (Decision::none(Trigger::None), next);
    };
    next.buffer.push(t0, sig.rt_estimate);
    let m = config.matcher_instances;
    let inc = sig.forecast.as_ref().is_some_and(|f| inc_trend(f, cfg.inc_trend_th, cfg.majority));
    let dec = sig.forecast.as_ref().is_some_and(|f| dec_trend(f, cfg.dec_trend_th, cfg.majority));

    let verdict = if m < MAX_MATCHERS && inc {
        Some((Verdict::ScaleOut, Trigger::Proactive))
    } else if m < MAX_MATCHERS && rt_above_th(&next.buffer, cfg.react_upper_th, cfg.react_w) {
        Some((Verdict::ScaleOut, Trigger::Reactive))
    } else if m > 1 && dec {
        Some((Verdict::ScaleIn, Trigger::Proactive))
    } else if m > 1 && rt_below_th(&next.buffer, cfg.react_lower_th, cfg.react_w) {
        Some((Verdict::ScaleIn, Trigger::Reactive))
    } else {
        None
    };
    match verdict {
        Some((verdict, trigger)) => {
            next.buffer.clear();
            // provisional; the loop replaces it with the measured duration
            next.cooldown = cool_down_time(sig.t_sa_pred, cfg.cooldown_multiplier, config, dt);
            (Decision { verdict, trigger, t_sa_pred: Some(sig.t_sa_pred) }, next)
        }
        None => (Decision::none(Trigger::None), next),
    }
}

/// One pass of the decision loop at `obs.t0`.
///
/// A failed trend forecast leaves only the reactive conditions for this tick.
pub fn decide(obs: &Observation<'_>, state: &DeciderState, models: &Models, cfg: &DeciderConfig, dt: f64) -> Outcome {
    let rt_estimate = estimate_rt(&models.rt_model, obs.sample);
    if state.cooldown > 0 {
        let (decision, state) = decide_from_signals(None, rt_estimate, obs.t0, state, &obs.config, cfg, dt);
        return Outcome { decision, state, rt_estimate, forecast: None };
    }
    let t_sa_pred = forecast_scaling_time(&models.scaling_time, obs.wp.notif_rate, obs.stored_subs, dt);
    let forecast = match trend_forecast(models, obs.t0, obs.rt_history, t_sa_pred, cfg, dt) {
        Ok(f) => Some(f),
        Err(ForecastError::InsufficientHistory { .. }) => None,
        Err(e) => {
            warn!("tick {}: trend forecast unavailable: {e}", obs.t0);
            None
        }
    };
    let signals = Signals { t0: obs.t0, t_sa_pred, forecast, rt_estimate };
    let (decision, state) = decide_from_signals(Some(&signals), rt_estimate, obs.t0, state, &obs.config, cfg, dt);
    Outcome { decision, state, rt_estimate, forecast: signals.forecast }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: &[f64]) -> ForecastVector {
        ForecastVector { t0: 10, t_sa_pred: 2.5, values: values.to_vec() }
    }

    fn buf(values: &[f64]) -> EstimateBuffer {
        let v: Vec<(u64, f64)> = values.iter().enumerate().map(|(i, &x)| (i as u64 + 1, x)).collect();
        EstimateBuffer::from_values(&v)
    }

    #[test]
    fn trend_conditions() {
        assert!(inc_trend(&fv(&[1.0; 4]), 0.9, 3));
        assert!(!inc_trend(&fv(&[1.0, 0.5, 1.0, 0.5]), 0.9, 3));
        assert!(inc_trend(&fv(&[0.91, 0.91, 0.91, 0.0]), 0.9, 3));
        assert!(dec_trend(&fv(&[-1.0; 4]), -0.9, 3));
        assert!(!dec_trend(&fv(&[0.0; 4]), -0.9, 3));
        assert!(!dec_trend(&fv(&[-0.91, -0.91, 0.0, 0.0]), -0.9, 3));
    }

    #[test]
    fn reactive_conditions() {
        assert!(rt_above_th(&buf(&[0.8, 0.8]), 0.75, 2));
        assert!(!rt_above_th(&buf(&[0.8]), 0.75, 2));
        assert!(!rt_above_th(&buf(&[0.8, 0.7]), 0.75, 2));
        assert!(rt_below_th(&buf(&[0.005, 0.005]), 0.010, 2));
        assert!(!rt_below_th(&buf(&[0.005]), 0.010, 2));
        assert!(!rt_below_th(&buf(&[0.005, 0.02]), 0.010, 2));
    }

    #[test]
    fn cooldown_examples() {
        let c = ServiceConfig::minimal();
        assert_eq!(cool_down_time(2.5, 2.0, &c, 1.0), 5);
        assert_eq!(cool_down_time(2.5, 0.0, &c, 1.0), 0);
        assert_eq!(cool_down_time(0.4, 2.0, &c, 1.0), 1);
    }

    #[test]
    fn cooldown_gate() {
        let cfg = DeciderConfig::default();
        let state = DeciderState { buffer: EstimateBuffer::new(), cooldown: 3 };
        let sig = Signals { t0: 5, t_sa_pred: 2.5, forecast: Some(fv(&[5.0; 4])), rt_estimate: 2.0 };
        let (d, next) = decide_from_signals(Some(&sig), 2.0, 5, &state, &ServiceConfig::minimal(), &cfg, 1.0);
        assert_eq!(d, Decision::none(Trigger::Cooldown));
        assert_eq!(next.cooldown, 2);
        assert_eq!(next.buffer.len(), 1);
    }

    #[test]
    fn proactive_and_reactive_verdicts() {
        let cfg = DeciderConfig::default();
        let cfg_m2 = ServiceConfig::new(1, 2, 1).unwrap();
        let state = DeciderState { buffer: buf(&[0.1]), cooldown: 0 };
        let sig = Signals { t0: 5, t_sa_pred: 2.5, forecast: Some(fv(&[1.0; 4])), rt_estimate: 0.1 };
        let (d, next) = decide_from_signals(Some(&sig), 0.1, 5, &state, &cfg_m2, &cfg, 1.0);
        assert_eq!((d.verdict, d.trigger), (Verdict::ScaleOut, Trigger::Proactive));
        assert!(next.buffer.is_empty() && next.cooldown == 5);

        let state = DeciderState { buffer: buf(&[0.9]), cooldown: 0 };
        let sig = Signals { t0: 5, t_sa_pred: 2.5, forecast: Some(fv(&[0.0; 4])), rt_estimate: 0.9 };
        let (d, _) = decide_from_signals(Some(&sig), 0.9, 5, &state, &cfg_m2, &cfg, 1.0);
        assert_eq!((d.verdict, d.trigger), (Verdict::ScaleOut, Trigger::Reactive));

        let state = DeciderState { buffer: buf(&[0.005]), cooldown: 0 };
        let sig = Signals { t0: 5, t_sa_pred: 2.5, forecast: Some(fv(&[-1.0; 4])), rt_estimate: 0.005 };
        let (d, _) = decide_from_signals(Some(&sig), 0.005, 5, &state, &cfg_m2, &cfg, 1.0);
        assert_eq!(d.verdict, Verdict::ScaleIn);
        // no scale-in below one matcher
        let (d, _) = decide_from_signals(Some(&sig), 0.005, 5, &state, &ServiceConfig::minimal(), &cfg, 1.0);
        assert_eq!(d.verdict, Verdict::None);
    }

    #[test]
    fn buffer_keeps_increasing_ticks() {
        let mut b = EstimateBuffer::new();
        b.push(3, 1.0);
        b.push(3, 2.0);
        b.push(2, 2.0);
        b.push(4, 0.5);
        assert_eq!(b.values().collect::<Vec<_>>(), vec![(3, 1.0), (4, 0.5)]);
    }
}
