//! Closed-loop runs: simulator, monitor and one auto-scaler variant.

use std::fmt;
use std::str::FromStr;

use log::debug;
use rand_chacha::ChaCha8Rng;

use crate::decider::{cool_down_time, decide, DeciderConfig, DeciderState, Models, Observation, Trigger, Verdict};
use crate::error::{EvalError, SimError};
use crate::forecast::regression::{
    fit_performance_model, fit_scaling_time, forecast_scaling_time, PerfRow, PerformanceModels, ScalingTimeRow,
};
use crate::forecast::trend::{fit_trend_model, TrendFitParams};
use crate::forecast::TrainingSets;
use crate::metrics::{emit_period, preprocess, CleanSample, MetricsParams};
use crate::seed::{stream_rng, sub_seed, STREAM_METRICS, STREAM_PROFILING, STREAM_SCALING};
use crate::sim::{begin_scaling, step, ScalingEvent, ScalingKind, ServiceConfig, SimParams, SystemState, WorkloadPoint};
use crate::workload::{generate, WorkloadKind, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Flas,
    ProactiveOnly,
    ReactiveOnly,
    CpuThreshold,
    NoScaling,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Flas, Variant::ProactiveOnly, Variant::ReactiveOnly, Variant::CpuThreshold, Variant::NoScaling];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Flas => "flas",
            Variant::ProactiveOnly => "proactive_only",
            Variant::ReactiveOnly => "reactive_only",
            Variant::CpuThreshold => "cpu_threshold",
            Variant::NoScaling => "no_scaling",
        }
    }

    pub fn needs_models(&self) -> bool {
        matches!(self, Variant::Flas | Variant::ProactiveOnly | Variant::ReactiveOnly)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| EvalError::Invalid(format!("unknown variant {s:?}")))
    }
}

/// Baseline rule on the monitored CPU: act when the level has been beyond a
/// bound for more than `periods` consecutive monitoring periods.
#[derive(Debug, Clone, PartialEq)]
pub struct CpuRule {
    pub upper_pct: f64,
    pub lower_pct: f64,
    pub periods: u32,
}

impl Default for CpuRule {
    fn default() -> Self {
        Self { upper_pct: 80.0, lower_pct: 40.0, periods: 2 }
    }
}

/// Workload rule used while profiling: stored subscriptions per matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilingThresholds {
    pub subs_per_matcher_high: f64,
    pub subs_per_matcher_low: f64,
    /// Quiet ticks after a scaling action completes.
    pub hold_ticks: u64,
}

impl Default for ProfilingThresholds {
    fn default() -> Self {
        Self { subs_per_matcher_high: 50_000.0, subs_per_matcher_low: 15_000.0, hold_ticks: 3 }
    }
}

/// Everything a run needs besides the workload and the models.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub sim: SimParams,
    pub metrics: MetricsParams,
    pub decider: DeciderConfig,
    pub trend: TrendFitParams,
    pub profiling: ProfilingThresholds,
    pub cpu: CpuRule,
    /// seconds
    pub sla_max_rt: f64,
    pub initial_config: ServiceConfig,
    /// Workload of the shared profiling run.
    pub profiling_workload: WorkloadSpec,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            metrics: MetricsParams::default(),
            decider: DeciderConfig::default(),
            trend: TrendFitParams::default(),
            profiling: ProfilingThresholds::default(),
            cpu: CpuRule::default(),
            sla_max_rt: 1.0,
            initial_config: ServiceConfig::minimal(),
            profiling_workload: WorkloadSpec::default_for(WorkloadKind::ProfilingMix),
        }
    }
}

impl Experiment {
    pub fn decider_for(&self, variant: Variant) -> DeciderConfig {
        match variant {
            Variant::ProactiveOnly => self.decider.proactive_only(),
            Variant::ReactiveOnly => self.decider.reactive_only(),
            _ => self.decider.clone(),
        }
    }

    /// Trend settings for a scenario: seasonal scenarios use their own period.
    pub fn trend_for(&self, spec: &WorkloadSpec) -> TrendFitParams {
        if spec.kind.is_seasonal() {
            TrendFitParams { seasonal_period: spec.period, ..self.trend.clone() }
        } else {
            self.trend.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub notif_rate: f64,
    pub sub_rate: f64,
    pub unsub_rate: f64,
    pub stored_subs: f64,
    pub matchers: u32,
    pub queue: f64,
    pub rt: f64,
    pub rt_est: Option<f64>,
    pub throughput: f64,
    pub capacity: f64,
    pub cpu_user: f64,
    pub cooldown: u64,
    pub decision: Verdict,
    pub trigger: Trigger,
    /// Index into `RunTrace::events` of the action in flight, if any.
    pub event_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub scenario: String,
    pub variant: Variant,
    pub seed: u64,
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    pub events: Vec<ScalingEvent>,
}

impl RunTrace {
    pub fn duration_seconds(&self) -> f64 {
        self.rows.len() as f64 * self.dt
    }
}

/// Per-tick loop state of the CPU baseline.
#[derive(Debug, Default)]
struct CpuState {
    above: u32,
    below: u32,
    cooldown: u64,
}

fn sim_err(t: u64) -> impl Fn(SimError) -> EvalError {
    move |source| EvalError::Sim { t, source }
}

/// Run `variant` on a generated scenario.
pub fn run_scenario(
    spec: &WorkloadSpec,
    variant: Variant,
    models: Option<&Models>,
    exp: &Experiment,
    seed: u64,
) -> Result<RunTrace, EvalError> {
    let points = generate(spec)?;
    run_workload(spec.kind.as_str(), &points, variant, models, exp, seed)
}

/// Run `variant` on an explicit workload series (ticks 1..=n).
pub fn run_workload(
    scenario: &str,
    points: &[WorkloadPoint],
    variant: Variant,
    models: Option<&Models>,
    exp: &Experiment,
    seed: u64,
) -> Result<RunTrace, EvalError> {
    exp.sim.validate().map_err(sim_err(0))?;
    if points.is_empty() {
        return Err(EvalError::EmptyTrace);
    }
    let models = match (variant.needs_models(), models) {
        (true, None) => return Err(EvalError::MissingModels(variant.to_string())),
        (_, m) => m,
    };
    let cfg = exp.decider_for(variant);
    if variant.needs_models() {
        cfg.validate().map_err(EvalError::Invalid)?;
    }
    let dt = exp.sim.dt;
    let mut scaling_rng = stream_rng(seed, STREAM_SCALING);
    let mut metrics_rng = stream_rng(seed, STREAM_METRICS);

    let mut state = SystemState::initial(exp.initial_config, 0.0, &exp.sim);
    let mut dstate = DeciderState::default();
    let mut cpu = CpuState::default();
    let mut rt_hist: Vec<f64> = Vec::with_capacity(points.len());
    let mut rows = Vec::with_capacity(points.len());
    let mut events: Vec<ScalingEvent> = Vec::new();
    let mut quiet_from = 0u64;

    for wp in points {
        state = step(&state, wp, &exp.sim);
        let t = state.t;
        let window = emit_period(&state, wp, &exp.sim, &exp.metrics, &mut metrics_rng);
        let clean = preprocess(&window, exp.metrics.outlier_k).expect("period windows are non-empty");

        let (decision, trigger, t_pred, rt_est, cooldown) = match variant {
            Variant::NoScaling => (Verdict::None, Trigger::None, None, None, 0),
            Variant::CpuThreshold => {
                let (v, tr) = cpu_rule(&mut cpu, &clean, &state, &exp.cpu);
                let pred = models.map(|m| forecast_scaling_time(&m.scaling_time, wp.notif_rate, state.stored_subs, dt));
                (v, tr, pred, None, cpu.cooldown)
            }
            _ => {
                let m = models.expect("checked above");
                // the trend history restarts when the cool-down after an action ends
                let since = rt_hist.len().saturating_sub(t.saturating_sub(quiet_from) as usize);
                let hist_start = since.max(rt_hist.len().saturating_sub(cfg.history_window));
                let obs = Observation {
                    t0: t,
                    wp,
                    stored_subs: state.stored_subs,
                    config: state.config,
                    sample: &clean,
                    rt_history: &rt_hist[hist_start..],
                };
                let out = decide(&obs, &dstate, m, &cfg, dt);
                rt_hist.push(out.rt_estimate);
                dstate = out.state;
                let d = out.decision;
                (d.verdict, d.trigger, d.t_sa_pred, Some(out.rt_estimate), dstate.cooldown)
            }
        };

        let mut cooldown = cooldown;
        if decision != Verdict::None {
            let kind = if decision == Verdict::ScaleOut { ScalingKind::ScaleOut } else { ScalingKind::ScaleIn };
            let predicted = t_pred.unwrap_or(f64::NAN);
            match begin_scaling(&state, kind, predicted, wp, &exp.sim, &mut scaling_rng) {
                Ok(next) => {
                    let ev = next.in_scaling.clone().expect("begin_scaling sets the event");
                    cooldown = cool_down_time(ev.t_actual, cfg.cooldown_multiplier, &state.config, dt);
                    debug!("{scenario}/{variant} t={t}: {} {} -> {}", ev.kind, ev.config_before, ev.config_after);
                    quiet_from = t + cooldown + 1;
                    events.push(ev);
                    state = next;
                    match variant {
                        Variant::CpuThreshold => cpu.cooldown = cooldown,
                        _ => dstate.cooldown = cooldown,
                    }
                }
                // the verdict stands in the trace but nothing can start
                Err(SimError::ScalingInProgress { .. }) => {}
                Err(e) => return Err(sim_err(t)(e)),
            }
        }

        rows.push(TraceRow {
            t,
            notif_rate: wp.notif_rate,
            sub_rate: wp.sub_rate,
            unsub_rate: wp.unsub_rate,
            stored_subs: state.stored_subs,
            matchers: state.matchers(),
            queue: state.queue,
            rt: state.rt,
            rt_est,
            throughput: state.throughput,
            capacity: state.capacity,
            cpu_user: clean.sample.cpu_user,
            cooldown,
            decision,
            trigger,
            event_id: state.in_scaling.as_ref().map(|_| events.len() - 1),
        });
    }
    Ok(RunTrace { scenario: scenario.to_string(), variant, seed, dt, rows, events })
}

fn cpu_rule(cpu: &mut CpuState, clean: &CleanSample, state: &SystemState, rule: &CpuRule) -> (Verdict, Trigger) {
    let u = clean.sample.cpu_user;
    cpu.above = if u > rule.upper_pct { cpu.above + 1 } else { 0 };
    cpu.below = if u < rule.lower_pct { cpu.below + 1 } else { 0 };
    if cpu.cooldown > 0 {
        cpu.cooldown -= 1;
        return (Verdict::None, Trigger::Cooldown);
    }
    if cpu.above > rule.periods {
        cpu.above = 0;
        (Verdict::ScaleOut, Trigger::Reactive)
    } else if cpu.below > rule.periods && state.matchers() > 1 {
        cpu.below = 0;
        (Verdict::ScaleIn, Trigger::Reactive)
    } else {
        (Verdict::None, Trigger::None)
    }
}

/// Profiling phase: threshold rules on stored subscriptions per matcher
/// drive the scaling while every tick is recorded for training.
pub fn profiling_run(specs: &[WorkloadSpec], exp: &Experiment, seed: u64) -> Result<TrainingSets, EvalError> {
    if specs.is_empty() {
        return Err(EvalError::Invalid("profiling needs at least one workload".into()));
    }
    exp.sim.validate().map_err(sim_err(0))?;
    let th = &exp.profiling;
    let mut sets = TrainingSets::default();
    let mut offset = 0u64;
    for (i, spec) in specs.iter().enumerate() {
        let points = generate(spec)?;
        let s = sub_seed(seed, i as u64);
        let mut scaling_rng: ChaCha8Rng = stream_rng(s, STREAM_SCALING);
        let mut metrics_rng = stream_rng(s, STREAM_METRICS);
        let mut state = SystemState::initial(exp.initial_config, 0.0, &exp.sim);
        let mut hold = 0u64;
        for wp in &points {
            state = step(&state, wp, &exp.sim);
            let window = emit_period(&state, wp, &exp.sim, &exp.metrics, &mut metrics_rng);
            let clean = preprocess(&window, exp.metrics.outlier_k).expect("period windows are non-empty");
            sets.rt_series.push((offset + state.t, state.rt));
            sets.perf_rows.push(PerfRow { sample: clean, rt: state.rt, throughput: state.throughput });

            if state.in_scaling.is_some() {
                hold = th.hold_ticks;
                continue;
            }
            if hold > 0 {
                hold -= 1;
                continue;
            }
            let per_matcher = state.stored_subs / f64::from(state.matchers());
            let kind = if per_matcher > th.subs_per_matcher_high {
                Some(ScalingKind::ScaleOut)
            } else if per_matcher < th.subs_per_matcher_low && state.matchers() > 1 {
                Some(ScalingKind::ScaleIn)
            } else {
                None
            };
            if let Some(kind) = kind {
                match begin_scaling(&state, kind, f64::NAN, wp, &exp.sim, &mut scaling_rng) {
                    Ok(next) => {
                        let ev = next.in_scaling.as_ref().expect("event set");
                        // sub-tick measurement of the action's duration
                        sets.scaling_times.push(ScalingTimeRow {
                            notif_rate: ev.notif_rate,
                            stored_subs: ev.stored_subs,
                            t_sa: ev.t_raw,
                        });
                        state = next;
                    }
                    Err(SimError::AtMaximum { .. }) => {}
                    Err(e) => return Err(sim_err(state.t)(e)),
                }
            }
        }
        offset += points.len() as u64;
    }
    if sets.scaling_times.is_empty() {
        return Err(EvalError::NoScalingEventsRecorded);
    }
    Ok(sets)
}

/// Fit all predictors from one training set.
pub fn train_models(
    sets: &TrainingSets,
    trend: &TrendFitParams,
    dt: f64,
) -> Result<(Models, PerformanceModels), crate::error::ForecastError> {
    let scaling_time = fit_scaling_time(&sets.scaling_times)?;
    let perf = fit_performance_model(&sets.perf_rows)?;
    let trend = fit_trend_model(&sets.rt_series, dt, trend)?;
    Ok((Models { scaling_time, trend, rt_model: perf.rt_model.clone() }, perf))
}

/// Shared predictors from the profiling mix plus a trend model fitted to a
/// profiling run of the scenario itself.
pub fn prepare_models(spec: &WorkloadSpec, exp: &Experiment, train_seed: u64) -> Result<Models, EvalError> {
    let general = general_training(exp, train_seed)?;
    scenario_models(&general, spec, exp, train_seed)
}

/// Profiling-mix training set used for the scaling-time and performance models.
pub fn general_training(exp: &Experiment, train_seed: u64) -> Result<TrainingSets, EvalError> {
    let s = sub_seed(train_seed, STREAM_PROFILING);
    let mix = exp.profiling_workload.with_seed(s);
    profiling_run(&[mix], exp, s)
}

pub fn scenario_models(
    general: &TrainingSets,
    spec: &WorkloadSpec,
    exp: &Experiment,
    train_seed: u64,
) -> Result<Models, EvalError> {
    let fe = |source| EvalError::Forecast { t: 0, source };
    let scaling_time = fit_scaling_time(&general.scaling_times).map_err(fe)?;
    let perf = fit_performance_model(&general.perf_rows).map_err(fe)?;
    let s = sub_seed(sub_seed(train_seed, STREAM_PROFILING), 1 + spec.kind as u64);
    let own = profiling_run(&[spec.with_seed(s)], exp, s).or_else(|e| match e {
        // a scenario that never crosses the profiling thresholds still has an RT series
        EvalError::NoScalingEventsRecorded => rt_only_profile(spec.with_seed(s), exp, s),
        other => Err(other),
    })?;
    let trend = fit_trend_model(&own.rt_series, exp.sim.dt, &exp.trend_for(spec)).map_err(fe)?;
    Ok(Models { scaling_time, trend, rt_model: perf.rt_model })
}

fn rt_only_profile(spec: WorkloadSpec, exp: &Experiment, seed: u64) -> Result<TrainingSets, EvalError> {
    let trace = run_scenario(&spec, Variant::NoScaling, None, exp, seed)?;
    Ok(TrainingSets { rt_series: trace.rows.iter().map(|r| (r.t, r.rt)).collect(), ..TrainingSets::default() })
}
