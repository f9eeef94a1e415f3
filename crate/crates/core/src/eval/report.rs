//! Demand points and the provisioning, SLA and scaling-time metrics.

use std::fmt;

use crate::error::{EvalError, SimError};
use crate::eval::runner::{run_workload, Experiment, RunTrace, Variant};
use crate::sim::{minimal_sufficient_matchers, ScalingEvent, ScalingKind, WorkloadPoint};
use crate::workload::{generate, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    fn of(kind: ScalingKind) -> Self {
        match kind {
            ScalingKind::ScaleOut => Direction::Up,
            ScalingKind::ScaleIn => Direction::Down,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandPoint {
    pub t_dp: u64,
    pub required_matchers: u32,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandSchedule {
    pub points: Vec<DemandPoint>,
    /// Ticks of the run the schedule was derived from.
    pub duration: u64,
}

/// Demand schedule of a generated scenario.
pub fn demand_points(spec: &WorkloadSpec, exp: &Experiment) -> Result<DemandSchedule, EvalError> {
    let points = generate(spec)?;
    demand_points_for(&points, exp)
}

/// Minimal sufficient matcher count along the no-scaling baseline, reported at every change.
pub fn demand_points_for(points: &[WorkloadPoint], exp: &Experiment) -> Result<DemandSchedule, EvalError> {
    let base = run_workload("baseline", points, Variant::NoScaling, None, exp, 0)?;
    let mut current = exp.initial_config.matcher_instances;
    let mut out = Vec::new();
    for (row, wp) in base.rows.iter().zip(points) {
        let need = minimal_sufficient_matchers(wp, row.stored_subs, &exp.sim, exp.sla_max_rt)
            .map_err(|source: SimError| EvalError::Sim { t: row.t, source })?;
        if need != current {
            let direction = if need > current { Direction::Up } else { Direction::Down };
            out.push(DemandPoint { t_dp: row.t, required_matchers: need, direction });
            current = need;
        }
    }
    Ok(DemandSchedule { points: out, duration: points.len() as u64 })
}

/// Seconds of over- and under-provisioning.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Provisioning {
    pub over_s: f64,
    pub under_s: f64,
}

/// Pair every demand point with the same-direction event whose RP is
/// nearest, greedily by distance.
pub fn pair_events(schedule: &DemandSchedule, events: &[ScalingEvent]) -> Vec<(usize, Option<usize>)> {
    let mut candidates: Vec<(u64, usize, usize)> = Vec::new();
    for (i, dp) in schedule.points.iter().enumerate() {
        for (j, ev) in events.iter().enumerate() {
            if Direction::of(ev.kind) == dp.direction {
                candidates.push((ev.rp.abs_diff(dp.t_dp), i, j));
            }
        }
    }
    candidates.sort_unstable();
    let mut dp_match = vec![None; schedule.points.len()];
    let mut ev_used = vec![false; events.len()];
    for (_, i, j) in candidates {
        if dp_match[i].is_none() && !ev_used[j] {
            dp_match[i] = Some(j);
            ev_used[j] = true;
        }
    }
    dp_match.into_iter().enumerate().collect()
}

/// Over/under-provisioning time of a run against its demand schedule.
///
/// A paired scale-out that lands after its demand point is under-provisioned
/// for the gap, one that lands before is over-provisioned; scale-in is the
/// reverse. Unpaired demand points accrue to the end of the run. Unpaired
/// events hold the wrong resources from their RP until the next RP.
pub fn provisioning(trace: &RunTrace, schedule: &DemandSchedule) -> Result<Provisioning, EvalError> {
    if trace.rows.len() as u64 != schedule.duration {
        return Err(EvalError::MismatchedRuns(format!(
            "trace has {} ticks, schedule {}",
            trace.rows.len(),
            schedule.duration
        )));
    }
    let dt = trace.dt;
    let end = trace.rows.last().map_or(0, |r| r.t);
    let mut p = Provisioning::default();
    let pairs = pair_events(schedule, &trace.events);
    let mut used = vec![false; trace.events.len()];
    for (i, m) in pairs {
        let dp = &schedule.points[i];
        match m {
            Some(j) => {
                used[j] = true;
                let rp = trace.events[j].rp;
                let late = rp > dp.t_dp;
                let gap = rp.abs_diff(dp.t_dp) as f64 * dt;
                match (dp.direction, late) {
                    (Direction::Up, true) | (Direction::Down, false) => p.under_s += gap,
                    (Direction::Up, false) | (Direction::Down, true) => p.over_s += gap,
                }
            }
            None => {
                let gap = end.saturating_sub(dp.t_dp) as f64 * dt;
                match dp.direction {
                    Direction::Up => p.under_s += gap,
                    Direction::Down => p.over_s += gap,
                }
            }
        }
    }
    let mut rps: Vec<u64> = trace.events.iter().map(|e| e.rp).collect();
    rps.sort_unstable();
    for (j, ev) in trace.events.iter().enumerate() {
        if used[j] {
            continue;
        }
        let next = rps.iter().copied().find(|&r| r > ev.rp).unwrap_or(end).min(end);
        let gap = next.saturating_sub(ev.rp) as f64 * dt;
        match ev.kind {
            ScalingKind::ScaleOut => p.over_s += gap,
            ScalingKind::ScaleIn => p.under_s += gap,
        }
    }
    Ok(p)
}

/// `(over_pct, under_pct)` of total runtime.
pub fn provisioning_report(trace: &RunTrace, schedule: &DemandSchedule) -> Result<(f64, f64), EvalError> {
    let p = provisioning(trace, schedule)?;
    let total = trace.duration_seconds();
    Ok(((100.0 * p.over_s / total).min(100.0), (100.0 * p.under_s / total).min(100.0)))
}

/// Percentage of ticks whose response time exceeds `sla_max_rt` seconds.
pub fn sla_violation(trace: &RunTrace, sla_max_rt: f64) -> Result<f64, EvalError> {
    if trace.rows.is_empty() {
        return Err(EvalError::EmptyTrace);
    }
    let bad = trace.rows.iter().filter(|r| r.rt > sla_max_rt).count();
    Ok(100.0 * bad as f64 / trace.rows.len() as f64)
}

/// Mean durations and mean signed relative prediction errors (percent) per
/// action kind; `None` where there is no data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalingReport {
    pub n_scale_out: usize,
    pub n_scale_in: usize,
    pub avg_t_scale_out: Option<f64>,
    pub avg_t_scale_in: Option<f64>,
    pub rel_err_t_scale_out: Option<f64>,
    pub rel_err_t_scale_in: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn scaling_report(events: &[ScalingEvent]) -> ScalingReport {
    let of = |k: ScalingKind| events.iter().filter(move |e| e.kind == k);
    let rel = |e: &ScalingEvent| 100.0 * (e.t_predicted - e.t_actual) / e.t_actual;
    ScalingReport {
        n_scale_out: of(ScalingKind::ScaleOut).count(),
        n_scale_in: of(ScalingKind::ScaleIn).count(),
        avg_t_scale_out: mean(of(ScalingKind::ScaleOut).map(|e| e.t_actual)),
        avg_t_scale_in: mean(of(ScalingKind::ScaleIn).map(|e| e.t_actual)),
        rel_err_t_scale_out: mean(of(ScalingKind::ScaleOut).filter(|e| e.t_predicted.is_finite()).map(rel)),
        rel_err_t_scale_in: mean(of(ScalingKind::ScaleIn).filter(|e| e.t_predicted.is_finite()).map(rel)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub scenario: String,
    pub variant: Variant,
    pub seed: u64,
    pub over_provisioning_pct: f64,
    pub under_provisioning_pct: f64,
    pub sla_violation_pct: f64,
    pub scaling: ScalingReport,
    pub events: Vec<ScalingEvent>,
}

pub fn evaluate(trace: &RunTrace, schedule: &DemandSchedule, sla_max_rt: f64) -> Result<EvaluationReport, EvalError> {
    let (over, under) = provisioning_report(trace, schedule)?;
    Ok(EvaluationReport {
        scenario: trace.scenario.clone(),
        variant: trace.variant,
        seed: trace.seed,
        over_provisioning_pct: over,
        under_provisioning_pct: under,
        sla_violation_pct: sla_violation(trace, sla_max_rt)?,
        scaling: scaling_report(&trace.events),
        events: trace.events.clone(),
    })
}
