//! CSV forms of traces, scaling events and reports.

use std::io::{Read, Write};

use crate::decider::{Trigger, Verdict};
use crate::error::EvalError;
use crate::eval::compare::CompareCell;
use crate::eval::report::EvaluationReport;
use crate::eval::runner::{RunTrace, TraceRow, Variant};
use crate::forecast::regression::{PerfRow, ScalingTimeRow};
use crate::metrics::{CleanSample, MetricSample, CHANNEL_NAMES, N_CHANNELS};
use crate::sim::{ScalingEvent, ScalingKind, ServiceConfig};

pub const TRACE_HEADER: [&str; 13] = [
    "t",
    "notif_rate",
    "sub_rate",
    "stored_subs",
    "matchers",
    "queue",
    "rt_ms",
    "rt_est_ms",
    "throughput",
    "cooldown",
    "decision",
    "trigger",
    "event_id",
];

const EVENT_HEADER: [&str; 10] =
    ["event_id", "kind", "tp", "rp", "t_actual", "t_predicted", "matchers_before", "matchers_after", "notif_rate", "stored_subs"];

pub const REPORT_HEADER: [&str; 13] = [
    "scenario",
    "variant",
    "seed",
    "over_provisioning_pct",
    "under_provisioning_pct",
    "sla_violation_pct",
    "avg_t_scale_in",
    "avg_t_scale_out",
    "rel_err_t_scale_in",
    "rel_err_t_scale_out",
    "n_scale_in",
    "n_scale_out",
    "events",
];

fn csv_err(e: impl std::fmt::Display) -> EvalError {
    EvalError::Invalid(format!("csv: {e}"))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Trace rows; with `full_precision` the RT columns are followed by `rt_s,rt_est_s`.
pub fn write_trace<W: Write>(w: W, trace: &RunTrace, full_precision: bool) -> Result<(), EvalError> {
    let mut wr = writer(w);
    let mut header: Vec<&str> = TRACE_HEADER.to_vec();
    if full_precision {
        header.extend(["rt_s", "rt_est_s"]);
    }
    wr.write_record(&header).map_err(csv_err)?;
    for r in &trace.rows {
        let mut rec = vec![
            r.t.to_string(),
            r.notif_rate.to_string(),
            r.sub_rate.to_string(),
            r.stored_subs.to_string(),
            r.matchers.to_string(),
            r.queue.to_string(),
            format!("{:.0}", r.rt * 1000.0),
            r.rt_est.map_or(String::new(), |v| format!("{:.0}", v * 1000.0)),
            r.throughput.to_string(),
            r.cooldown.to_string(),
            r.decision.as_str().to_string(),
            r.trigger.as_str().to_string(),
            r.event_id.map_or(String::new(), |i| i.to_string()),
        ];
        if full_precision {
            rec.push(r.rt.to_string());
            rec.push(r.rt_est.map_or(String::new(), |v| v.to_string()));
        }
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn write_events<W: Write>(w: W, events: &[ScalingEvent]) -> Result<(), EvalError> {
    let mut wr = writer(w);
    wr.write_record(EVENT_HEADER).map_err(csv_err)?;
    for (i, e) in events.iter().enumerate() {
        wr.write_record(&[
            i.to_string(),
            e.kind.as_str().to_string(),
            e.tp.to_string(),
            e.rp.to_string(),
            e.t_actual.to_string(),
            e.t_predicted.to_string(),
            e.config_before.matcher_instances.to_string(),
            e.config_after.matcher_instances.to_string(),
            e.notif_rate.to_string(),
            e.stored_subs.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T, EvalError> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| EvalError::Invalid(format!("csv: bad {what} in {rec:?}")))
}

fn opt<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<Option<T>, EvalError> {
    match rec.get(i).map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => parse(rec, i, what).map(Some),
    }
}

fn verdict(s: &str) -> Option<Verdict> {
    [Verdict::None, Verdict::ScaleOut, Verdict::ScaleIn].into_iter().find(|v| v.as_str() == s)
}

fn trigger(s: &str) -> Option<Trigger> {
    [Trigger::None, Trigger::Proactive, Trigger::Reactive, Trigger::Cooldown].into_iter().find(|v| v.as_str() == s)
}

/// Read a trace written by [`write_trace`] together with its events.
///
/// Millisecond-rounded RT is used unless the full-precision columns exist.
pub fn read_trace<R: Read, E: Read>(
    trace: R,
    events: E,
    scenario: &str,
    variant: Variant,
    seed: u64,
    dt: f64,
) -> Result<RunTrace, EvalError> {
    let mut rd = csv::Reader::from_reader(trace);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.len() < TRACE_HEADER.len() || header.iter().take(TRACE_HEADER.len()).ne(TRACE_HEADER) {
        return Err(EvalError::Invalid(format!("csv: unexpected trace header {header:?}")));
    }
    let full = header.len() >= TRACE_HEADER.len() + 2;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let rt_ms: f64 = parse(&rec, 6, "rt_ms")?;
        let rt_est_ms: Option<f64> = opt(&rec, 7, "rt_est_ms")?;
        let (rt, rt_est) = if full {
            (parse(&rec, 13, "rt_s")?, opt(&rec, 14, "rt_est_s")?)
        } else {
            (rt_ms / 1000.0, rt_est_ms.map(|v| v / 1000.0))
        };
        rows.push(TraceRow {
            t: parse(&rec, 0, "t")?,
            notif_rate: parse(&rec, 1, "notif_rate")?,
            sub_rate: parse(&rec, 2, "sub_rate")?,
            unsub_rate: f64::NAN,
            stored_subs: parse(&rec, 3, "stored_subs")?,
            matchers: parse(&rec, 4, "matchers")?,
            queue: parse(&rec, 5, "queue")?,
            rt,
            rt_est,
            throughput: parse(&rec, 8, "throughput")?,
            capacity: f64::NAN,
            cpu_user: f64::NAN,
            cooldown: parse(&rec, 9, "cooldown")?,
            decision: verdict(rec.get(10).unwrap_or("")).ok_or_else(|| csv_err("bad decision"))?,
            trigger: trigger(rec.get(11).unwrap_or("")).ok_or_else(|| csv_err("bad trigger"))?,
            event_id: opt(&rec, 12, "event_id")?,
        });
    }
    let mut evs = Vec::new();
    let mut rd = csv::Reader::from_reader(events);
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let kind = match rec.get(1) {
            Some("scale_out") => ScalingKind::ScaleOut,
            Some("scale_in") => ScalingKind::ScaleIn,
            other => return Err(csv_err(format!("bad event kind {other:?}"))),
        };
        let cfg = |m: u32| ServiceConfig { matcher_instances: m, ..ServiceConfig::minimal() };
        let t_actual: f64 = parse(&rec, 4, "t_actual")?;
        evs.push(ScalingEvent {
            kind,
            tp: parse(&rec, 2, "tp")?,
            rp: parse(&rec, 3, "rp")?,
            t_actual,
            t_raw: t_actual,
            t_predicted: parse(&rec, 5, "t_predicted")?,
            config_before: cfg(parse(&rec, 6, "matchers_before")?),
            config_after: cfg(parse(&rec, 7, "matchers_after")?),
            notif_rate: parse(&rec, 8, "notif_rate")?,
            stored_subs: parse(&rec, 9, "stored_subs")?,
        });
    }
    Ok(RunTrace { scenario: scenario.to_string(), variant, seed, dt, rows, events: evs })
}

pub fn write_reports<W: Write>(w: W, reports: &[EvaluationReport]) -> Result<(), EvalError> {
    let mut wr = writer(w);
    wr.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in reports {
        let s = &r.scaling;
        wr.write_record(&[
            r.scenario.clone(),
            r.variant.to_string(),
            r.seed.to_string(),
            r.over_provisioning_pct.to_string(),
            r.under_provisioning_pct.to_string(),
            r.sla_violation_pct.to_string(),
            na(s.avg_t_scale_in),
            na(s.avg_t_scale_out),
            na(s.rel_err_t_scale_in),
            na(s.rel_err_t_scale_out),
            s.n_scale_in.to_string(),
            s.n_scale_out.to_string(),
            r.events.len().to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn write_comparison<W: Write>(w: W, cells: &[CompareCell]) -> Result<(), EvalError> {
    let mut wr = writer(w);
    wr.write_record([
        "scenario",
        "variant",
        "runs",
        "sla_violation_pct",
        "over_provisioning_pct",
        "under_provisioning_pct",
        "status",
    ])
    .map_err(csv_err)?;
    for c in cells {
        let ok = c.failed.is_none();
        let num = |v: f64| if ok { v.to_string() } else { "NA".to_string() };
        wr.write_record(&[
            c.scenario.clone(),
            c.variant.to_string(),
            c.runs.to_string(),
            num(c.sla_violation_pct),
            num(c.over_provisioning_pct),
            num(c.under_provisioning_pct),
            c.failed.clone().map_or_else(|| "ok".to_string(), |e| format!("failed: {e}")),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

// Training sets. Floats use the shortest representation that reads back
// to the same value, so a written set round-trips exactly.

pub fn write_scaling_times<W: Write>(w: W, rows: &[ScalingTimeRow]) -> Result<(), EvalError> {
    let mut wr = writer(w);
    wr.write_record(["notif_rate", "stored_subs", "t_sa"]).map_err(csv_err)?;
    for r in rows {
        wr.write_record(&[r.notif_rate.to_string(), r.stored_subs.to_string(), r.t_sa.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn read_scaling_times<R: Read>(r: R) -> Result<Vec<ScalingTimeRow>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    expect_header(&mut rd, &["notif_rate", "stored_subs", "t_sa"])?;
    rd.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ScalingTimeRow {
                notif_rate: parse(&rec, 0, "notif_rate")?,
                stored_subs: parse(&rec, 1, "stored_subs")?,
                t_sa: parse(&rec, 2, "t_sa")?,
            })
        })
        .collect()
}

pub fn write_rt_series<W: Write>(w: W, series: &[(u64, f64)]) -> Result<(), EvalError> {
    let mut wr = writer(w);
    wr.write_record(["t", "rt_s"]).map_err(csv_err)?;
    for (t, rt) in series {
        wr.write_record(&[t.to_string(), rt.to_string()]).map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn read_rt_series<R: Read>(r: R) -> Result<Vec<(u64, f64)>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    expect_header(&mut rd, &["t", "rt_s"])?;
    rd.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok((parse(&rec, 0, "t")?, parse(&rec, 1, "rt_s")?))
        })
        .collect()
}

fn perf_header() -> Vec<&'static str> {
    let mut h = vec!["t"];
    h.extend(CHANNEL_NAMES);
    h.extend(["mem_used_pct", "outlier_flag", "rt_s", "throughput"]);
    h
}

pub fn write_perf_rows<W: Write>(w: W, rows: &[PerfRow]) -> Result<(), EvalError> {
    let mut wr = writer(w);
    wr.write_record(perf_header()).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.sample.sample.t.to_string()];
        rec.extend(r.sample.sample.channels().iter().map(f64::to_string));
        rec.push(r.sample.mem_used_pct.to_string());
        rec.push(u8::from(r.sample.outlier_flag).to_string());
        rec.push(r.rt.to_string());
        rec.push(r.throughput.to_string());
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn read_perf_rows<R: Read>(r: R) -> Result<Vec<PerfRow>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    expect_header(&mut rd, &perf_header())?;
    rd.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let mut c = [0.0; N_CHANNELS];
            for (i, slot) in c.iter_mut().enumerate() {
                *slot = parse(&rec, i + 1, CHANNEL_NAMES[i])?;
            }
            let flag: u8 = parse(&rec, N_CHANNELS + 2, "outlier_flag")?;
            Ok(PerfRow {
                sample: CleanSample {
                    sample: MetricSample::from_channels(parse(&rec, 0, "t")?, c),
                    mem_used_pct: parse(&rec, N_CHANNELS + 1, "mem_used_pct")?,
                    outlier_flag: flag != 0,
                },
                rt: parse(&rec, N_CHANNELS + 3, "rt_s")?,
                throughput: parse(&rec, N_CHANNELS + 4, "throughput")?,
            })
        })
        .collect()
}

fn expect_header<R: Read>(rd: &mut csv::Reader<R>, want: &[&str]) -> Result<(), EvalError> {
    let got = rd.headers().map_err(csv_err)?;
    if got.iter().ne(want.iter().copied()) {
        return Err(EvalError::Invalid(format!("csv: expected header {want:?}, got {got:?}")));
    }
    Ok(())
}
