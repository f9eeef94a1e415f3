use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;

use flas_core::eval::csv_io::{
    read_perf_rows, read_rt_series, read_scaling_times, read_trace, write_comparison, write_events, write_perf_rows,
    write_reports, write_rt_series, write_scaling_times, write_trace,
};
use flas_core::eval::{
    compare as compare_cells, demand_points, evaluate as evaluate_trace, models_per_scenario, prepare_models,
    profiling_run, run_scenario, Variant,
};
use flas_core::forecast::model_io::{linear_from_text, linear_to_text, trend_from_text, trend_to_text};
use flas_core::forecast::regression::{perf_features, PERF_PREDICTORS, SCALING_TIME_PREDICTORS};
use flas_core::forecast::{fit_performance_model, fit_scaling_time, fit_trend_model, kfold_cv, LinearModel};
use flas_core::seed::{sub_seed, STREAM_CV, STREAM_PROFILING};
use flas_core::{EvalError, ForecastError, Models, WorkloadKind};

use crate::config::RunConfig;

const SCALING_TIMES: &str = "scaling_times.csv";
const RT_SERIES: &str = "rt_series.csv";
const PERF_ROWS: &str = "perf_rows.csv";
const CV_FOLDS: usize = 5;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NoEvents,
    Fit(String),
    Runtime { tick: Option<u64>, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NoEvents => 3,
            CliError::Fit(_) => 4,
            CliError::Runtime { .. } => 5,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Runtime { tick: None, msg: format!("{}: {e}", path.display()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::NoEvents => f.write_str("profiling produced no scaling events"),
            CliError::Fit(m) => write!(f, "model fit failed: {m}"),
            CliError::Runtime { tick: Some(t), msg } => write!(f, "runtime error at tick {t}: {msg}"),
            CliError::Runtime { tick: None, msg } => write!(f, "runtime error: {msg}"),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NoScalingEventsRecorded => CliError::NoEvents,
            EvalError::Workload(w) => CliError::Config(w.to_string()),
            EvalError::Sim { t, source } => CliError::Runtime { tick: Some(t), msg: source.to_string() },
            EvalError::Forecast { t, source } => CliError::Runtime { tick: Some(t), msg: source.to_string() },
            other => CliError::Runtime { tick: None, msg: other.to_string() },
        }
    }
}

fn fit_err(e: ForecastError) -> CliError {
    CliError::Fit(e.to_string())
}

/// Errors while preparing models are fit failures unless profiling itself failed.
fn model_err(e: EvalError) -> CliError {
    match e {
        EvalError::Forecast { source, .. } => fit_err(source),
        other => other.into(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn profile(cfg: &RunConfig) -> Result<(), CliError> {
    let s = sub_seed(cfg.seed, STREAM_PROFILING);
    let sets = profiling_run(&[cfg.exp.profiling_workload.with_seed(s)], &cfg.exp, s)?;
    info!("profiling: {} scaling events, {} ticks", sets.scaling_times.len(), sets.rt_series.len());

    let p = cfg.out.join(SCALING_TIMES);
    write_scaling_times(create(&p)?, &sets.scaling_times)?;
    let p = cfg.out.join(RT_SERIES);
    write_rt_series(create(&p)?, &sets.rt_series)?;
    let p = cfg.out.join(PERF_ROWS);
    write_perf_rows(create(&p)?, &sets.perf_rows)?;
    Ok(())
}

fn report_linear(out: &mut String, name: &str, m: &LinearModel, cv: (f64, f64), kpis: Option<&[(String, f64)]>) {
    let _ = writeln!(out, "[{name}]");
    let _ = writeln!(out, "r2 = {:.6}", m.r2);
    let _ = writeln!(out, "mae = {:.6e}", m.mae);
    let _ = writeln!(out, "cv_r2 = {:.6}", cv.0);
    let _ = writeln!(out, "cv_mae = {:.6e}", cv.1);
    for (i, (kpi, w)) in kpis.unwrap_or_default().iter().enumerate() {
        let _ = writeln!(out, "kpi_{} = {kpi} {w:.4}", i + 1);
    }
    out.push('\n');
}

pub fn train(cfg: &RunConfig, training: &Path) -> Result<(), CliError> {
    let scaling_times = read_scaling_times(open(&training.join(SCALING_TIMES))?)?;
    let rt_series = read_rt_series(open(&training.join(RT_SERIES))?)?;
    let perf_rows = read_perf_rows(open(&training.join(PERF_ROWS))?)?;
    let cv_seed = sub_seed(cfg.seed, STREAM_CV);

    let scaling_time = fit_scaling_time(&scaling_times).map_err(fit_err)?;
    let perf = fit_performance_model(&perf_rows).map_err(fit_err)?;
    let trend = fit_trend_model(&rt_series, cfg.exp.sim.dt, &cfg.exp.trend).map_err(fit_err)?;

    let x: Vec<Vec<f64>> = scaling_times.iter().map(|r| vec![r.notif_rate, r.stored_subs]).collect();
    let y: Vec<f64> = scaling_times.iter().map(|r| r.t_sa).collect();
    let st_cv = kfold_cv(&SCALING_TIME_PREDICTORS, &x, &y, CV_FOLDS.min(x.len()), cv_seed).map_err(fit_err)?;
    let usable: Vec<_> = perf_rows.iter().filter(|r| !r.sample.outlier_flag).collect();
    let px: Vec<Vec<f64>> = usable.iter().map(|r| perf_features(&r.sample)).collect();
    let rt: Vec<f64> = usable.iter().map(|r| r.rt).collect();
    let tp: Vec<f64> = usable.iter().map(|r| r.throughput).collect();
    let rt_cv = kfold_cv(&PERF_PREDICTORS, &px, &rt, CV_FOLDS, cv_seed).map_err(fit_err)?;
    let x_cv = kfold_cv(&PERF_PREDICTORS, &px, &tp, CV_FOLDS, cv_seed).map_err(fit_err)?;

    write_text(&cfg.out.join("scaling_time.model"), &linear_to_text(&scaling_time))?;
    write_text(&cfg.out.join("perf_rt.model"), &linear_to_text(&perf.rt_model))?;
    write_text(&cfg.out.join("perf_x.model"), &linear_to_text(&perf.x_model))?;
    write_text(&cfg.out.join("trend.model"), &trend_to_text(&trend))?;

    let mut report = String::new();
    report_linear(&mut report, "scaling_time", &scaling_time, st_cv, None);
    report_linear(&mut report, "perf_rt", &perf.rt_model, rt_cv, Some(&perf.rt_kpis));
    report_linear(&mut report, "perf_x", &perf.x_model, x_cv, Some(&perf.x_kpis));
    let _ = writeln!(report, "[trend]\nkind = {}\nperiod = {}", trend.kind.as_str(), trend.period);
    let _ = writeln!(report, "cv_mae = {:.6e}", trend.cv_mae);
    write_text(&cfg.out.join("fit_report.txt"), &report)
}

fn load_models(dir: &Path) -> Result<Models, CliError> {
    let linear = |name: &str| linear_from_text(&read_text(&dir.join(name))?).map_err(fit_err);
    Ok(Models {
        scaling_time: linear("scaling_time.model")?,
        rt_model: linear("perf_rt.model")?,
        trend: trend_from_text(&read_text(&dir.join("trend.model"))?).map_err(fit_err)?,
    })
}

fn trace_stem(scenario: &str, variant: Variant, seed: u64) -> String {
    format!("{scenario}__{variant}__{seed}")
}

pub fn run(
    cfg: &RunConfig,
    scenario: &str,
    variant: &str,
    models_dir: Option<&Path>,
    full_precision: bool,
) -> Result<(), CliError> {
    let kind: WorkloadKind = scenario.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    let variant: Variant = variant.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    let spec = cfg.scenario(kind).with_seed(cfg.seed);
    let models = match (variant.needs_models(), models_dir) {
        (false, _) => None,
        (true, Some(dir)) => Some(load_models(dir)?),
        (true, None) => Some(prepare_models(&spec, &cfg.exp, cfg.seed).map_err(model_err)?),
    };
    let trace = run_scenario(&spec, variant, models.as_ref(), &cfg.exp, cfg.seed)?;
    let stem = trace_stem(scenario, variant, cfg.seed);
    let p = cfg.out.join(format!("{stem}.trace.csv"));
    write_trace(create(&p)?, &trace, full_precision)?;
    let p = cfg.out.join(format!("{stem}.events.csv"));
    write_events(create(&p)?, &trace.events)?;
    info!("{stem}: {} ticks, {} scaling events", trace.rows.len(), trace.events.len());
    Ok(())
}

/// `(scenario, variant, seed, trace path)` for every trace file named by `run`.
fn find_traces(dir: &Path) -> Result<Vec<(WorkloadKind, Variant, u64, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let Some(stem) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".trace.csv")) else {
            continue;
        };
        let parts: Vec<&str> = stem.split("__").collect();
        let parsed = match parts.as_slice() {
            [k, v, s] => k.parse().ok().zip(v.parse().ok()).zip(s.parse().ok()),
            _ => None,
        };
        let ((kind, variant), seed) = parsed
            .ok_or_else(|| CliError::Config(format!("{}: not a <scenario>__<variant>__<seed> trace", path.display())))?;
        out.push((kind, variant, seed, path));
    }
    out.sort_by(|a, b| a.3.cmp(&b.3));
    Ok(out)
}

pub fn evaluate(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let traces = find_traces(dir)?;
    if traces.is_empty() {
        return Err(CliError::Config(format!("no traces in {}", dir.display())));
    }
    let mut reports = Vec::new();
    for (kind, variant, seed, path) in traces {
        let events_path = path.with_file_name(format!("{}.events.csv", trace_stem(kind.as_str(), variant, seed)));
        let trace =
            read_trace(open(&path)?, open(&events_path)?, kind.as_str(), variant, seed, cfg.exp.sim.dt)?;
        let schedule = demand_points(&cfg.scenario(kind).with_seed(seed), &cfg.exp)?;
        reports.push(evaluate_trace(&trace, &schedule, cfg.exp.sla_max_rt)?);
    }
    let p = cfg.out.join("report.csv");
    write_reports(create(&p)?, &reports)?;
    Ok(())
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let models = models_per_scenario(&cfg.scenarios, &cfg.exp, cfg.seed).map_err(model_err)?;
    let cells = compare_cells(&cfg.scenarios, &cfg.variants, &cfg.seeds, &cfg.exp, &models)?;
    let p = cfg.out.join("comparison.csv");
    let mut w = create(&p)?;
    write_comparison(&mut w, &cells)?;
    finish(w, &p)?;

    let mut text = String::new();
    for c in &cells {
        let _ = match &c.failed {
            None => writeln!(
                text,
                "{:<20} {:<15} runs={:<3} sla={:>7.3}% over={:>7.3}% under={:>7.3}%",
                c.scenario, c.variant.as_str(), c.runs, c.sla_violation_pct, c.over_provisioning_pct, c.under_provisioning_pct
            ),
            Some(e) => writeln!(text, "{:<20} {:<15} failed: {e}", c.scenario, c.variant.as_str()),
        };
    }
    print!("{text}");
    io::stdout().flush().ok();
    write_text(&cfg.out.join("summary.txt"), &text)
}
