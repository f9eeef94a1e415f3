//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! Every key is optional and falls back to the library default. Unknown
//! sections and keys are rejected so that a typo never silently runs the
//! defaults. `[scenario.<kind>]` sections override one workload at a time.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flas_core::eval::{Experiment, Variant};
use flas_core::forecast::TrendFitParams;
use flas_core::{ServiceConfig, WorkloadKind, WorkloadSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub exp: Experiment,
    pub scenarios: Vec<WorkloadSpec>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    /// Seed of the profiling and training runs.
    pub seed: u64,
    pub out: PathBuf,
    /// Overrides keyed by scenario kind.
    overrides: HashMap<WorkloadKind, Vec<(String, String, usize)>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            exp: Experiment::default(),
            scenarios: WorkloadKind::SCENARIOS.iter().map(|k| WorkloadSpec::default_for(*k)).collect(),
            variants: Variant::ALL.to_vec(),
            seeds: (1..=20).collect(),
            seed: 7,
            out: PathBuf::from("out"),
            overrides: HashMap::new(),
        }
    }
}

/// Section, key, value and line number of one assignment.
type Entry = (String, String, String, usize);

fn tokenize(text: &str) -> Result<Vec<Entry>, String> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        if section.is_empty() {
            return Err(format!("line {}: key outside of a section", i + 1));
        }
        out.push((section.clone(), k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T, String> {
    v.parse().map_err(|_| format!("line {line}: {key}: cannot parse {v:?}"))
}

fn list<T: FromStr>(key: &str, v: &str, line: usize) -> Result<Vec<T>, String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s, line)).collect()
}

/// `1-20`, `3` or `1,4,9`.
fn seeds(v: &str, line: usize) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (num("seeds", a.trim(), line)?, num("seeds", b.trim(), line)?);
                if a > b {
                    return Err(format!("line {line}: empty seed range {part}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num("seeds", part, line)?),
        }
    }
    if out.is_empty() {
        return Err(format!("line {line}: no seeds"));
    }
    Ok(out)
}

fn apply_workload(spec: &mut WorkloadSpec, key: &str, v: &str, line: usize) -> Result<(), String> {
    match key {
        "duration" => spec.duration = num(key, v, line)?,
        "base_sub_rate" => spec.base_sub_rate = num(key, v, line)?,
        "peak_sub_rate" => spec.peak_sub_rate = num(key, v, line)?,
        "period" => spec.period = num(key, v, line)?,
        "ramp" => spec.ramp = num(key, v, line)?,
        "sub_cap" => spec.sub_cap = num(key, v, line)?,
        "spike_width" => spec.spike_width = num(key, v, line)?,
        "spike_count" => spec.spike_count = num(key, v, line)?,
        "notif_rate" => spec.notif_rate = num(key, v, line)?,
        "unsub_stretch" => spec.unsub_stretch = num(key, v, line)?,
        _ => return Err(format!("line {line}: unknown workload key {key:?}")),
    }
    Ok(())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut c = RunConfig::default();
        let mut scenario_names: Option<Vec<WorkloadKind>> = None;
        for (section, key, v, line) in tokenize(text)? {
            let (k, v) = (key.as_str(), v.as_str());
            let e = &mut c.exp;
            let unknown = || format!("line {line}: unknown key {k:?} in [{section}]");
            match section.as_str() {
                "sim" => match k {
                    "mu0" => e.sim.mu0 = num(k, v, line)?,
                    "kappa" => e.sim.kappa = num(k, v, line)?,
                    "base_service_time_ms" => e.sim.base_service_time = num::<f64>(k, v, line)? / 1000.0,
                    "scaling_overhead_factor" => e.sim.scaling_overhead_factor = num(k, v, line)?,
                    "t_a0" => e.sim.t_coeffs.a0 = num(k, v, line)?,
                    "t_a1" => e.sim.t_coeffs.a1 = num(k, v, line)?,
                    "t_a2" => e.sim.t_coeffs.a2 = num(k, v, line)?,
                    "t_noise" => e.sim.t_noise = num(k, v, line)?,
                    "dt" => e.sim.dt = num(k, v, line)?,
                    "matchers" => e.initial_config.matcher_instances = num(k, v, line)?,
                    _ => return Err(unknown()),
                },
                "metrics" => match k {
                    "noise_sigma" => e.metrics.noise_sigma = num(k, v, line)?,
                    "outlier_prob" => e.metrics.outlier_prob = num(k, v, line)?,
                    "outlier_factor" => e.metrics.outlier_factor = num(k, v, line)?,
                    "samples_per_period" => e.metrics.samples_per_period = num(k, v, line)?,
                    "outlier_k" => e.metrics.outlier_k = num(k, v, line)?,
                    _ => return Err(unknown()),
                },
                "decider" => match k {
                    "h" => e.decider.h = num(k, v, line)?,
                    "react_w" => e.decider.react_w = num(k, v, line)?,
                    "inc_trend_th" => e.decider.inc_trend_th = num(k, v, line)?,
                    "dec_trend_th" => e.decider.dec_trend_th = num(k, v, line)?,
                    "react_upper_th_ms" => e.decider.react_upper_th = num::<f64>(k, v, line)? / 1000.0,
                    "react_lower_th_ms" => e.decider.react_lower_th = num::<f64>(k, v, line)? / 1000.0,
                    "majority" => e.decider.majority = num(k, v, line)?,
                    "cooldown_multiplier" => e.decider.cooldown_multiplier = num(k, v, line)?,
                    "history_window" => e.decider.history_window = num(k, v, line)?,
                    "sg_window" => e.decider.sg_window = num(k, v, line)?,
                    "sg_degree" => e.decider.sg_degree = num(k, v, line)?,
                    _ => return Err(unknown()),
                },
                "trend" => {
                    let t: &mut TrendFitParams = &mut e.trend;
                    match k {
                        "seasonal_period" => t.seasonal_period = num(k, v, line)?,
                        "harmonics" => t.harmonics = num(k, v, line)?,
                        "sg_window" => t.sg_window = num(k, v, line)?,
                        "sg_degree" => t.sg_degree = num(k, v, line)?,
                        "cv_fraction" => t.cv_fraction = num(k, v, line)?,
                        "max_refits" => t.max_refits = num(k, v, line)?,
                        _ => return Err(unknown()),
                    }
                }
                "profiling" => match k {
                    "subs_per_matcher_high" => e.profiling.subs_per_matcher_high = num(k, v, line)?,
                    "subs_per_matcher_low" => e.profiling.subs_per_matcher_low = num(k, v, line)?,
                    "hold_ticks" => e.profiling.hold_ticks = num(k, v, line)?,
                    "workload" => {
                        let kind: WorkloadKind = v.parse().map_err(|err| format!("line {line}: {err}"))?;
                        c.exp.profiling_workload = WorkloadSpec::default_for(kind);
                    }
                    _ => return Err(unknown()),
                },
                "cpu" => match k {
                    "upper_pct" => e.cpu.upper_pct = num(k, v, line)?,
                    "lower_pct" => e.cpu.lower_pct = num(k, v, line)?,
                    "periods" => e.cpu.periods = num(k, v, line)?,
                    _ => return Err(unknown()),
                },
                "sla" => match k {
                    "max_rt_ms" => e.sla_max_rt = num::<f64>(k, v, line)? / 1000.0,
                    _ => return Err(unknown()),
                },
                "run" => match k {
                    "seed" => c.seed = num(k, v, line)?,
                    "seeds" => c.seeds = seeds(v, line)?,
                    "out" => c.out = PathBuf::from(v),
                    "variants" => c.variants = list(k, v, line).map_err(|_| format!("line {line}: bad variant list {v:?}"))?,
                    "scenarios" => {
                        scenario_names =
                            Some(list(k, v, line).map_err(|_| format!("line {line}: bad scenario list {v:?}"))?)
                    }
                    _ => return Err(unknown()),
                },
                s => {
                    let kind: WorkloadKind = s
                        .strip_prefix("scenario.")
                        .ok_or_else(|| format!("line {line}: unknown section [{s}]"))?
                        .parse()
                        .map_err(|err| format!("line {line}: {err}"))?;
                    // validated now, applied once the scenario list is known
                    apply_workload(&mut WorkloadSpec::default_for(kind), k, v, line)?;
                    c.overrides.entry(kind).or_default().push((k.to_string(), v.to_string(), line));
                }
            }
        }
        if let Some(names) = scenario_names {
            c.scenarios = names.into_iter().map(WorkloadSpec::default_for).collect();
        }
        for spec in c.scenarios.iter_mut().chain(std::iter::once(&mut c.exp.profiling_workload)) {
            for (k, v, line) in c.overrides.get(&spec.kind).into_iter().flatten() {
                apply_workload(spec, k, v, *line)?;
            }
            spec.validate().map_err(|e| format!("[scenario.{}]: {e}", spec.kind))?;
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), String> {
        self.exp.sim.validate().map_err(|e| format!("[sim]: {e}"))?;
        self.exp.decider.validate().map_err(|e| format!("[decider]: {e}"))?;
        let m = self.exp.initial_config;
        ServiceConfig::new(m.ap_instances, m.matcher_instances, m.ep_instances).map_err(|e| format!("[sim]: {e}"))?;
        if !(self.exp.sla_max_rt > 0.0) {
            return Err("[sla]: max_rt_ms must be positive".into());
        }
        if self.scenarios.is_empty() || self.variants.is_empty() {
            return Err("[run]: need at least one scenario and one variant".into());
        }
        Ok(())
    }

    pub fn scenario(&self, kind: WorkloadKind) -> WorkloadSpec {
        self.scenarios
            .iter()
            .chain(std::iter::once(&self.exp.profiling_workload))
            .find(|s| s.kind == kind)
            .cloned()
            .unwrap_or_else(|| {
                let mut spec = WorkloadSpec::default_for(kind);
                for (k, v, line) in self.overrides.get(&kind).into_iter().flatten() {
                    // already checked while parsing
                    let _ = apply_workload(&mut spec, k, v, *line);
                }
                spec
            })
    }
}
