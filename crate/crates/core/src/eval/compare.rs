//! Multi-seed comparison of auto-scaler variants.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::decider::Models;
use crate::error::EvalError;
use crate::eval::report::{demand_points, evaluate, DemandSchedule, EvaluationReport};
use crate::eval::runner::{general_training, run_scenario, scenario_models, Experiment, Variant};
use crate::workload::{WorkloadKind, WorkloadSpec};

/// Means over seeds for one (scenario, variant) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareCell {
    pub scenario: String,
    pub variant: Variant,
    pub runs: usize,
    pub sla_violation_pct: f64,
    pub over_provisioning_pct: f64,
    pub under_provisioning_pct: f64,
    pub failed: Option<String>,
}

/// Trained models for each scenario, keyed by kind.
pub fn models_per_scenario(
    specs: &[WorkloadSpec],
    exp: &Experiment,
    train_seed: u64,
) -> Result<HashMap<WorkloadKind, Models>, EvalError> {
    let general = general_training(exp, train_seed)?;
    specs
        .par_iter()
        .map(|s| Ok((s.kind, scenario_models(&general, s, exp, train_seed)?)))
        .collect()
}

/// Run one scenario for every seed and evaluate each run. The workload seed
/// follows the run seed.
pub fn evaluate_seeds(
    spec: &WorkloadSpec,
    variant: Variant,
    models: Option<&Models>,
    exp: &Experiment,
    seeds: &[u64],
) -> Result<Vec<EvaluationReport>, EvalError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let s = spec.with_seed(seed);
            let schedule: DemandSchedule = demand_points(&s, exp)?;
            let trace = run_scenario(&s, variant, models, exp, seed)?;
            evaluate(&trace, &schedule, exp.sla_max_rt)
        })
        .collect()
}

pub fn compare(
    specs: &[WorkloadSpec],
    variants: &[Variant],
    seeds: &[u64],
    exp: &Experiment,
    models: &HashMap<WorkloadKind, Models>,
) -> Result<Vec<CompareCell>, EvalError> {
    if specs.is_empty() || variants.len() < 2 || seeds.is_empty() {
        return Err(EvalError::Invalid("compare needs a scenario, two variants and a seed".into()));
    }
    let cells: Vec<(usize, usize)> =
        (0..specs.len()).flat_map(|i| (0..variants.len()).map(move |j| (i, j))).collect();
    Ok(cells
        .par_iter()
        .map(|&(i, j)| {
            let spec = &specs[i];
            let variant = variants[j];
            let blank = CompareCell {
                scenario: spec.kind.to_string(),
                variant,
                runs: 0,
                sla_violation_pct: f64::NAN,
                over_provisioning_pct: f64::NAN,
                under_provisioning_pct: f64::NAN,
                failed: None,
            };
            match evaluate_seeds(spec, variant, models.get(&spec.kind), exp, seeds) {
                Ok(reports) => {
                    let n = reports.len() as f64;
                    let avg = |f: fn(&EvaluationReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
                    CompareCell {
                        runs: reports.len(),
                        sla_violation_pct: avg(|r| r.sla_violation_pct),
                        over_provisioning_pct: avg(|r| r.over_provisioning_pct),
                        under_provisioning_pct: avg(|r| r.under_provisioning_pct),
                        ..blank
                    }
                }
                Err(e) => CompareCell { failed: Some(e.to_string()), ..blank },
            }
        })
        .collect())
}
