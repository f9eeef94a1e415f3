//! Run orchestration and the provisioning, SLA and scaling-time metrics.

pub mod compare;
pub mod csv_io;
pub mod report;
pub mod runner;

pub use compare::{compare, evaluate_seeds, models_per_scenario, CompareCell};
pub use report::{
    demand_points, demand_points_for, evaluate, provisioning_report, scaling_report, sla_violation, DemandPoint,
    DemandSchedule, Direction, EvaluationReport, ScalingReport,
};
pub use runner::{
    general_training, prepare_models, profiling_run, run_scenario, run_workload, scenario_models, train_models,
    CpuRule, Experiment, ProfilingThresholds, RunTrace, TraceRow, Variant,
};
