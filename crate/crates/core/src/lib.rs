//! Elastic publish/subscribe service simulator with a combined
//! proactive/reactive auto-scaler.
//!
//! The crate covers the whole loop: a fluid-queue model of the service
//! ([`sim`]), a synthetic resource monitor ([`metrics`]), the scaling-time,
//! trend and performance forecasters ([`forecast`]), the per-tick decision
//! rule ([`decider`]), workload scenarios ([`workload`]) and the evaluation
//! harness ([`eval`]).

pub mod decider;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod metrics;
pub mod seed;
pub mod sim;
pub mod workload;

pub use decider::{DeciderConfig, Decision, EstimateBuffer, Models, Trigger, Verdict};
pub use error::{EvalError, ForecastError, MetricsError, SimError, WorkloadError};
pub use eval::{Experiment, RunTrace, Variant};
pub use forecast::{ForecastVector, LinearModel, TrainingSets, TrendModel};
pub use metrics::{CleanSample, MetricSample, MetricsParams};
pub use sim::{ScalingEvent, ScalingKind, ServiceConfig, SimParams, SystemState, WorkloadPoint};
pub use workload::{WorkloadKind, WorkloadSpec};
