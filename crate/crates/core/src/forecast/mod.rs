//! Scaling-time, trend and performance forecasters.

pub mod linalg;
pub mod model_io;
pub mod regression;
pub mod smoothing;
pub mod trend;

pub use regression::{
    estimate_rt, fit_performance_model, fit_scaling_time, forecast_scaling_time, kfold_cv, LinearModel,
    PerfRow, PerformanceModels, ScalingTimeRow,
};
pub use smoothing::{first_derivative, savgol_filter};
pub use trend::{fit_trend_model, forecast_trend, ForecastVector, TrendFitParams, TrendKind, TrendModel};

/// Data gathered during the profiling phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSets {
    pub scaling_times: Vec<ScalingTimeRow>,
    /// `(tick, rt seconds)`, strictly increasing in tick.
    pub rt_series: Vec<(u64, f64)>,
    pub perf_rows: Vec<PerfRow>,
}
