use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid service configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("a scaling action is already in progress at tick {t}")]
    ScalingInProgress { t: u64 },
    #[error("cannot scale in below one matcher (tick {t})")]
    AtMinimum { t: u64 },
    #[error("matcher count already at its maximum (tick {t})")]
    AtMaximum { t: u64 },
    #[error("no matcher count up to 2^20 serves the load at tick {t}")]
    Unsatisfiable { t: u64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metric window is empty")]
    EmptyWindow,
    #[error("outlier multiplier must be positive, got {0}")]
    BadOutlierK(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("series too short: need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("bad smoothing window {window} for degree {degree}")]
    BadWindow { window: usize, degree: usize },
    #[error("predictor matrix is rank deficient")]
    RankDeficient,
    #[error("insufficient data: need at least {need} rows, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("fitted autoregressive part is not stationary")]
    NonStationary,
    #[error("forecast history must cover {need} points, got {got}")]
    InsufficientHistory { need: usize, got: usize },
    #[error("too few rows ({rows}) for {k} folds")]
    TooFewRows { rows: usize, k: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model text: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkloadError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("workload csv: {0}")]
    Csv(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("tick {t}: {source}")]
    Sim { t: u64, source: SimError },
    #[error("tick {t}: {source}")]
    Forecast { t: u64, source: ForecastError },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("profiling thresholds never fired; no scaling events recorded")]
    NoScalingEventsRecorded,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace and demand schedule come from different runs: {0}")]
    MismatchedRuns(String),
    #[error("variant {0} requires fitted models")]
    MissingModels(String),
    #[error("invalid evaluation request: {0}")]
    Invalid(String),
}
