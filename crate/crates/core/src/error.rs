use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // ingest
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no record falls inside the acquisition window")]
    EmptyWindow,
    #[error("column `{0}` has no valid value")]
    AllMissing(String),
    #[error("every column has variance below the threshold")]
    AllColumnsConstant,
    #[error("no column matches the relevant measurement types")]
    NoRelevantColumns,
    #[error("leading gaps leave no complete row")]
    NoCompleteRows,

    // windowing
    #[error("frame has {rows} rows at the requested interval, need at least {needed}")]
    FrameTooShort { rows: usize, needed: usize },
    #[error("sample interval {interval}s is not a positive multiple of the frame step {step}s")]
    IncompatibleInterval { interval: i64, step: i64 },
    #[error("invalid window specification: {0}")]
    InvalidWindow(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("split leaves an empty side ({train} train / {test} test)")]
    DegenerateSplit { train: usize, test: usize },

    // metrics
    #[error("length mismatch: {0} observed vs {1} predicted")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("empty metric list")]
    EmptyList,
    #[error("invalid score weights: {0}")]
    InvalidWeights(String),

    // models
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("normal equations are singular; raise the ridge penalty")]
    SingularSystem,
    #[error("shape mismatch: expected {expected} columns, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid regressor: {0}")]
    InvalidRegressor(String),

    // explorer
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("every configuration failed")]
    AllConfigsFailed,
    #[error("no successful configuration for horizon {0}s")]
    NoSuccessfulConfig(i64),

    // estimator
    #[error("estimator needs at least {needed} knots, got {got}")]
    InsufficientKnots { needed: usize, got: usize },
    #[error("k = {k} exceeds the {available} available knots")]
    KTooLarge { k: usize, available: usize },
    #[error("horizon {horizon}s cannot hold {min_samples} samples at step {step}s")]
    InfeasibleHorizon {
        horizon: i64,
        min_samples: usize,
        step: i64,
    },
    #[error("invalid estimator: {0}")]
    InvalidEstimator(String),

    // artifacts
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable code used in the `status` column of artifacts.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::EmptyWindow => "empty_window",
            Error::AllMissing(_) => "all_missing",
            Error::AllColumnsConstant => "all_columns_constant",
            Error::NoRelevantColumns => "no_relevant_columns",
            Error::NoCompleteRows => "no_complete_rows",
            Error::FrameTooShort { .. } => "frame_too_short",
            Error::IncompatibleInterval { .. } => "incompatible_interval",
            Error::InvalidWindow(_) => "invalid_window",
            Error::UnknownColumn(_) => "unknown_column",
            Error::DegenerateSplit { .. } => "degenerate_split",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::TooFewObservations { .. } => "too_few_observations",
            Error::EmptyList => "empty_list",
            Error::InvalidWeights(_) => "invalid_weights",
            Error::EmptyTrainingSet => "empty_training_set",
            Error::SingularSystem => "singular_system",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidRegressor(_) => "invalid_regressor",
            Error::EmptyGrid => "empty_grid",
            Error::AllConfigsFailed => "all_configs_failed",
            Error::NoSuccessfulConfig(_) => "no_successful_config",
            Error::InsufficientKnots { .. } => "insufficient_knots",
            Error::KTooLarge { .. } => "k_too_large",
            Error::InfeasibleHorizon { .. } => "infeasible_horizon",
            Error::InvalidEstimator(_) => "invalid_estimator",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}
