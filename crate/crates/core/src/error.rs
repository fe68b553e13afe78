use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("outcome space must be nonempty")]
    EmptySpace,

    #[error("duplicate label {0:?} in outcome space")]
    DuplicateLabel(String),

    #[error("probabilities do not sum to 1 (sum = {0})")]
    NotNormalized(f64),

    #[error("negative or non-finite probability {value} at cell {index}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("duplicate variable {0:?}")]
    DuplicateVariable(String),

    #[error("variable sets overlap on {0:?}")]
    OverlappingVariables(String),

    #[error("target {0:?} appears in the conditioning set")]
    TargetInGiven(String),

    #[error("conditioning on zero-probability cell {0}")]
    ZeroProbabilityCell(String),

    #[error("loss {loss} is incompatible with the outcome space: {reason}")]
    IncompatibleLoss { loss: String, reason: String },

    #[error("invalid loss table: {0}")]
    InvalidLossTable(String),

    #[error("unbounded cross-entropy: training law assigns zero probability to outcome {0:?}")]
    UnboundedCrossEntropy(String),

    #[error("untrained cells (test support not covered by training law): {}", .0.join("; "))]
    UntrainedCells(Vec<String>),

    #[error("reference not interior: zero reference probability at cell {0}")]
    ReferenceNotInterior(String),

    #[error("positivity violated at cells: {}", .0.join("; "))]
    PositivityViolated(Vec<String>),

    #[error("invalid delivery trace: {0}")]
    InvalidTrace(String),

    #[error("warm-up not trimmed: undefined age for source {source_index} at slot {slot}")]
    WarmupNotTrimmed { source_index: usize, slot: usize },

    #[error("dimension mismatch: expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("lag {lag} exceeds the configured cap of {cap} slots")]
    LagCapExceeded { lag: usize, cap: usize },

    #[error("incompatible law providers: {0}")]
    IncompatibleProviders(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("column {column} is not numeric (value {value:?})")]
    NonNumericColumn { column: String, value: String },

    #[error("only {found} usable windows, at least {required} required")]
    InsufficientWindows { found: usize, required: usize },

    #[error("sparse age cells: {}", .0.iter().map(|(a, n)| format!("{a} ({n} rows)")).collect::<Vec<_>>().join(", "))]
    SparseAgeCells(Vec<(String, usize)>),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
