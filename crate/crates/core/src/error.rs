use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("graph with {vertices} vertices exceeds the exact-search limit of {limit}; enable relaxed matching to proceed")]
    GraphTooLarge { vertices: usize, limit: usize },

    #[error("record shape mismatch: expected {expected} samples, got {got}")]
    RecordShape { expected: usize, got: usize },

    #[error("synchronisation error: {0}")]
    Synchronisation(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("operator contract violated: {0}")]
    OperatorContract(String),

    #[error("coordinate {coordinate} = {value} lies outside the admissible domain")]
    Domain { coordinate: String, value: f64 },

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("no path: {0}")]
    NoPath(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("compatibility error: {0}")]
    Compatibility(String),

    #[error("path error at s = {s}: {source}")]
    PathStep {
        s: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Invariant(_) => true,
            Error::PathStep { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}
