use thiserror::Error;

pub type Result<T> = std::result::Result<T, RadarError>;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum RadarError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("target {index} is not on the recovery grid: {reason}")]
    OffGrid { index: usize, reason: String },

    #[error("transmitters {first} and {second} both occupy observation triple {triple:?}")]
    Ambiguous {
        first: usize,
        second: usize,
        triple: [usize; 3],
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("singular support matrix; columns {0:?} are linearly dependent on the observed entries")]
    Singular(Vec<[usize; 3]>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cannot extract parameters for target {index}: {reason}")]
    Extraction { index: usize, reason: String },

    #[error("capability limit: {0}")]
    Capability(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
