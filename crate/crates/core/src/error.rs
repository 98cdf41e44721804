use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid format: {0}")]
    InvalidFormat(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("format mismatch: {0:?} vs {1:?}")]
    FormatMismatch(Vec<usize>, Vec<usize>),
    #[error("index {index:?} out of range for format {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("solution set is empty")]
    EmptySolutionSet,
    #[error("start path failed after {0} attempts")]
    StartTrackingFailed(usize),
    #[error("relation construction: {0}")]
    Relation(String),
    #[error("too many candidates: {count} exceeds limit {limit}")]
    TooManyCandidates { count: u128, limit: u128 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
