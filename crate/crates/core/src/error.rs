use thiserror::Error;

/// Errors raised by the cumulant, pattern and recovery routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("order {order} outside supported range {min}..={max}")]
    OrderOutOfRange { order: usize, min: usize, max: usize },

    #[error("conflicting values for multi-index {index:?}: {first} vs {second}")]
    ConflictingEntry {
        index: Vec<usize>,
        first: f64,
        second: f64,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error(
        "degenerate covariance: smallest eigenvalue {min_eigenvalue:e} is not above {threshold:e}"
    )]
    DegenerateCovariance {
        min_eigenvalue: f64,
        threshold: f64,
    },

    #[error("unsupported graph shape; supported families are stars, chains and disjoint unions of complete graphs")]
    UnsupportedGraph,

    #[error("matrix is not a permutation matrix")]
    NotPermutation,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
