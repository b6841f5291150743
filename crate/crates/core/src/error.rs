use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum McarError {
    #[error("value out of range: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {what} ({size} > limit {limit})")]
    Capacity {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("double description stopped with {rays} rays (limit {limit}) after {processed} of {total} constraints")]
    RayLimit {
        processed: usize,
        total: usize,
        rays: usize,
        limit: usize,
    },

    #[error("ingest error at row {row}, column {column}: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("ingest error: {0}")]
    Dataset(String),

    #[error("LP solver did not converge: {0}")]
    Solver(String),

    #[error("pattern family mismatch: {0}")]
    Family(String),

    #[error("reduction not applicable: shared marginals differ by {discrepancy:.3e}")]
    ReductionInapplicable { discrepancy: f64 },

    #[error("bootstrap null is degenerate: R = {index} leaves no compatible component")]
    DegenerateNull { index: f64 },

    #[error("no facet information for this pattern family; supply F' and D_R or run the geometry module")]
    MissingFacetInfo,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, McarError>;
