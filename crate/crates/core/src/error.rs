//! Crate-wide error type.

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value violated a precondition (non-finite input, bad probability, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested computation has no supported path for these arguments.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Vector/matrix shapes disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A sampler or evaluator was handed zero records.
    #[error("empty dataset")]
    EmptyDataset,

    /// A numeric routine produced a non-finite or otherwise unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
