//! Error type shared across the library.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A dataset file is missing or unreadable.
    #[error("cannot read dataset file {path}: {source}")]
    Ingestion {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A dataset file exists but its contents are malformed.
    #[error("{file}:{line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },

    /// Tensor operands have incompatible shapes.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    /// A documented invariant of a domain type was violated.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A caller broke an operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Loss became non-finite during training.
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },

    /// Checkpoint file cannot be decoded.
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    /// Top-K selection was asked to select from an empty list.
    #[error("selection from empty score list")]
    EmptySelection,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
