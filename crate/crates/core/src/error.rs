use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by builders, analytics, and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset: at least one point is required")]
    EmptyDataset,

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("outside theory domain: {0}")]
    TheoryDomain(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("query outside structure domain: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("dataset shortfall: needed {needed} points, found {found}")]
    Shortfall { needed: usize, found: usize },

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
