use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the incident-detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to open {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: {field} = {value} is out of range ({expected})")]
    Range {
        line: u64,
        field: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("unit {unit}: {message}")]
    Unit { unit: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("channel mismatch: expected {expected}, got {actual}")]
    Channel {
        expected: crate::Channel,
        actual: crate::Channel,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from bad user input (data, config, arguments)
    /// rather than a failure while running the pipeline.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
