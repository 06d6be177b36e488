//! Crate-wide error type. `Config` covers anything the user can fix by
//! editing a config file or command line; everything else is a runtime
//! failure. The CLI maps the two groups to distinct exit codes.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("action must be finite, got {0}")]
    InvalidAction(f64),

    #[error("{what}: expected dimension {expected}, got {got}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("replay buffer holds {have} transitions, need at least {need}")]
    InsufficientBuffer { have: usize, need: usize },

    #[error("non-finite loss at update {step}: {report}")]
    NonFiniteLoss { step: u64, report: String },

    #[error("trajectory csv, row {row}, column `{column}`: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("output directory {0} exists and is not empty (pass --force to overwrite)")]
    OutputExists(PathBuf),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors the user fixes by editing configuration or flags.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
