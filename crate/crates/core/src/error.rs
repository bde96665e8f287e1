use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the denoising pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical failure{}: {message}", stage.as_ref().map(|s| format!(" in {s}")).unwrap_or_default())]
    Numerical {
        message: String,
        stage: Option<String>,
    },
}

impl Error {
    pub fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
            stage: None,
        }
    }

    pub fn with_stage(self, stage: &str) -> Self {
        match self {
            Error::Numerical { message, .. } => Error::Numerical {
                message,
                stage: Some(stage.to_string()),
            },
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 for parse/config problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
