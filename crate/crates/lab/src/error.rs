use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Core(#[from] precursor_core::Error),
}

impl LabError {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        LabError::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    /// 1 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Parse { .. } | LabError::Validation { .. } => 1,
            _ => 3,
        }
    }
}
