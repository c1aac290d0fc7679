use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A missing or invalid configuration value.
    #[error("usage error: `{field}`: {msg}")]
    Usage { field: String, msg: String },

    #[error(transparent)]
    Core(#[from] mlt_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(field: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Usage {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub fn file(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
