use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error{}: {message}", field.as_ref().map(|f| format!(" at `{f}`")).unwrap_or_default())]
    Config {
        field: Option<String>,
        message: String,
    },

    #[error("invariant failure: {0}")]
    Invariant(String),

    #[error(transparent)]
    Numerical(gaugekit::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv output {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[cfg(feature = "parallel")]
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    /// Validation error from the core library, with its field placed under `scope`.
    pub fn scoped(scope: &str, err: gaugekit::Error) -> Self {
        match err {
            gaugekit::Error::InvalidParameter { field, reason } => CliError::Config {
                field: Some(format!("{scope}.{field}")),
                message: reason,
            },
            other => CliError::Config {
                field: Some(scope.to_string()),
                message: other.to_string(),
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Invariant(_) | CliError::Numerical(_) => 3,
            #[cfg(feature = "parallel")]
            CliError::ThreadPool(_) => 1,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Config { .. } => "config",
            CliError::Invariant(_) | CliError::Numerical(_) => "invariant",
            #[cfg(feature = "parallel")]
            CliError::ThreadPool(_) => "io",
            CliError::Io { .. } | CliError::Csv { .. } => "io",
        };
        let field = match self {
            CliError::Config { field, .. } => field.clone(),
            _ => None,
        };
        json!({
            "error": kind,
            "field": field,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

impl From<gaugekit::Error> for CliError {
    fn from(err: gaugekit::Error) -> Self {
        match err {
            gaugekit::Error::InvalidParameter { field, reason } => CliError::Config {
                field: Some(field),
                message: reason,
            },
            other => CliError::Numerical(other),
        }
    }
}
