use thiserror::Error;

/// Failures of a CLI command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Validation {
        path: String,
        #[source]
        source: distkit::Error,
    },

    #[error("{0}")]
    NotImplemented(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("self-check failed: {0} check(s) did not pass")]
    SelfCheck(usize),
}

impl CliError {
    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps a library error raised while handling `path`. Parameter errors
    /// name the parameter under `path`.
    pub fn library(path: &str, err: distkit::Error) -> Self {
        match err {
            distkit::Error::NotImplemented(m) => CliError::NotImplemented(format!("{path}: not implemented: {m}")),
            distkit::Error::InvalidParameter { param, reason } => CliError::Validation {
                path: format!("{path}.{param}"),
                source: distkit::Error::InvalidParameter { param, reason },
            },
            other => CliError::Validation {
                path: path.to_string(),
                source: other,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Io { .. } => 2,
            CliError::Validation { .. } => 3,
            CliError::NotImplemented(_) => 4,
            CliError::SelfCheck(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
