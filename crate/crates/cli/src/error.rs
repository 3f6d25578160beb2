use std::fmt;

use rarma::RarmaError;

/// Command failure classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, inconsistent parameters, out-of-range ROI: exit 2.
    #[error("usage error: {0}")]
    Usage(String),
    /// Unreadable or malformed files, unwritable outputs: exit 1.
    #[error("i/o error: {0}")]
    Io(String),
    /// Computation failed on the supplied data: exit 1.
    #[error("{0}")]
    Model(#[from] RarmaError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Model(_) => 1,
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        CliError::Io(msg.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
