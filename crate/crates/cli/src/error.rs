use thiserror::Error;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Malformed spec, unreadable input, invalid configuration.
    #[error("{0}")]
    Config(String),
    /// A run or an output step failed after the configuration was accepted.
    #[error("{0}")]
    Run(String),
    /// The theory driver found its preconditions violated.
    #[error("{0}")]
    Theory(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Run(_) => 2,
            HarnessError::Theory(_) => 3,
        }
    }
}

impl From<vite_core::Error> for HarnessError {
    fn from(e: vite_core::Error) -> Self {
        HarnessError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

pub(crate) fn run_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Run(msg.into())
}
