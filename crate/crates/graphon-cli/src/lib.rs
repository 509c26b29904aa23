//! Library side of the experiment harness: rate curves, the experiment
//! runner, and the error type that fixes the process exit codes.

pub mod experiment;
pub mod rates;

use thiserror::Error;

/// CLI-level errors. Exit codes: config/usage problems exit 2, numerical
/// failures exit 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o error: {e}"))
    }
}
