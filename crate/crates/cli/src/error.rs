use thiserror::Error;

/// Failures surfaced by the command-line driver, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments, input files or checkpoints.
    #[error("{0}")]
    Validation(String),
    /// A verification ran to completion and failed.
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] fnn_core::Error),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_INVALID,
            CliError::Check(_) => EXIT_CHECK_FAILED,
            CliError::Core(fnn_core::Error::Divergence { .. }) => EXIT_DIVERGED,
            CliError::Core(_) => EXIT_INVALID,
        }
    }
}
