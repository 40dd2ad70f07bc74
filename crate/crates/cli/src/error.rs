use std::path::Path;

use thiserror::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Internal(_) => 4,
        }
    }
}

/// Classifies an error raised while a validated run executes.
impl From<qpsd_core::Error> for CliError {
    fn from(e: qpsd_core::Error) -> Self {
        use qpsd_core::Error as E;
        match e {
            E::Audio(m) => Self::Io(m),
            E::InvalidParameter { .. }
            | E::Nyquist { .. }
            | E::OddSamplesPerCycle { .. }
            | E::InfeasiblePlan(_)
            | E::OutOfBand { .. }
            | E::NegativeFrequency(_)
            | E::Empty(_) => Self::Config(e.to_string()),
            other => Self::Internal(other.to_string()),
        }
    }
}
