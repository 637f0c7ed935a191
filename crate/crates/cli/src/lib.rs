//! Scenario orchestration for the annuitization solver: config ingestion,
//! figure-data CSV emission and the acceptance battery.

pub mod commands;
pub mod config;
pub mod csv;
pub mod curves;
pub mod verify;

use annuity_core::closed_form::ClosedFormError;
use annuity_core::market::MarketError;
use annuity_core::montecarlo::SimError;
use annuity_core::mortality::MortalityError;
use annuity_core::oracle_fd::OracleError;
use annuity_core::policy::PolicyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, flags or parameter invariants. Exit code 2.
    #[error("invalid input: {0}")]
    Validation(String),
    /// A solver failed on otherwise valid input. Exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// The command ran but some checks or curves did not succeed. Exit code 1.
    #[error("{0}")]
    Incomplete(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Incomplete(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MortalityError> for CliError {
    fn from(e: MortalityError) -> Self {
        match e {
            MortalityError::InvalidParameter(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ClosedFormError> for CliError {
    fn from(e: ClosedFormError) -> Self {
        match e {
            ClosedFormError::Market(m) => m.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Market(m) => m.into(),
            OracleError::InvalidGrid(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
