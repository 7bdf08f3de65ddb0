//! Configuration, experiment runners and output schemas for the `pimd`
//! command-line tool.

pub mod config;
pub mod experiments;
pub mod output;

use pimd_core::dynamics::DynamicsError;
use pimd_core::estimators::EstimatorError;
use pimd_core::RingError;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("could not parse config: {0}")]
    Parse(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("io: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("no samples survived the burn-in")]
    NoSamples,
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
