//! Scenario files, controller-bank files, run reports and the command
//! implementations behind the `consensus` binary.

pub mod bank_file;
pub mod commands;
pub mod output;
pub mod report;
pub mod scenario_file;

use std::path::Path;

use consensus_core::sim::SimError;
use consensus_core::synthesis::SynthesisError;
use thiserror::Error;

pub use bank_file::BankError;
pub use scenario_file::{Overrides, ScenarioError, ScenarioFile};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_SYNTHESIS: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;
pub const EXIT_PARSE: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Bank(#[from] BankError),
    /// Carries the rendered itemized report.
    #[error("validation failed")]
    Validation(String),
    #[error("scenario declares no epsilon-scaled perturbations to sweep")]
    NotTemplated,
    #[error("synthesis failed: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("simulation diverged: {0}")]
    Divergence(SimError),
    #[error("simulation failed: {0}")]
    Simulation(SimError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Scenario(_) | CliError::Bank(_) => EXIT_PARSE,
            CliError::Validation(_) | CliError::NotTemplated => EXIT_VALIDATION,
            CliError::Synthesis(_) | CliError::Simulation(_) => EXIT_SYNTHESIS,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
        }
    }
}
