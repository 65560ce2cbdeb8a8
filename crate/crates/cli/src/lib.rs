//! Scenario runner for the `torus-kam` engine: reads scenario files, drives
//! the KAM iteration and the spectral scans, and writes CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod perturb;
pub mod report;

use thiserror::Error;
use torus_kam::KamError;

pub use commands::{run, selftest, spectrum, synthesize, Outcome};
pub use config::{Scenario, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] KamError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report error: {0}")]
    Report(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Report(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Report(e.to_string())
    }
}

impl CliError {
    /// 2 for gate violations, 3 for resonances, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(KamError::Resonance { .. }) => 3,
            CliError::Engine(
                KamError::DisplacementTooLarge { .. } | KamError::NonContraction { .. } | KamError::GridTooSmall { .. },
            ) => 2,
            _ => 1,
        }
    }
}
