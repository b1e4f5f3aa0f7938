//! Scenario ingestion, run orchestration, CSV/JSON export and SVG plotting for
//! the `ensemble` command-line tool.

pub mod controls;
pub mod formula;
pub mod run;
pub mod scenario;
pub mod svg;

use std::path::PathBuf;

use thiserror::Error;

pub use run::{RunArtifacts, Status};
pub use scenario::{parse_scenario, Scenario, ScenarioError, ScenarioFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("controls file {path}: {message}")]
    Controls { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] moment_ensemble::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Parse and usage problems exit with 2, solver non-convergence with 4,
    /// everything else with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Controls { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) if is_non_convergence(e) => 4,
            _ => 1,
        }
    }
}

fn is_non_convergence(e: &moment_ensemble::Error) -> bool {
    match e {
        moment_ensemble::Error::NotConverged { .. } => true,
        moment_ensemble::Error::Cycle { source, .. } => is_non_convergence(source),
        _ => false,
    }
}
