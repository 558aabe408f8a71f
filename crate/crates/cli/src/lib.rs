//! Scenario files in, reports and plot data out.

pub mod config;
pub mod report;
pub mod run;
pub mod scenario;
pub mod schema;

use std::path::Path;

use thiserror::Error;

pub use config::{Finding, ScenarioConfig};
pub use run::run;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SECSCAT_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", render_findings(.0))]
    Validation(Vec<Finding>),

    #[error(transparent)]
    Library(#[from] secscat::Error),

    #[error("{0}")]
    Io(String),
}

fn render_findings(findings: &[Finding]) -> String {
    let lines: Vec<String> = findings.iter().map(|f| f.to_string()).collect();
    format!("invalid scenario:\n  {}", lines.join("\n  "))
}

impl CliError {
    /// 2 for bad input, 3 when the numerics did not converge, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Library(e) if e.is_convergence() => 3,
            CliError::Library(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

/// Findings for the scenario at `path`; empty means valid.
pub fn validate_config(path: &Path) -> Result<Vec<Finding>, CliError> {
    match ScenarioConfig::load(path) {
        Ok(cfg) => Ok(scenario::validate(&cfg)),
        Err(CliError::Validation(f)) => Ok(f),
        Err(e) => Err(e),
    }
}
