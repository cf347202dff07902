//! Experiment harness for hybrid offline/online RL: config parsing, suite
//! execution, output files and summary comparison.

pub mod cache;
pub mod compare;
pub mod config;
pub mod output;
pub mod suite;

use std::path::PathBuf;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use suite::{run_suite, SuiteResult};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {error}", path.display())]
    Config { path: PathBuf, error: ConfigError },
    #[error(transparent)]
    Core(#[from] hybrid_rl::Error),
    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{}: invalid summary: {message}", path.display())]
    Summary { path: PathBuf, message: String },
    #[error("summary {index} has fingerprint {found}, expected {expected}")]
    Fingerprint { index: usize, expected: String, found: String },
    #[error("{0}")]
    Runtime(String),
}
