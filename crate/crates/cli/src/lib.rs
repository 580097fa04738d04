//! Declarative experiment runner for half-line Szegedy walks: scenario
//! configs in TOML, CSV/plot-data artifacts, and a verification suite
//! covering every theorem-level claim the library implements.

use std::path::PathBuf;

use thiserror::Error;

pub mod checks;
pub mod config;
pub mod output;
pub mod report;
pub mod scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path} is malformed: {message}")]
    ConfigParse { path: String, message: String },
    #[error("config field {field}: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error(transparent)]
    Walk(#[from] qwalk_core::walk::WalkError),
    #[error(transparent)]
    Measure(#[from] qwalk_core::measures::MeasureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Exit code taxonomy: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigIo { .. }
            | CliError::ConfigParse { .. }
            | CliError::ConfigInvalid { .. } => 2,
            _ => 1,
        }
    }
}

/// Output root: `QWALK_OUTPUT_ROOT` when set, `./out` otherwise.
pub fn output_root() -> PathBuf {
    std::env::var_os("QWALK_OUTPUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}
