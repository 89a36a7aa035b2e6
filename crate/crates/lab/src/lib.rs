//! Experiment harness on top of the `spde-boundary` numerical core:
//! Monte Carlo ensembles parallelised over paths, `ε`-sweeps, the
//! boundary-renormalisation comparison, effective-boundary-data fits and
//! CSV / JSON / flat-binary / SVG output.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod plot;
pub mod run;
pub mod stats;

pub use config::{Experiment, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] spde_boundary::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("plot error: {0}")]
    Plot(String),
    /// A path of an ensemble failed; `path` is its stream index.
    #[error("path {path} failed: {source}")]
    Path { path: u64, source: spde_boundary::Error },
}

pub type Result<T> = std::result::Result<T, LabError>;
