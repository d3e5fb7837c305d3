//! Simulation driver for part-wise coactive learning: runs simulated users,
//! computes regret metrics, checks the learning guarantees at every iteration and
//! writes CSV / JSON results.

pub mod config;
pub mod metrics;
pub mod output;
pub mod run;

pub use config::{load_problem, ExperimentConfig};
pub use run::{run_experiment, run_prepared, Experiment, Prepared, UserRun, Violation};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] pcl_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
