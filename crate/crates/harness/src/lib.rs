//! Experiment runner for the cpsdetect detectors: configuration, the
//! simulation pipeline, CSV traces, self-checks and plots.

pub mod config;
pub mod plot;
pub mod run;
pub mod validate;

pub use config::ExperimentConfig;
pub use run::{obtain_grid, run_experiment, simulate_traces, RunSummary, Traces};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(cpsdetect::Error),
    #[error("{0}")]
    Io(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl HarnessError {
    /// 1 config, 2 numerical, 3 validation. I/O problems count as config
    /// problems since they come from user-supplied paths.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Numeric(_) => 2,
            HarnessError::Validation(_) => 3,
        }
    }
}

impl From<cpsdetect::Error> for HarnessError {
    fn from(e: cpsdetect::Error) -> Self {
        match e {
            cpsdetect::Error::Io(m) | cpsdetect::Error::GridCache(m) => HarnessError::Io(m),
            other => HarnessError::Numeric(other),
        }
    }
}
