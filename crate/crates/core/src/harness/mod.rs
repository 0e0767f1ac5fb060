//! Experiment configuration, execution and output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod run;

use thiserror::Error;

use crate::kernels::KernelError;
use crate::problems::ProblemError;
use crate::sampler::SamplerError;

pub use config::{ExperimentConfig, Metric, ProblemConfig, SamplerMode, Variant};
pub use metrics::{ensemble_report, error_metrics, posterior_report, EnsembleReport, PosteriorReport, Stat};
pub use output::{csv_text, replay, resolve_out_dir, summary_json, write_outputs, ReplayOutcome};
pub use run::{run_experiment, ExperimentOutput, MetricsRow, RunOptions, RunRecord, VariantOutput};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("io error: {0}")]
    Io(String),
    #[error("replay failed: {0}")]
    Replay(String),
}

impl HarnessError {
    /// Configuration problems are user errors; everything else is a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config { .. })
    }
}
