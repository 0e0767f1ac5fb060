//! Benchmark problems: QMR-DT, binary neural networks and tabular
//! architecture search.

pub mod binnn;
pub mod idx;
pub mod nas;
pub mod qmr;

use thiserror::Error;

use crate::bitstate::{BitError, BitVector, RngStream};
use crate::sampler::{AbcTarget, LikelihoodTarget};

pub use binnn::{binnn_error, binnn_predict, ensemble_vote, BinNetSpec, BinNnProblem, LabeledDataset};
pub use nas::{nas_encode, nas_query, nas_synth_table, Architecture, NasDecoded, NasProblem, NasTable};
pub use qmr::{
    qmr_distance, qmr_exact_posterior, qmr_log_likelihood, qmr_log_prior, qmr_sample_instance, qmr_simulate,
    ExactPosterior, QmrDtModel, QmrInstance, QmrInstanceParams, QmrProblem,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("size mismatch: expected {expected} items, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("cannot enumerate {dim} bits (limit {max})")]
    EnumerationTooLarge { dim: usize, max: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("architecture {0} is valid but missing from the table")]
    MissingArchitecture(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Bit(#[from] BitError),
}

impl From<std::io::Error> for ProblemError {
    fn from(e: std::io::Error) -> Self {
        ProblemError::Io(e.to_string())
    }
}

/// A benchmark problem as the harness sees it: an ABC target with a prior
/// sampler, an observed data set and a per-chain error metric.
pub trait Problem: AbcTarget {
    fn dim(&self) -> usize;
    fn sample_prior(&self, rng: &mut RngStream) -> BitVector;
    fn observed(&self) -> &Self::Observation;
    /// Error reported in metrics for a single chain.
    fn error(&self, x: &BitVector) -> f64;
    /// Exact likelihood form, when the problem has one.
    fn likelihood(&self) -> Option<&dyn LikelihoodTarget> {
        None
    }
}

/// `ln h(x) = -popcount(x) / dim`, the unnormalised Boltzmann prior.
pub fn boltzmann_log_prior(x: &BitVector) -> f64 {
    -(x.popcount() as f64) / x.dim() as f64
}

/// Exact draw from the normalised Boltzmann prior: independent bits with
/// `P(x_l = 1) = 1 / (1 + e^{1/D})`.
pub fn boltzmann_sample(dim: usize, rng: &mut RngStream) -> BitVector {
    let theta = 1.0 / (1.0 + (1.0 / dim as f64).exp());
    BitVector::bernoulli(dim, theta, rng).expect("theta lies in (0, 1)")
}
