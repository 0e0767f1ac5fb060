//! Likelihood-free inference over binary parameter spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`bitstate`]: packed bit vectors and seeded random streams.
//! - [`kernels`]: population-conditioned proposals (`xor`, `mut`, `mut+xor`,
//!   `mut+crx`, `dde-mc` and its variants, the independent sampler) with an
//!   exact-PMF oracle for small dimensions.
//! - [`sampler`]: likelihood-based population Metropolis and the
//!   population MCMC-ABC step, sweeps and runs.
//! - [`problems`]: QMR-DT, binary neural networks and tabular architecture
//!   search.
//! - [`harness`]: experiment configuration, metrics and CSV/JSON output.

pub mod bitstate;
pub mod harness;
pub mod kernels;
pub mod problems;
pub mod sampler;
