//! Population-conditioned proposal kernels over `{0,1}^D`.
//!
//! Every kernel is a pure function of `(spec, chain index, population, rng)`.
//! Difference-based kernels draw an ordered pair `(j, k)` of distinct chains,
//! both different from the proposing chain `i`, and use `x_j xor x_k` as the
//! difference vector. [`proposal_pmf_exact`] gives the exact proposal
//! distribution for small dimensions and is the oracle the tests check the
//! samplers against.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstate::{check_probability, BitError, BitVector, RngStream};

/// Largest dimension [`proposal_pmf_exact`] will enumerate.
pub const MAX_EXACT_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("population has {size} chains, kernel needs at least {required}")]
    PopulationTooSmall { size: usize, required: usize },
    #[error("chain index {index} out of range for population of {size}")]
    ChainOutOfRange { index: usize, size: usize },
    #[error("population is empty")]
    EmptyPopulation,
    #[error("exact PMF enumeration limited to dim <= {max}, got {dim}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("unknown kernel kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Bit(#[from] BitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "ind-samp")]
    IndSamp,
    #[serde(rename = "mut")]
    Mut,
    #[serde(rename = "mut+crx")]
    MutCrx,
    #[serde(rename = "mut+xor")]
    MutXor,
    #[serde(rename = "xor")]
    Xor,
    #[serde(rename = "dde-mc")]
    DdeMc,
    #[serde(rename = "dde-mc1")]
    DdeMc1,
    #[serde(rename = "dde-mc2")]
    DdeMc2,
}

impl KernelKind {
    pub const ALL: [KernelKind; 8] = [
        KernelKind::IndSamp,
        KernelKind::Mut,
        KernelKind::MutCrx,
        KernelKind::MutXor,
        KernelKind::Xor,
        KernelKind::DdeMc,
        KernelKind::DdeMc1,
        KernelKind::DdeMc2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::IndSamp => "ind-samp",
            KernelKind::Mut => "mut",
            KernelKind::MutCrx => "mut+crx",
            KernelKind::MutXor => "mut+xor",
            KernelKind::Xor => "xor",
            KernelKind::DdeMc => "dde-mc",
            KernelKind::DdeMc1 => "dde-mc1",
            KernelKind::DdeMc2 => "dde-mc2",
        }
    }

    /// Minimum population size the kernel can operate on.
    pub fn min_population(self) -> usize {
        match self {
            KernelKind::IndSamp | KernelKind::Mut => 1,
            KernelKind::MutCrx => 2,
            KernelKind::MutXor | KernelKind::Xor | KernelKind::DdeMc | KernelKind::DdeMc1 | KernelKind::DdeMc2 => 3,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| KernelError::UnknownKind(s.to_string()))
    }
}

fn default_p_flip() -> f64 {
    0.01
}

fn default_half() -> f64 {
    0.5
}

/// One proposal kernel and its hyperparameters.
///
/// `p_flip` drives the bit-flip noise (mut, mut+crx, mut+xor, dde-mc,
/// dde-mc1), `pi` is the probability of taking the mutation branch in the
/// mixture kernels and `theta` is the Bernoulli parameter of the independent
/// sampler. Unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default = "default_p_flip")]
    pub p_flip: f64,
    #[serde(default = "default_half")]
    pub pi: f64,
    #[serde(default = "default_half")]
    pub theta: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            p_flip: default_p_flip(),
            pi: default_half(),
            theta: default_half(),
        }
    }

    pub fn with_p_flip(mut self, p_flip: f64) -> Self {
        self.p_flip = p_flip;
        self
    }

    pub fn with_pi(mut self, pi: f64) -> Self {
        self.pi = pi;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        use KernelKind::*;
        if matches!(self.kind, Mut | MutCrx | MutXor | DdeMc | DdeMc1) {
            check_probability("p_flip", self.p_flip)?;
        }
        if matches!(self.kind, MutCrx | MutXor) {
            check_probability("pi", self.pi)?;
        }
        if self.kind == IndSamp {
            check_probability("theta", self.theta)?;
        }
        Ok(())
    }

    /// Whether the kernel reaches every state from every state in one step.
    pub fn is_irreducible(&self) -> bool {
        use KernelKind::*;
        let open = |p: f64| p > 0.0 && p < 1.0;
        match self.kind {
            IndSamp => open(self.theta),
            Mut | DdeMc | DdeMc1 => open(self.p_flip),
            MutXor | MutCrx => open(self.p_flip) && open(self.pi),
            DdeMc2 => true,
            Xor => false,
        }
    }

    /// Whether `q(x'|x) == q(x|x')` holds when only the proposing chain
    /// changes. The independent sampler is symmetric only at `theta = 0.5`.
    pub fn is_symmetric(&self) -> bool {
        match self.kind {
            KernelKind::MutCrx => false,
            KernelKind::IndSamp => self.theta == 0.5,
            _ => true,
        }
    }

    /// Short label used in file names and CSV rows.
    pub fn label(&self) -> String {
        self.kind.name().to_string()
    }
}

/// The joint state of the population sampler: `C` chains of equal dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    chains: Vec<BitVector>,
}

impl Population {
    pub fn new(chains: Vec<BitVector>) -> Result<Self, KernelError> {
        let first = chains.first().ok_or(KernelError::EmptyPopulation)?;
        let dim = first.dim();
        if let Some(bad) = chains.iter().find(|c| c.dim() != dim) {
            return Err(BitError::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            }
            .into());
        }
        Ok(Self { chains })
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.chains[0].dim()
    }

    pub fn get(&self, i: usize) -> &BitVector {
        &self.chains[i]
    }

    /// Replaces chain `i`. Panics on dimension mismatch or bad index.
    pub fn set(&mut self, i: usize, x: BitVector) {
        assert_eq!(x.dim(), self.dim(), "chain dimension must not change");
        self.chains[i] = x;
    }

    pub fn chains(&self) -> &[BitVector] {
        &self.chains
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BitVector> {
        self.chains.iter()
    }

    pub fn into_chains(self) -> Vec<BitVector> {
        self.chains
    }

    fn check_index(&self, i: usize) -> Result<(), KernelError> {
        if i < self.len() {
            Ok(())
        } else {
            Err(KernelError::ChainOutOfRange {
                index: i,
                size: self.len(),
            })
        }
    }

    fn require(&self, required: usize) -> Result<(), KernelError> {
        if self.len() >= required {
            Ok(())
        } else {
            Err(KernelError::PopulationTooSmall {
                size: self.len(),
                required,
            })
        }
    }
}

/// Maps `r` in `0..n - excluded.len()` to the `r`-th index of `0..n` not in
/// `excluded` (which must be sorted and distinct).
fn nth_excluding(mut r: usize, excluded: &[usize]) -> usize {
    for &e in excluded {
        if r >= e {
            r += 1;
        }
    }
    r
}

fn draw_pair(i: usize, size: usize, rng: &mut RngStream) -> (usize, usize) {
    let j = nth_excluding(rng.below(size - 1), &[i]);
    let mut excl = [i, j];
    excl.sort_unstable();
    let k = nth_excluding(rng.below(size - 2), &excl);
    (j, k)
}

/// Ordered pairs `(j, k)` with `j != k` and both different from `i`.
fn ordered_pairs(i: usize, size: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..size)
        .flat_map(move |j| (0..size).map(move |k| (j, k)))
        .filter(move |&(j, k)| j != k && j != i && k != i)
}

/// Draws a difference vector `x_j xor x_k` for chain `i`, with the ordered pair
/// `(j, k)` uniform over distinct chains other than `i`.
pub fn delta_sample(i: usize, pop: &Population, rng: &mut RngStream) -> Result<BitVector, KernelError> {
    pop.require(3)?;
    pop.check_index(i)?;
    let (j, k) = draw_pair(i, pop.len(), rng);
    Ok(pop.get(j).xor(pop.get(k))?)
}

/// Uniform crossover: each bit comes from `partner` with probability 1/2.
pub fn crossover(x: &BitVector, partner: &BitVector, rng: &mut RngStream) -> Result<BitVector, KernelError> {
    if x.dim() != partner.dim() {
        return Err(BitError::DimensionMismatch {
            left: x.dim(),
            right: partner.dim(),
        }
        .into());
    }
    let mask = BitVector::bernoulli(x.dim(), 0.5, rng)?;
    let words = x
        .words()
        .iter()
        .zip(partner.words())
        .zip(mask.words())
        .map(|((a, b), m)| (a & !m) | (b & m))
        .collect();
    Ok(BitVector::from_words(x.dim(), words))
}

/// Draws a candidate for chain `i`. The population is never modified.
///
/// Mixture kernels draw their branch indicator before any other randomness.
pub fn propose(spec: &KernelSpec, i: usize, pop: &Population, rng: &mut RngStream) -> Result<BitVector, KernelError> {
    spec.validate()?;
    pop.check_index(i)?;
    pop.require(spec.kind.min_population())?;
    let x = pop.get(i);
    let out = match spec.kind {
        KernelKind::IndSamp => BitVector::bernoulli(x.dim(), spec.theta, rng)?,
        KernelKind::Mut => x.mutate(spec.p_flip, rng)?,
        KernelKind::Xor => x.xor(&delta_sample(i, pop, rng)?)?,
        KernelKind::MutXor => {
            if rng.uniform() < spec.pi {
                x.mutate(spec.p_flip, rng)?
            } else {
                x.xor(&delta_sample(i, pop, rng)?)?
            }
        }
        KernelKind::MutCrx => {
            if rng.uniform() < spec.pi {
                x.mutate(spec.p_flip, rng)?
            } else {
                let partner = nth_excluding(rng.below(pop.len() - 1), &[i]);
                crossover(x, pop.get(partner), rng)?
            }
        }
        KernelKind::DdeMc => {
            let delta = delta_sample(i, pop, rng)?;
            x.xor(&delta.mutate(spec.p_flip, rng)?)?
        }
        KernelKind::DdeMc1 => {
            let delta = delta_sample(i, pop, rng)?;
            x.xor(&delta)?.mutate(spec.p_flip, rng)?
        }
        KernelKind::DdeMc2 => {
            let delta = delta_sample(i, pop, rng)?;
            let noise = BitVector::bernoulli(x.dim(), 0.5, rng)?;
            let mut out = x.xor(&delta)?;
            out.xor_assign(&noise)?;
            out
        }
    };
    Ok(out)
}

/// Exact proposal distribution over `{0,1}^dim` (nonzero entries only).
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    dim: usize,
    probs: BTreeMap<BitVector, f64>,
}

impl Pmf {
    fn from_dense(dim: usize, dense: &[f64]) -> Self {
        let probs = dense
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (BitVector::from_index(s as u64, dim), p))
            .collect();
        Self { dim, probs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prob(&self, x: &BitVector) -> f64 {
        self.probs.get(x).copied().unwrap_or(0.0)
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitVector, f64)> {
        self.probs.iter().map(|(k, &v)| (k, v))
    }

    /// Dense vector indexed by [`BitVector::to_index`].
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; 1 << self.dim];
        for (x, p) in self.iter() {
            dense[x.to_index() as usize] = p;
        }
        dense
    }
}

fn flip_prob(flips: u32, dim: usize, p: f64) -> f64 {
    p.powi(flips as i32) * (1.0 - p).powi(dim as i32 - flips as i32)
}

/// Per-mask probabilities of independent bit flips.
fn flip_mask_probs(dim: usize, p: f64) -> Vec<f64> {
    (0..1u64 << dim).map(|m| flip_prob(m.count_ones(), dim, p)).collect()
}

/// Exact proposal PMF for chain `i`, by enumeration over difference pairs
/// and flip/noise masks.
pub fn proposal_pmf_exact(spec: &KernelSpec, i: usize, pop: &Population) -> Result<Pmf, KernelError> {
    spec.validate()?;
    pop.check_index(i)?;
    pop.require(spec.kind.min_population())?;
    let dim = pop.dim();
    if dim > MAX_EXACT_DIM {
        return Err(KernelError::DimensionTooLarge { dim, max: MAX_EXACT_DIM });
    }
    let n = 1usize << dim;
    let x = pop.get(i).to_index() as usize;
    let idx = |c: usize| pop.get(c).to_index() as usize;
    let pairs: Vec<(usize, usize)> = ordered_pairs(i, pop.len()).collect();
    let pair_w = if pairs.is_empty() { 0.0 } else { 1.0 / pairs.len() as f64 };

    let mut dense = vec![0.0; n];
    let add_mut = |dense: &mut [f64], weight: f64| {
        for (s, d) in dense.iter_mut().enumerate() {
            *d += weight * flip_prob(((s ^ x) as u64).count_ones(), dim, spec.p_flip);
        }
    };
    let add_xor = |dense: &mut [f64], weight: f64| {
        for &(j, k) in &pairs {
            dense[x ^ idx(j) ^ idx(k)] += weight * pair_w;
        }
    };

    match spec.kind {
        KernelKind::IndSamp => {
            for (s, d) in dense.iter_mut().enumerate() {
                let ones = (s as u64).count_ones() as i32;
                *d = spec.theta.powi(ones) * (1.0 - spec.theta).powi(dim as i32 - ones);
            }
        }
        KernelKind::Mut => add_mut(&mut dense, 1.0),
        KernelKind::Xor => add_xor(&mut dense, 1.0),
        KernelKind::MutXor => {
            add_mut(&mut dense, spec.pi);
            add_xor(&mut dense, 1.0 - spec.pi);
        }
        KernelKind::MutCrx => {
            add_mut(&mut dense, spec.pi);
            let partner_w = (1.0 - spec.pi) / (pop.len() - 1) as f64;
            for c in (0..pop.len()).filter(|&c| c != i) {
                let partner = idx(c);
                let disagree = x ^ partner;
                let w = partner_w * 0.5f64.powi((disagree as u64).count_ones() as i32);
                // Every subset of the disagreeing bits is equally likely.
                let mut sub = disagree;
                loop {
                    dense[x ^ sub] += w;
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & disagree;
                }
            }
        }
        KernelKind::DdeMc => {
            // x xor mut(delta): enumerate flip masks applied to delta.
            let masks = flip_mask_probs(dim, spec.p_flip);
            for &(j, k) in &pairs {
                let delta = idx(j) ^ idx(k);
                for (m, &pm) in masks.iter().enumerate() {
                    dense[x ^ (delta ^ m)] += pair_w * pm;
                }
            }
        }
        KernelKind::DdeMc1 => {
            // mut(x xor delta): closed form in the Hamming distance to the
            // pre-mutation candidate.
            for (s, d) in dense.iter_mut().enumerate() {
                *d = pairs
                    .iter()
                    .map(|&(j, k)| {
                        let centre = x ^ idx(j) ^ idx(k);
                        pair_w * flip_prob(((s ^ centre) as u64).count_ones(), dim, spec.p_flip)
                    })
                    .sum();
            }
        }
        KernelKind::DdeMc2 => {
            let noise_w = 1.0 / n as f64;
            for &(j, k) in &pairs {
                let centre = x ^ idx(j) ^ idx(k);
                for e in 0..n {
                    dense[centre ^ e] += pair_w * noise_w;
                }
            }
        }
    }
    Ok(Pmf::from_dense(dim, &dense))
}
