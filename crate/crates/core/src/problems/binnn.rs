//! Fully binary one-hidden-layer classifier.
//!
//! Weight bit `1` is `+1` and bit `0` is `-1`; inputs are stored the same
//! way, so every pre-activation is an xnor-popcount:
//! `sum_d w_d in_d = n - 2 * hamming(w, in)`.

use serde::{Deserialize, Serialize};

use super::{boltzmann_log_prior, boltzmann_sample, Problem, ProblemError};
use crate::bitstate::{BitVector, RngStream};
use crate::sampler::{AbcTarget, SimulationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinNetSpec {
    pub input_dim: usize,
    pub hidden: usize,
}

impl BinNetSpec {
    pub fn new(input_dim: usize, hidden: usize) -> Result<Self, ProblemError> {
        if input_dim == 0 || hidden == 0 {
            return Err(ProblemError::Invalid("network needs at least one input and one hidden unit".into()));
        }
        Ok(Self { input_dim, hidden })
    }

    /// Number of weight bits, `input_dim * hidden + hidden`.
    pub fn dim(&self) -> usize {
        self.input_dim * self.hidden + self.hidden
    }
}

/// Inputs in `{-1, +1}^input_dim` (packed, bit `1` = `+1`) with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    input_dim: usize,
    inputs: Vec<BitVector>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<BitVector>, labels: Vec<u8>) -> Result<Self, ProblemError> {
        if inputs.len() != labels.len() {
            return Err(ProblemError::SizeMismatch {
                expected: inputs.len(),
                got: labels.len(),
            });
        }
        let input_dim = inputs.first().map_or(0, BitVector::dim);
        if let Some(bad) = inputs.iter().find(|x| x.dim() != input_dim) {
            return Err(ProblemError::DimensionMismatch {
                expected: input_dim,
                got: bad.dim(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(ProblemError::Invalid(format!("label {bad} is not binary")));
        }
        Ok(Self {
            input_dim,
            inputs,
            labels,
        })
    }

    /// Builds a dataset from polar rows; every entry must be `-1` or `+1`.
    pub fn from_polar(rows: &[Vec<i8>], labels: Vec<u8>) -> Result<Self, ProblemError> {
        let inputs = rows
            .iter()
            .map(|row| {
                if row.is_empty() {
                    return Err(ProblemError::Invalid("empty input row".into()));
                }
                row.iter()
                    .map(|&v| match v {
                        1 => Ok(true),
                        -1 => Ok(false),
                        other => Err(ProblemError::Invalid(format!("input value {other} is not polar"))),
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(|bits| BitVector::from_bits(&bits))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(inputs, labels)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &[BitVector] {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Input `n` as `-1`/`+1` values.
    pub fn polar(&self, n: usize) -> Vec<i8> {
        self.inputs[n].iter().map(|b| if b { 1 } else { -1 }).collect()
    }

    /// Splits off the first `n` examples.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        let head = Self {
            input_dim: self.input_dim,
            inputs: self.inputs[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        };
        let tail = Self {
            input_dim: self.input_dim,
            inputs: self.inputs[n..].to_vec(),
            labels: self.labels[n..].to_vec(),
        };
        (head, tail)
    }
}

/// Weights unpacked into per-hidden-unit rows for repeated evaluation.
#[derive(Debug, Clone)]
pub struct BinNet {
    rows: Vec<BitVector>,
    out: BitVector,
}

impl BinNet {
    pub fn new(spec: &BinNetSpec, weights: &BitVector) -> Result<Self, ProblemError> {
        if weights.dim() != spec.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: spec.dim(),
                got: weights.dim(),
            });
        }
        let n = spec.input_dim;
        let rows = (0..spec.hidden)
            .map(|j| BitVector::from_bits(&(0..n).map(|d| weights.get(j * n + d)).collect::<Vec<_>>()))
            .collect();
        let out = BitVector::from_bits(&(0..spec.hidden).map(|j| weights.get(n * spec.hidden + j)).collect::<Vec<_>>());
        Ok(Self { rows, out })
    }

    /// Output logit `z`.
    pub fn logit(&self, input: &BitVector) -> Result<i64, ProblemError> {
        let n = self.rows[0].dim();
        if input.dim() != n {
            return Err(ProblemError::DimensionMismatch {
                expected: n,
                got: input.dim(),
            });
        }
        let mut z = 0i64;
        for (j, row) in self.rows.iter().enumerate() {
            let h = n as i64 - 2 * row.hamming(input)? as i64;
            let active = h >= 0;
            z += if active == self.out.get(j) { 1 } else { -1 };
        }
        Ok(z)
    }

    pub fn predict(&self, input: &BitVector) -> Result<u8, ProblemError> {
        Ok(u8::from(self.logit(input)? >= 0))
    }

    pub fn predict_all(&self, data: &LabeledDataset) -> Result<Vec<u8>, ProblemError> {
        data.inputs().iter().map(|x| self.predict(x)).collect()
    }

    pub fn error(&self, data: &LabeledDataset) -> Result<f64, ProblemError> {
        if data.is_empty() {
            return Err(ProblemError::EmptyDataset);
        }
        let wrong = data
            .inputs()
            .iter()
            .zip(data.labels())
            .map(|(x, &y)| self.predict(x).map(|p| usize::from(p != y)))
            .sum::<Result<usize, _>>()?;
        Ok(wrong as f64 / data.len() as f64)
    }
}

pub fn binnn_predict(spec: &BinNetSpec, weights: &BitVector, input: &BitVector) -> Result<u8, ProblemError> {
    BinNet::new(spec, weights)?.predict(input)
}

/// Misclassification fraction of `weights` on `data`.
pub fn binnn_error(spec: &BinNetSpec, weights: &BitVector, data: &LabeledDataset) -> Result<f64, ProblemError> {
    BinNet::new(spec, weights)?.error(data)
}

/// Majority-vote error of an ensemble; ties go to label 1.
pub fn ensemble_vote(spec: &BinNetSpec, models: &[BitVector], data: &LabeledDataset) -> Result<f64, ProblemError> {
    if models.is_empty() {
        return Err(ProblemError::EmptyEnsemble);
    }
    if data.is_empty() {
        return Err(ProblemError::EmptyDataset);
    }
    let mut votes = vec![0usize; data.len()];
    for w in models {
        let net = BinNet::new(spec, w)?;
        for (v, x) in votes.iter_mut().zip(data.inputs()) {
            *v += usize::from(net.predict(x)?);
        }
    }
    let wrong = votes
        .iter()
        .zip(data.labels())
        .filter(|(&v, &y)| u8::from(2 * v >= models.len()) != y)
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Linearly separable polar data: labels are `[t . x > 0]` for a random
/// polar teacher `t`; inputs with `t . x = 0` are redrawn.
pub fn synthetic_separable(input_dim: usize, n: usize, rng: &mut RngStream) -> Result<LabeledDataset, ProblemError> {
    if input_dim == 0 {
        return Err(ProblemError::Invalid("input_dim must be at least 1".into()));
    }
    let teacher = BitVector::bernoulli(input_dim, 0.5, rng)?;
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while inputs.len() < n {
        let x = BitVector::bernoulli(input_dim, 0.5, rng)?;
        let dot = input_dim as i64 - 2 * teacher.hamming(&x)? as i64;
        if dot != 0 {
            labels.push(u8::from(dot > 0));
            inputs.push(x);
        }
    }
    LabeledDataset::new(inputs, labels)
}

/// Classification problem with a Boltzmann prior and the training error as
/// ABC distance.
#[derive(Debug, Clone)]
pub struct BinNnProblem {
    spec: BinNetSpec,
    train: LabeledDataset,
    test: LabeledDataset,
}

impl BinNnProblem {
    pub fn new(spec: BinNetSpec, train: LabeledDataset, test: LabeledDataset) -> Result<Self, ProblemError> {
        for d in [&train, &test] {
            if d.is_empty() {
                return Err(ProblemError::EmptyDataset);
            }
            if d.input_dim() != spec.input_dim {
                return Err(ProblemError::DimensionMismatch {
                    expected: spec.input_dim,
                    got: d.input_dim(),
                });
            }
        }
        Ok(Self { spec, train, test })
    }

    pub fn spec(&self) -> &BinNetSpec {
        &self.spec
    }

    pub fn train(&self) -> &LabeledDataset {
        &self.train
    }

    pub fn test(&self) -> &LabeledDataset {
        &self.test
    }
}

impl AbcTarget for BinNnProblem {
    type Observation = Vec<u8>;

    fn log_prior(&self, x: &BitVector) -> f64 {
        boltzmann_log_prior(x)
    }

    fn simulate(&self, x: &BitVector, _rng: &mut RngStream) -> Result<Vec<u8>, SimulationError> {
        BinNet::new(&self.spec, x)
            .and_then(|net| net.predict_all(&self.train))
            .map_err(|e| SimulationError(e.to_string()))
    }

    fn distance(&self, simulated: &Vec<u8>, observed: &Vec<u8>) -> f64 {
        if simulated.len() != observed.len() || observed.is_empty() {
            return f64::INFINITY;
        }
        let wrong = simulated.iter().zip(observed).filter(|(a, b)| a != b).count();
        wrong as f64 / observed.len() as f64
    }
}

impl Problem for BinNnProblem {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn sample_prior(&self, rng: &mut RngStream) -> BitVector {
        boltzmann_sample(self.spec.dim(), rng)
    }

    fn observed(&self) -> &Vec<u8> {
        &self.train.labels
    }

    fn error(&self, x: &BitVector) -> f64 {
        binnn_error(&self.spec, x, &self.train).expect("chain dimension matches the network")
    }
}
