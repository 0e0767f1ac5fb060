use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bitstate::BitVector;
use crate::kernels::Population;
use crate::problems::binnn::BinNet;
use crate::problems::{
    ensemble_vote, qmr_exact_posterior, qmr_log_likelihood, qmr_log_prior, BinNetSpec, LabeledDataset, ProblemError,
    QmrDtModel,
};

/// Population average and minimum of a per-chain error.
pub fn error_metrics<F>(pop: &Population, mut error: F) -> (f64, f64)
where
    F: FnMut(&BitVector) -> f64,
{
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for x in pop.iter() {
        let e = error(x);
        sum += e;
        min = min.min(e);
    }
    (sum / pop.len() as f64, min)
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Stat {
    /// `se` is 0 for fewer than two values; `mean` is NaN for none.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    /// Models pooled per repeat (last populations x chains).
    pub models_per_repeat: usize,
    pub ensemble_test_error: Stat,
    /// Test error of the pooled model with the lowest training error.
    pub best_single_test_error: Stat,
    pub per_repeat: Vec<EnsembleRepeat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRepeat {
    pub ensemble_test_error: f64,
    pub best_single_test_error: f64,
    pub best_single_train_error: f64,
}

/// Majority-vote and best-single-model test errors, one entry of
/// `populations` per repeat holding that repeat's last populations.
pub fn ensemble_report(
    spec: &BinNetSpec,
    populations: &[Vec<Population>],
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<EnsembleReport, HarnessError> {
    let mut per_repeat = Vec::with_capacity(populations.len());
    let mut models_per_repeat = 0;
    for pops in populations {
        let models: Vec<BitVector> = pops.iter().flat_map(|p| p.iter().cloned()).collect();
        models_per_repeat = models.len();
        let ensemble = ensemble_vote(spec, &models, test)?;
        let mut best: Option<(f64, f64)> = None;
        for w in &models {
            let net = BinNet::new(spec, w)?;
            let train_err = net.error(train)?;
            if best.is_none_or(|(b, _)| train_err < b) {
                best = Some((train_err, net.error(test)?));
            }
        }
        let (train_err, test_err) = best.ok_or(ProblemError::EmptyEnsemble)?;
        per_repeat.push(EnsembleRepeat {
            ensemble_test_error: ensemble,
            best_single_test_error: test_err,
            best_single_train_error: train_err,
        });
    }
    let col = |f: fn(&EnsembleRepeat) -> f64| Stat::of(&per_repeat.iter().map(f).collect::<Vec<_>>());
    Ok(EnsembleReport {
        models_per_repeat,
        ensemble_test_error: col(|r| r.ensemble_test_error),
        best_single_test_error: col(|r| r.best_single_test_error),
        per_repeat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    /// `-(ln p(x) + ln p(y | x))` for every final chain.
    pub chain_values: Vec<f64>,
    pub chains: Vec<BitVector>,
    /// Minimum of the same quantity over all states, when enumerable.
    pub reference_min: Option<f64>,
    pub reference_state: Option<BitVector>,
}

pub fn posterior_report(
    model: &QmrDtModel,
    data: &[BitVector],
    pop: &Population,
    max_enumeration: usize,
) -> Result<PosteriorReport, HarnessError> {
    let chain_values = pop
        .iter()
        .map(|x| Ok(-(qmr_log_prior(model, x)? + qmr_log_likelihood(model, x, data)?)))
        .collect::<Result<Vec<_>, ProblemError>>()?;
    let (reference_min, reference_state) = match qmr_exact_posterior(model, data, max_enumeration) {
        Ok(post) => {
            let map = post.map_state();
            (Some(-post.log_joint(&map)), Some(map))
        }
        Err(ProblemError::EnumerationTooLarge { .. }) => (None, None),
        Err(e) => return Err(e.into()),
    };
    Ok(PosteriorReport {
        chain_values,
        chains: pop.chains().to_vec(),
        reference_min,
        reference_state,
    })
}
