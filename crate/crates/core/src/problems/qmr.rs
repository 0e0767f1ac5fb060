//! Noisy-OR QMR-DT network: diseases `x in {0,1}^L`, findings `y in {0,1}^M`,
//! `p(y_i = 1 | x) = 1 - (1 - q_i0) prod_l (1 - q_il)^{x_l}` and independent
//! Bernoulli disease priors.

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{Problem, ProblemError};
use crate::bitstate::{BitVector, RngStream};
use crate::sampler::{AbcTarget, LikelihoodTarget, SimulationError};

/// Default enumeration bound for exact posteriors.
pub const DEFAULT_MAX_ENUMERATION: usize = 20;

fn ln_one_minus(q: f64) -> f64 {
    (-q).ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "QmrRepr", try_from = "QmrRepr")]
pub struct QmrDtModel {
    diseases: usize,
    findings: usize,
    leak: Vec<f64>,
    /// Row-major `findings x diseases`.
    assoc: Vec<f64>,
    prior_p: Vec<f64>,
    // ln(1 - q) caches
    log_keep_leak: Vec<f64>,
    log_keep_assoc: Vec<f64>,
}

/// Serialized form: full-precision probabilities, one row per finding.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct QmrRepr {
    diseases: usize,
    findings: usize,
    prior_p: Vec<f64>,
    leak: Vec<f64>,
    assoc: Vec<Vec<f64>>,
}

impl From<QmrDtModel> for QmrRepr {
    fn from(m: QmrDtModel) -> Self {
        let assoc = m.assoc.chunks(m.diseases).map(<[f64]>::to_vec).collect();
        QmrRepr {
            diseases: m.diseases,
            findings: m.findings,
            prior_p: m.prior_p,
            leak: m.leak,
            assoc,
        }
    }
}

impl TryFrom<QmrRepr> for QmrDtModel {
    type Error = ProblemError;

    fn try_from(r: QmrRepr) -> Result<Self, Self::Error> {
        if r.assoc.len() != r.findings || r.assoc.iter().any(|row| row.len() != r.diseases) {
            return Err(ProblemError::Invalid("association matrix shape".into()));
        }
        QmrDtModel::new(r.leak, r.assoc.concat(), r.prior_p)
    }
}

impl QmrDtModel {
    /// `assoc` is row-major `findings x diseases`.
    pub fn new(leak: Vec<f64>, assoc: Vec<f64>, prior_p: Vec<f64>) -> Result<Self, ProblemError> {
        let findings = leak.len();
        let diseases = prior_p.len();
        if findings == 0 || diseases == 0 {
            return Err(ProblemError::Invalid("QMR-DT needs at least one disease and one finding".into()));
        }
        if assoc.len() != findings * diseases {
            return Err(ProblemError::Invalid(format!(
                "association matrix has {} entries, expected {findings} x {diseases}",
                assoc.len()
            )));
        }
        if let Some(q) = leak.iter().chain(&assoc).find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(ProblemError::Invalid(format!("probability {q} outside [0, 1]")));
        }
        if let Some(p) = prior_p.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(ProblemError::Invalid(format!("prior probability {p} must lie in (0, 1)")));
        }
        Ok(Self {
            diseases,
            findings,
            log_keep_leak: leak.iter().map(|&q| ln_one_minus(q)).collect(),
            log_keep_assoc: assoc.iter().map(|&q| ln_one_minus(q)).collect(),
            leak,
            assoc,
            prior_p,
        })
    }

    pub fn diseases(&self) -> usize {
        self.diseases
    }

    pub fn findings(&self) -> usize {
        self.findings
    }

    pub fn leak(&self) -> &[f64] {
        &self.leak
    }

    pub fn assoc(&self, finding: usize, disease: usize) -> f64 {
        self.assoc[finding * self.diseases + disease]
    }

    pub fn prior_p(&self) -> &[f64] {
        &self.prior_p
    }

    fn check_diseases(&self, x: &BitVector) -> Result<(), ProblemError> {
        if x.dim() == self.diseases {
            Ok(())
        } else {
            Err(ProblemError::DimensionMismatch {
                expected: self.diseases,
                got: x.dim(),
            })
        }
    }

    /// `ln(1 - p_i)` for every finding, accumulated over active diseases.
    fn log_keep(&self, x: &BitVector) -> Vec<f64> {
        let mut s = self.log_keep_leak.clone();
        for l in x.ones_indices() {
            for (i, si) in s.iter_mut().enumerate() {
                *si += self.log_keep_assoc[i * self.diseases + l];
            }
        }
        s
    }

    /// Finding probabilities `p(y_i = 1 | x)`.
    pub fn finding_probs(&self, x: &BitVector) -> Result<Vec<f64>, ProblemError> {
        self.check_diseases(x)?;
        Ok(self.log_keep(x).into_iter().map(|s| -s.exp_m1()).collect())
    }
}

/// Log-likelihood of a set of finding vectors given diseases `x`.
///
/// Returns `-inf` when a finding is observed that has probability zero
/// (or absent with probability one).
pub fn qmr_log_likelihood(model: &QmrDtModel, x: &BitVector, data: &[BitVector]) -> Result<f64, ProblemError> {
    model.check_diseases(x)?;
    let counts = FindingCounts::new(model, data)?;
    Ok(counts.log_likelihood(model, x))
}

pub fn qmr_log_prior(model: &QmrDtModel, x: &BitVector) -> Result<f64, ProblemError> {
    model.check_diseases(x)?;
    Ok(model
        .prior_p
        .iter()
        .enumerate()
        .map(|(l, &p)| if x.get(l) { p.ln() } else { ln_one_minus(p) })
        .sum())
}

/// One finding vector drawn from the noisy-OR network, one uniform per
/// finding in index order.
pub fn qmr_simulate(model: &QmrDtModel, x: &BitVector, rng: &mut RngStream) -> Result<BitVector, ProblemError> {
    let probs = model.finding_probs(x)?;
    let mut y = BitVector::zeros(model.findings);
    for (i, p) in probs.into_iter().enumerate() {
        if rng.uniform() < p {
            y.set(i, true);
        }
    }
    Ok(y)
}

/// Mean Hamming distance between index-paired simulated and observed finding vectors.
pub fn qmr_distance(simulated: &[BitVector], observed: &[BitVector]) -> Result<f64, ProblemError> {
    if simulated.len() != observed.len() || observed.is_empty() {
        return Err(ProblemError::SizeMismatch {
            expected: observed.len(),
            got: simulated.len(),
        });
    }
    let mut total = 0usize;
    for (s, o) in simulated.iter().zip(observed) {
        total += s.hamming(o)?;
    }
    Ok(total as f64 / observed.len() as f64)
}

/// Per-finding positive counts over an observed data set; the likelihood of
/// `N` vectors only depends on these.
#[derive(Debug, Clone, PartialEq)]
struct FindingCounts {
    n: usize,
    positives: Vec<usize>,
}

impl FindingCounts {
    fn new(model: &QmrDtModel, data: &[BitVector]) -> Result<Self, ProblemError> {
        let mut positives = vec![0usize; model.findings];
        for y in data {
            if y.dim() != model.findings {
                return Err(ProblemError::DimensionMismatch {
                    expected: model.findings,
                    got: y.dim(),
                });
            }
            for i in y.ones_indices() {
                positives[i] += 1;
            }
        }
        Ok(Self { n: data.len(), positives })
    }

    fn log_likelihood(&self, model: &QmrDtModel, x: &BitVector) -> f64 {
        let mut total = 0.0;
        for (s, &pos) in model.log_keep(x).into_iter().zip(&self.positives) {
            let neg = self.n - pos;
            if pos > 0 {
                // ln p = ln(1 - e^s)
                total += pos as f64 * (-s.exp_m1()).ln();
            }
            if neg > 0 {
                total += neg as f64 * s;
            }
        }
        total
    }
}

/// A sampled benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmrInstance {
    pub model: QmrDtModel,
    pub x_true: BitVector,
    pub observed: Vec<BitVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmrInstanceParams {
    pub diseases: usize,
    pub findings: usize,
    pub beta_a: f64,
    pub beta_b: f64,
    pub prior_p: f64,
    pub n_obs: usize,
}

impl Default for QmrInstanceParams {
    fn default() -> Self {
        Self {
            diseases: 10,
            findings: 20,
            beta_a: 0.15,
            beta_b: 0.15,
            prior_p: 0.5,
            n_obs: 10,
        }
    }
}

/// Samples network probabilities i.i.d. from `Beta(beta_a, beta_b)` (leaks
/// first, then the association matrix row by row), draws `x_true` from the
/// prior and simulates `n_obs` observed finding vectors at `x_true`.
pub fn qmr_sample_instance(params: &QmrInstanceParams, rng: &mut RngStream) -> Result<QmrInstance, ProblemError> {
    let QmrInstanceParams {
        diseases,
        findings,
        beta_a,
        beta_b,
        prior_p,
        n_obs,
    } = *params;
    if diseases == 0 || findings == 0 {
        return Err(ProblemError::Invalid("QMR-DT needs at least one disease and one finding".into()));
    }
    if n_obs == 0 {
        return Err(ProblemError::Invalid("n_obs must be at least 1".into()));
    }
    let beta = Beta::new(beta_a, beta_b)
        .map_err(|e| ProblemError::Invalid(format!("Beta({beta_a}, {beta_b}): {e}")))?;
    let leak: Vec<f64> = (0..findings).map(|_| beta.sample(rng)).collect();
    let assoc: Vec<f64> = (0..findings * diseases).map(|_| beta.sample(rng)).collect();
    let model = QmrDtModel::new(leak, assoc, vec![prior_p; diseases])?;
    let x_true = sample_prior(&model, rng);
    let observed = (0..n_obs)
        .map(|_| qmr_simulate(&model, &x_true, rng))
        .collect::<Result<_, _>>()?;
    Ok(QmrInstance { model, x_true, observed })
}

pub fn sample_prior(model: &QmrDtModel, rng: &mut RngStream) -> BitVector {
    let mut x = BitVector::zeros(model.diseases);
    for (l, &p) in model.prior_p.iter().enumerate() {
        if rng.uniform() < p {
            x.set(l, true);
        }
    }
    x
}

/// Exact posterior over all `2^L` disease states.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    diseases: usize,
    log_joint: Vec<f64>,
    probs: Vec<f64>,
    log_evidence: f64,
}

impl ExactPosterior {
    pub fn diseases(&self) -> usize {
        self.diseases
    }

    /// Probabilities indexed by [`BitVector::to_index`].
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: &BitVector) -> f64 {
        self.probs[x.to_index() as usize]
    }

    /// `ln p(x) + ln p(y | x)` for state `x`.
    pub fn log_joint(&self, x: &BitVector) -> f64 {
        self.log_joint[x.to_index() as usize]
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// Maximum a posteriori state (lowest index on ties).
    pub fn map_state(&self) -> BitVector {
        let (best, _) = self
            .log_joint
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (s, &v)| if v > acc.1 { (s, v) } else { acc });
        BitVector::from_index(best as u64, self.diseases)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BitVector, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(s, &p)| (BitVector::from_index(s as u64, self.diseases), p))
    }
}

pub fn qmr_exact_posterior(
    model: &QmrDtModel,
    data: &[BitVector],
    max_diseases: usize,
) -> Result<ExactPosterior, ProblemError> {
    let l = model.diseases;
    if l > max_diseases || l > 30 {
        return Err(ProblemError::EnumerationTooLarge {
            dim: l,
            max: max_diseases.min(30),
        });
    }
    let counts = FindingCounts::new(model, data)?;
    let log_joint: Vec<f64> = (0..1u64 << l)
        .map(|s| {
            let x = BitVector::from_index(s, l);
            let lp = qmr_log_prior(model, &x).expect("dims match");
            lp + counts.log_likelihood(model, &x)
        })
        .collect();
    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(ProblemError::Invalid("observed data has zero probability under every state".into()));
    }
    let sum: f64 = log_joint.iter().map(|v| (v - max).exp()).sum();
    let log_evidence = max + sum.ln();
    let probs = log_joint.iter().map(|v| (v - log_evidence).exp()).collect();
    Ok(ExactPosterior {
        diseases: l,
        log_joint,
        probs,
        log_evidence,
    })
}

/// QMR-DT instance exposed both as a likelihood target and as a simulator.
/// The per-chain error is the Hamming distance to `x_true`.
#[derive(Debug, Clone)]
pub struct QmrProblem {
    instance: QmrInstance,
    counts: FindingCounts,
}

impl QmrProblem {
    pub fn new(instance: QmrInstance) -> Result<Self, ProblemError> {
        let counts = FindingCounts::new(&instance.model, &instance.observed)?;
        instance.model.check_diseases(&instance.x_true)?;
        Ok(Self { instance, counts })
    }

    pub fn instance(&self) -> &QmrInstance {
        &self.instance
    }

    pub fn model(&self) -> &QmrDtModel {
        &self.instance.model
    }
}

impl LikelihoodTarget for QmrProblem {
    fn log_prior(&self, x: &BitVector) -> f64 {
        qmr_log_prior(&self.instance.model, x).expect("chain dimension matches the model")
    }

    fn log_likelihood(&self, x: &BitVector) -> f64 {
        self.counts.log_likelihood(&self.instance.model, x)
    }
}

impl AbcTarget for QmrProblem {
    type Observation = Vec<BitVector>;

    fn log_prior(&self, x: &BitVector) -> f64 {
        LikelihoodTarget::log_prior(self, x)
    }

    fn simulate(&self, x: &BitVector, rng: &mut RngStream) -> Result<Vec<BitVector>, SimulationError> {
        (0..self.instance.observed.len())
            .map(|_| qmr_simulate(&self.instance.model, x, rng))
            .collect::<Result<_, _>>()
            .map_err(|e| SimulationError(e.to_string()))
    }

    fn distance(&self, simulated: &Vec<BitVector>, observed: &Vec<BitVector>) -> f64 {
        qmr_distance(simulated, observed).unwrap_or(f64::INFINITY)
    }
}

impl Problem for QmrProblem {
    fn dim(&self) -> usize {
        self.instance.model.diseases
    }

    fn sample_prior(&self, rng: &mut RngStream) -> BitVector {
        sample_prior(&self.instance.model, rng)
    }

    fn observed(&self) -> &Vec<BitVector> {
        &self.instance.observed
    }

    fn error(&self, x: &BitVector) -> f64 {
        x.hamming(&self.instance.x_true).expect("dimension matches") as f64
    }

    fn likelihood(&self) -> Option<&dyn LikelihoodTarget> {
        Some(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    fn random_model(l: usize, m: usize, seed: u64) -> QmrDtModel {
        let mut rng = RngStream::new(seed);
        let leak = (0..m).map(|_| rng.uniform() * 0.5).collect();
        let assoc = (0..m * l).map(|_| rng.uniform()).collect();
        let prior = (0..l).map(|_| 0.1 + 0.8 * rng.uniform()).collect();
        QmrDtModel::new(leak, assoc, prior).unwrap()
    }

    /// Direct product evaluation of the noisy-OR likelihood.
    fn naive_log_likelihood(model: &QmrDtModel, x: &BitVector, data: &[BitVector]) -> f64 {
        let mut total = 0.0;
        for y in data {
            for i in 0..model.findings() {
                let mut keep = 1.0 - model.leak()[i];
                for l in 0..model.diseases() {
                    if x.get(l) {
                        keep *= 1.0 - model.assoc(i, l);
                    }
                }
                let p = 1.0 - keep;
                total += if y.get(i) { p.ln() } else { (1.0 - p).ln() };
            }
        }
        total
    }

    #[test]
    fn empty_disease_set_uses_leaks() {
        let m = random_model(4, 6, 1);
        let probs = m.finding_probs(&BitVector::zeros(4)).unwrap();
        for (p, q) in probs.iter().zip(m.leak()) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn single_disease_hand_value() {
        let m = QmrDtModel::new(vec![0.1], vec![0.5], vec![0.5]).unwrap();
        let p = m.finding_probs(&bv("1")).unwrap()[0];
        assert!((p - 0.55).abs() < 1e-15);
        let ll = qmr_log_likelihood(&m, &bv("1"), &[bv("1")]).unwrap();
        assert!((ll - 0.55f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_space_matches_naive_product() {
        for seed in 0..20 {
            let m = random_model(5, 7, seed);
            let mut rng = RngStream::new(100 + seed);
            let x = BitVector::bernoulli(5, 0.5, &mut rng).unwrap();
            let data: Vec<_> = (0..4).map(|_| BitVector::bernoulli(7, 0.5, &mut rng).unwrap()).collect();
            let a = qmr_log_likelihood(&m, &x, &data).unwrap();
            let b = naive_log_likelihood(&m, &x, &data);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn impossible_observation_is_neg_infinity() {
        let m = QmrDtModel::new(vec![0.0], vec![0.0], vec![0.5]).unwrap();
        assert_eq!(qmr_log_likelihood(&m, &bv("1"), &[bv("1")]).unwrap(), f64::NEG_INFINITY);
        let certain = QmrDtModel::new(vec![1.0], vec![0.3], vec![0.5]).unwrap();
        assert_eq!(qmr_log_likelihood(&certain, &bv("0"), &[bv("0")]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(qmr_log_likelihood(&certain, &bv("0"), &[bv("1")]).unwrap(), 0.0);
    }

    #[test]
    fn likelihood_normalises_over_findings() {
        let m = random_model(3, 8, 7);
        for s in 0..8u64 {
            let x = BitVector::from_index(s, 3);
            let total: f64 = (0..1u64 << 8)
                .map(|y| qmr_log_likelihood(&m, &x, &[BitVector::from_index(y, 8)]).unwrap().exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn prior_examples() {
        let m = QmrDtModel::new(vec![0.1; 2], vec![0.2; 8], vec![0.5; 4]).unwrap();
        for s in 0..16 {
            let lp = qmr_log_prior(&m, &BitVector::from_index(s, 4)).unwrap();
            assert!((lp + 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
        }
        let r = random_model(6, 2, 3);
        let ones = qmr_log_prior(&r, &BitVector::ones(6)).unwrap();
        let expect: f64 = r.prior_p().iter().map(|p| p.ln()).sum();
        assert!((ones - expect).abs() < 1e-12);
        let total: f64 = (0..64).map(|s| qmr_log_prior(&r, &BitVector::from_index(s, 6)).unwrap().exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulate_degenerate_networks() {
        let mut rng = RngStream::new(3);
        let zero = QmrDtModel::new(vec![0.0; 5], vec![0.0; 15], vec![0.5; 3]).unwrap();
        let sure = QmrDtModel::new(vec![1.0, 0.0], vec![0.0; 6], vec![0.5; 3]).unwrap();
        for _ in 0..50 {
            assert_eq!(qmr_simulate(&zero, &bv("111"), &mut rng).unwrap().popcount(), 0);
            assert!(qmr_simulate(&sure, &bv("000"), &mut rng).unwrap().get(0));
        }
    }

    #[test]
    fn simulate_matches_probabilities() {
        let m = random_model(4, 5, 11);
        let x = bv("1010");
        let probs = m.finding_probs(&x).unwrap();
        let mut rng = RngStream::new(12);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            for i in qmr_simulate(&m, &x, &mut rng).unwrap().ones_indices() {
                counts[i] += 1;
            }
        }
        for (c, p) in counts.iter().zip(&probs) {
            let se = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!((*c as f64 - n as f64 * p).abs() < 3.0 * se, "{c} vs {p}");
        }
    }

    #[test]
    fn distance_examples() {
        let a = vec![bv("0110"), bv("1111")];
        assert_eq!(qmr_distance(&a, &a).unwrap(), 0.0);
        let b = vec![bv("0111"), bv("1111")];
        assert_eq!(qmr_distance(&b, &a).unwrap(), 0.5);
        assert!(qmr_distance(&a[..1], &a).is_err());
    }

    #[test]
    fn distance_matches_bit_loop() {
        let mut rng = RngStream::new(8);
        for _ in 0..20 {
            let s: Vec<_> = (0..6).map(|_| BitVector::bernoulli(20, 0.5, &mut rng).unwrap()).collect();
            let o: Vec<_> = (0..6).map(|_| BitVector::bernoulli(20, 0.5, &mut rng).unwrap()).collect();
            let mut naive = 0usize;
            for (a, b) in s.iter().zip(&o) {
                naive += (0..20).filter(|&l| a.get(l) != b.get(l)).count();
            }
            assert_eq!(qmr_distance(&s, &o).unwrap(), naive as f64 / 6.0);
        }
    }

    #[test]
    fn beta_015_concentrates_at_extremes() {
        let mut rng = RngStream::new(4);
        let params = QmrInstanceParams {
            diseases: 10,
            findings: 20,
            ..QmrInstanceParams::default()
        };
        let inst = qmr_sample_instance(&params, &mut rng).unwrap();
        let all: Vec<f64> = (0..20)
            .flat_map(|i| (0..10).map(move |l| (i, l)))
            .map(|(i, l)| inst.model.assoc(i, l))
            .chain(inst.model.leak().iter().copied())
            .collect();
        let extreme = all.iter().filter(|&&q| !(0.1..=0.9).contains(&q)).count() as f64 / all.len() as f64;
        assert!(extreme > 0.6, "{extreme}");
        assert_eq!(inst.observed.len(), 10);
        assert_eq!(inst.x_true.dim(), 10);
        assert!(qmr_sample_instance(&QmrInstanceParams { beta_a: -1.0, ..params }, &mut rng).is_err());
    }

    #[test]
    fn posterior_normalises_and_flat_likelihood_gives_prior() {
        let m = random_model(5, 4, 21);
        let post = qmr_exact_posterior(&m, &[], 20).unwrap();
        let total: f64 = post.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        for (x, p) in post.iter() {
            let prior = qmr_log_prior(&m, &x).unwrap().exp();
            assert!((p - prior).abs() < 1e-12);
        }
        assert!(qmr_exact_posterior(&m, &[], 4).is_err());
    }

    #[test]
    fn posterior_map_matches_scan() {
        let m = random_model(6, 10, 31);
        let mut rng = RngStream::new(32);
        let data: Vec<_> = (0..3).map(|_| qmr_simulate(&m, &bv("101100"), &mut rng).unwrap()).collect();
        let post = qmr_exact_posterior(&m, &data, 20).unwrap();
        let mut best = (0, f64::NEG_INFINITY);
        for s in 0..64u64 {
            let x = BitVector::from_index(s, 6);
            let v = qmr_log_prior(&m, &x).unwrap() + naive_log_likelihood(&m, &x, &data);
            if v > best.1 {
                best = (s, v);
            }
        }
        assert_eq!(post.map_state().to_index(), best.0);
        assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn instance_serialises_at_full_precision() {
        let mut rng = RngStream::new(5);
        let inst = qmr_sample_instance(&QmrInstanceParams::default(), &mut rng).unwrap();
        let text = serde_json::to_string(&inst).unwrap();
        let back: QmrInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(QmrDtModel::new(vec![1.2], vec![0.1], vec![0.5]).is_err());
        assert!(QmrDtModel::new(vec![0.2], vec![0.1], vec![1.0]).is_err());
        assert!(QmrDtModel::new(vec![0.2], vec![0.1, 0.2], vec![0.5]).is_err());
    }
}
