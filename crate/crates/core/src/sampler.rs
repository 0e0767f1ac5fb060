//! Population Metropolis sampling and the population MCMC-ABC step.
//!
//! Sweeps are sequential: chain `i` proposes against the population as
//! already updated by chains `0..i` in the same sweep. All proposals are
//! treated as symmetric, so the Metropolis ratio only involves the target
//! (likelihood mode) or the prior (ABC mode). `mut+crx` and the independent
//! sampler with `theta != 0.5` are not symmetric and will bias the chain;
//! [`KernelSpec::is_symmetric`] reports this.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstate::{BitVector, RngStream};
use crate::kernels::{propose, KernelError, KernelSpec, Population};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct SimulationError(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("log target at chain {chain} is not finite ({value})")]
    NonFiniteTarget { chain: usize, value: f64 },
    #[error("simulator failed for chain {chain} at iteration {iteration}: {source}")]
    Simulation {
        chain: usize,
        iteration: usize,
        source: SimulationError,
    },
    #[error("invalid tolerance schedule: {0}")]
    InvalidEpsilon(String),
}

/// Tolerance policy of the ABC step.
///
/// `ExpSampled` is parameterised by its mean: `ExpSampled { mean: 2.0 }`
/// draws `epsilon = -2 ln u` afresh for every proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EpsilonRepr", into = "EpsilonRepr")]
pub enum EpsilonSchedule {
    Fixed { value: f64 },
    ExpSampled { mean: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpsilonRepr {
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
}

impl TryFrom<EpsilonRepr> for EpsilonSchedule {
    type Error = SamplerError;

    fn try_from(r: EpsilonRepr) -> Result<Self, Self::Error> {
        let bad = |m: &str| SamplerError::InvalidEpsilon(m.to_string());
        let sched = match (r.mode.as_str(), r.value, r.mean, r.rate) {
            ("fixed", Some(value), None, None) => EpsilonSchedule::Fixed { value },
            ("exp", None, Some(mean), None) => EpsilonSchedule::ExpSampled { mean },
            ("exp", None, None, Some(rate)) => EpsilonSchedule::ExpSampled { mean: 1.0 / rate },
            ("fixed", ..) => return Err(bad("mode \"fixed\" takes exactly one key: value")),
            ("exp", ..) => return Err(bad("mode \"exp\" takes exactly one of: mean, rate")),
            (other, ..) => return Err(bad(&format!("unknown mode {other:?}, expected \"fixed\" or \"exp\""))),
        };
        sched.validate()?;
        Ok(sched)
    }
}

impl From<EpsilonSchedule> for EpsilonRepr {
    fn from(s: EpsilonSchedule) -> Self {
        match s {
            EpsilonSchedule::Fixed { value } => EpsilonRepr {
                mode: "fixed".into(),
                value: Some(value),
                mean: None,
                rate: None,
            },
            EpsilonSchedule::ExpSampled { mean } => EpsilonRepr {
                mode: "exp".into(),
                value: None,
                mean: Some(mean),
                rate: None,
            },
        }
    }
}

impl EpsilonSchedule {
    /// `Fixed` accepts any `value >= 0` (zero demands an exact match);
    /// `ExpSampled` needs a finite positive mean.
    pub fn validate(&self) -> Result<(), SamplerError> {
        match *self {
            EpsilonSchedule::Fixed { value } if value >= 0.0 && !value.is_nan() => Ok(()),
            EpsilonSchedule::ExpSampled { mean } if mean > 0.0 && mean.is_finite() => Ok(()),
            EpsilonSchedule::Fixed { value } => Err(SamplerError::InvalidEpsilon(format!(
                "fixed tolerance must be >= 0, got {value}"
            ))),
            EpsilonSchedule::ExpSampled { mean } => Err(SamplerError::InvalidEpsilon(format!(
                "exponential mean must be positive and finite, got {mean}"
            ))),
        }
    }

    /// The schedule's scale parameter: the fixed value or the mean.
    pub fn parameter(&self) -> f64 {
        match *self {
            EpsilonSchedule::Fixed { value } => value,
            EpsilonSchedule::ExpSampled { mean } => mean,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            EpsilonSchedule::Fixed { value } => format!("fixed{value}"),
            EpsilonSchedule::ExpSampled { mean } => format!("exp{mean}"),
        }
    }
}

/// Draws a tolerance from the schedule.
pub fn epsilon_draw(sched: &EpsilonSchedule, rng: &mut RngStream) -> Result<f64, SamplerError> {
    sched.validate()?;
    Ok(match *sched {
        EpsilonSchedule::Fixed { value } => value,
        EpsilonSchedule::ExpSampled { mean } => loop {
            let u = rng.uniform();
            if u > 0.0 {
                break -mean * u.ln();
            }
        },
    })
}

/// A target with a computable likelihood.
pub trait LikelihoodTarget {
    fn log_prior(&self, x: &BitVector) -> f64;
    fn log_likelihood(&self, x: &BitVector) -> f64;

    fn log_target(&self, x: &BitVector) -> f64 {
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_likelihood(x)
    }
}

/// A simulator-defined target: only forward simulation and a distance to
/// the observed data are available.
pub trait AbcTarget {
    type Observation;

    fn log_prior(&self, x: &BitVector) -> f64;
    fn simulate(&self, x: &BitVector, rng: &mut RngStream) -> Result<Self::Observation, SimulationError>;
    fn distance(&self, simulated: &Self::Observation, observed: &Self::Observation) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    RejectedTolerance,
    RejectedMetropolis,
    Accepted,
}

/// Counters for one sweep over the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    /// 1-based index of the sweep these counts belong to.
    pub iteration: usize,
    pub proposals: usize,
    /// Proposals that passed the tolerance test (every proposal in likelihood mode).
    pub within_tolerance: usize,
    pub accepted: usize,
    /// Smallest simulated distance among proposals accepted in this sweep.
    pub best_accepted_distance: Option<f64>,
}

impl SweepStats {
    fn new(iteration: usize) -> Self {
        Self {
            iteration,
            proposals: 0,
            within_tolerance: 0,
            accepted: 0,
            best_accepted_distance: None,
        }
    }
}

fn metropolis_accept(log_alpha: f64, rng: &mut RngStream) -> bool {
    // NaN ratios (-inf - -inf) compare false and reject.
    rng.uniform() < log_alpha.exp()
}

fn check_finite(chain: usize, value: f64) -> Result<f64, SamplerError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SamplerError::NonFiniteTarget { chain, value })
    }
}

fn metropolis_from<T: LikelihoodTarget + ?Sized>(
    target: &T,
    spec: &KernelSpec,
    i: usize,
    pop: &Population,
    current: f64,
    rng: &mut RngStream,
) -> Result<Option<(BitVector, f64)>, SamplerError> {
    let candidate = propose(spec, i, pop, rng)?;
    let proposed = target.log_target(&candidate);
    let accept = metropolis_accept(proposed - current, rng);
    Ok(accept.then_some((candidate, proposed)))
}

/// One Metropolis update of chain `i`. Returns the chain's new state and
/// whether the proposal was accepted.
pub fn metropolis_step<T: LikelihoodTarget + ?Sized>(
    target: &T,
    spec: &KernelSpec,
    i: usize,
    pop: &Population,
    rng: &mut RngStream,
) -> Result<(BitVector, bool), SamplerError> {
    if i >= pop.len() {
        return Err(KernelError::ChainOutOfRange { index: i, size: pop.len() }.into());
    }
    let current = check_finite(i, target.log_target(pop.get(i)))?;
    Ok(match metropolis_from(target, spec, i, pop, current, rng)? {
        Some((x, _)) => (x, true),
        None => (pop.get(i).clone(), false),
    })
}

struct AbcProposal {
    state: BitVector,
    log_prior: f64,
    distance: f64,
    outcome: StepOutcome,
}

#[allow(clippy::too_many_arguments)]
fn abc_from<T: AbcTarget + ?Sized>(
    target: &T,
    spec: &KernelSpec,
    sched: &EpsilonSchedule,
    i: usize,
    pop: &Population,
    observed: &T::Observation,
    current_log_prior: f64,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<AbcProposal, SamplerError> {
    let candidate = propose(spec, i, pop, rng)?;
    let simulated = target.simulate(&candidate, rng).map_err(|source| SamplerError::Simulation {
        chain: i,
        iteration,
        source,
    })?;
    let distance = target.distance(&simulated, observed);
    let epsilon = epsilon_draw(sched, rng)?;
    if distance.is_nan() || distance > epsilon {
        return Ok(AbcProposal {
            state: candidate,
            log_prior: f64::NAN,
            distance,
            outcome: StepOutcome::RejectedTolerance,
        });
    }
    let log_prior = target.log_prior(&candidate);
    let outcome = if metropolis_accept(log_prior - current_log_prior, rng) {
        StepOutcome::Accepted
    } else {
        StepOutcome::RejectedMetropolis
    };
    Ok(AbcProposal {
        state: candidate,
        log_prior,
        distance,
        outcome,
    })
}

/// One population MCMC-ABC update of chain `i`: propose, simulate once,
/// compare against a freshly drawn tolerance, then apply the prior ratio.
#[allow(clippy::too_many_arguments)]
pub fn abc_step<T: AbcTarget + ?Sized>(
    target: &T,
    spec: &KernelSpec,
    sched: &EpsilonSchedule,
    i: usize,
    pop: &Population,
    observed: &T::Observation,
    rng: &mut RngStream,
) -> Result<(BitVector, StepOutcome), SamplerError> {
    if i >= pop.len() {
        return Err(KernelError::ChainOutOfRange { index: i, size: pop.len() }.into());
    }
    let current = check_finite(i, target.log_prior(pop.get(i)))?;
    let p = abc_from(target, spec, sched, i, pop, observed, current, 0, rng)?;
    Ok(match p.outcome {
        StepOutcome::Accepted => (p.state, StepOutcome::Accepted),
        other => (pop.get(i).clone(), other),
    })
}

/// A population sampler that advances one sweep at a time.
pub trait Sweep {
    fn sweep(&mut self) -> Result<SweepStats, SamplerError>;
    fn population(&self) -> &Population;
    /// Number of completed sweeps.
    fn iteration(&self) -> usize;
}

fn check_population(spec: &KernelSpec, pop: &Population) -> Result<(), SamplerError> {
    spec.validate()?;
    let required = spec.kind.min_population();
    if pop.len() < required {
        return Err(KernelError::PopulationTooSmall {
            size: pop.len(),
            required,
        }
        .into());
    }
    Ok(())
}

/// Likelihood-based population Metropolis sampler. Caches each chain's log
/// target so every proposal costs one target evaluation.
pub struct LikelihoodChains<'a, T: ?Sized> {
    target: &'a T,
    spec: KernelSpec,
    pop: Population,
    log_targets: Vec<f64>,
    rng: RngStream,
    iteration: usize,
}

impl<'a, T: LikelihoodTarget + ?Sized> LikelihoodChains<'a, T> {
    pub fn new(target: &'a T, spec: KernelSpec, pop: Population, rng: RngStream) -> Result<Self, SamplerError> {
        check_population(&spec, &pop)?;
        let log_targets = pop
            .iter()
            .enumerate()
            .map(|(c, x)| check_finite(c, target.log_target(x)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            target,
            spec,
            pop,
            log_targets,
            rng,
            iteration: 0,
        })
    }

    pub fn log_targets(&self) -> &[f64] {
        &self.log_targets
    }

    pub fn into_population(self) -> Population {
        self.pop
    }
}

impl<T: LikelihoodTarget + ?Sized> Sweep for LikelihoodChains<'_, T> {
    fn sweep(&mut self) -> Result<SweepStats, SamplerError> {
        let mut stats = SweepStats::new(self.iteration + 1);
        for i in 0..self.pop.len() {
            let step = metropolis_from(self.target, &self.spec, i, &self.pop, self.log_targets[i], &mut self.rng)?;
            stats.proposals += 1;
            stats.within_tolerance += 1;
            if let Some((x, lt)) = step {
                self.pop.set(i, x);
                self.log_targets[i] = lt;
                stats.accepted += 1;
            }
        }
        self.iteration += 1;
        Ok(stats)
    }

    fn population(&self) -> &Population {
        &self.pop
    }

    fn iteration(&self) -> usize {
        self.iteration
    }
}

/// Population MCMC-ABC sampler.
pub struct AbcChains<'a, T: AbcTarget + ?Sized> {
    target: &'a T,
    spec: KernelSpec,
    schedule: EpsilonSchedule,
    observed: &'a T::Observation,
    pop: Population,
    log_priors: Vec<f64>,
    rng: RngStream,
    iteration: usize,
}

impl<'a, T: AbcTarget + ?Sized> AbcChains<'a, T> {
    pub fn new(
        target: &'a T,
        spec: KernelSpec,
        schedule: EpsilonSchedule,
        observed: &'a T::Observation,
        pop: Population,
        rng: RngStream,
    ) -> Result<Self, SamplerError> {
        check_population(&spec, &pop)?;
        schedule.validate()?;
        let log_priors = pop
            .iter()
            .enumerate()
            .map(|(c, x)| check_finite(c, target.log_prior(x)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            target,
            spec,
            schedule,
            observed,
            pop,
            log_priors,
            rng,
            iteration: 0,
        })
    }

    pub fn into_population(self) -> Population {
        self.pop
    }
}

impl<T: AbcTarget + ?Sized> Sweep for AbcChains<'_, T> {
    fn sweep(&mut self) -> Result<SweepStats, SamplerError> {
        let iteration = self.iteration + 1;
        let mut stats = SweepStats::new(iteration);
        for i in 0..self.pop.len() {
            let p = abc_from(
                self.target,
                &self.spec,
                &self.schedule,
                i,
                &self.pop,
                self.observed,
                self.log_priors[i],
                iteration,
                &mut self.rng,
            )?;
            stats.proposals += 1;
            match p.outcome {
                StepOutcome::RejectedTolerance => {}
                StepOutcome::RejectedMetropolis => stats.within_tolerance += 1,
                StepOutcome::Accepted => {
                    stats.within_tolerance += 1;
                    stats.accepted += 1;
                    stats.best_accepted_distance =
                        Some(stats.best_accepted_distance.map_or(p.distance, |b| b.min(p.distance)));
                    self.pop.set(i, p.state);
                    self.log_priors[i] = p.log_prior;
                }
            }
        }
        self.iteration = iteration;
        Ok(stats)
    }

    fn population(&self) -> &Population {
        &self.pop
    }

    fn iteration(&self) -> usize {
        self.iteration
    }
}

/// Runs `budget` sweeps, handing every sweep's stats and the updated
/// population to `callback`; returning `ControlFlow::Break` stops early.
pub fn run<S, F>(sampler: &mut S, budget: usize, mut callback: F) -> Result<Vec<SweepStats>, SamplerError>
where
    S: Sweep + ?Sized,
    F: FnMut(&SweepStats, &Population) -> ControlFlow<()>,
{
    let mut out = Vec::with_capacity(budget);
    for _ in 0..budget {
        let stats = sampler.sweep()?;
        let flow = callback(&stats, sampler.population());
        out.push(stats);
        if flow.is_break() {
            break;
        }
    }
    Ok(out)
}

/// Draws `size` initial chains from a prior sampler.
pub fn init_population<F>(size: usize, rng: &mut RngStream, mut sample_prior: F) -> Result<Population, SamplerError>
where
    F: FnMut(&mut RngStream) -> BitVector,
{
    Ok(Population::new((0..size).map(|_| sample_prior(rng)).collect())?)
}
