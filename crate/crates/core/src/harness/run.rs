use std::collections::VecDeque;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BinnnData, ExperimentConfig, Metric, ProblemConfig, SamplerMode, Variant};
use super::metrics::{ensemble_report, posterior_report, EnsembleReport, PosteriorReport};
use super::HarnessError;
use crate::bitstate::{BitVector, RngStream};
use crate::kernels::Population;
use crate::problems::binnn::synthetic_separable;
use crate::problems::idx::{binary_digit_dataset, load_idx, ImagePrep};
use crate::problems::nas::nas_synth_table;
use crate::problems::{
    qmr_sample_instance, BinNetSpec, BinNnProblem, NasProblem, NasTable, Problem, QmrInstanceParams, QmrProblem,
};
use crate::sampler::{init_population, run, AbcChains, LikelihoodChains, Sweep};

/// One CSV row: population errors and cumulative acceptance counts after
/// `iteration` sweeps of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub repeat: usize,
    pub iteration: usize,
    pub avg_error: f64,
    pub min_error: f64,
    /// Lowest chain error seen at any sweep so far.
    pub best_error: f64,
    pub proposals: usize,
    pub within_tolerance: usize,
    pub accepted: usize,
    pub elapsed_ms: Option<f64>,
}

impl MetricsRow {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub repeat: usize,
    pub rows: Vec<MetricsRow>,
    pub final_population: Population,
    /// Populations after each of the last `ensemble_last` sweeps (binnn only).
    pub tail: Vec<Population>,
    pub proposals: usize,
    pub within_tolerance: usize,
    pub accepted: usize,
    pub final_avg_error: f64,
    pub final_min_error: f64,
    /// Mean population-average error over sweeps past the burn-in.
    pub post_burn_in_avg_error: f64,
    pub best_error: f64,
    /// First sweep at which `best_error` was reached (0 = initial population).
    pub best_iteration: usize,
    pub posterior: Option<PosteriorReport>,
    pub elapsed_ms: f64,
}

impl RunRecord {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariantOutput {
    pub variant: Variant,
    pub runs: Vec<RunRecord>,
    pub ensemble: Option<EnsembleReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub hash: String,
    pub variants: Vec<VariantOutput>,
}

/// Runtime knobs that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `experiment.workers` when set.
    pub workers: Option<usize>,
    /// Run only the variant with this label.
    pub only_variant: Option<String>,
}

/// Instances shared by all runs; QMR draws a fresh instance per repeat.
pub enum Instances {
    Qmr(Vec<QmrProblem>),
    Binnn(BinNnProblem),
    Nas(NasProblem),
}

impl Instances {
    pub fn build(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        let master = RngStream::new(config.experiment.seed);
        Ok(match &config.problem {
            ProblemConfig::Qmr(q) => {
                let params = QmrInstanceParams {
                    diseases: q.diseases,
                    findings: q.findings,
                    beta_a: q.beta_a,
                    beta_b: q.beta_b,
                    prior_p: q.prior_p,
                    n_obs: q.n_obs,
                };
                let problems = (0..config.experiment.repeats)
                    .map(|r| {
                        let mut rng = repeat_stream(&master, r).derive_named("instance");
                        QmrProblem::new(qmr_sample_instance(&params, &mut rng)?)
                    })
                    .collect::<Result<_, _>>()?;
                Instances::Qmr(problems)
            }
            ProblemConfig::Binnn(b) => {
                let spec = BinNetSpec::new(b.input_dim, b.hidden)?;
                let (train, test) = match &b.data {
                    BinnnData::Synthetic { train, test } => {
                        let mut rng = master.derive_named("dataset");
                        let all = synthetic_separable(b.input_dim, train + test, &mut rng)?;
                        all.split_at(*train)
                    }
                    BinnnData::Mnist {
                        dir,
                        digits,
                        side,
                        threshold,
                    } => {
                        let prep = ImagePrep {
                            side: *side,
                            threshold: *threshold,
                        };
                        let load = |images: &str, labels: &str| {
                            binary_digit_dataset(
                                &load_idx(&dir.join(images))?,
                                &load_idx(&dir.join(labels))?,
                                digits[0],
                                digits[1],
                                prep,
                            )
                        };
                        (
                            load("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?,
                            load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?,
                        )
                    }
                };
                Instances::Binnn(BinNnProblem::new(spec, train, test)?)
            }
            ProblemConfig::Nas(n) => {
                let table = match &n.table {
                    Some(path) => read_table(path)?,
                    None => nas_synth_table(&mut RngStream::new(n.table_seed), &n.synth)?,
                };
                Instances::Nas(NasProblem::new(table))
            }
        })
    }
}

fn read_table(path: &Path) -> Result<NasTable, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(NasTable::read_from(std::io::BufReader::new(file))?)
}

/// Stream of repeat `r`; the instance, initial population and sampler use
/// named children of it, so all variants of one repeat share them.
fn repeat_stream(master: &RngStream, r: usize) -> RngStream {
    master.derive(r as u64)
}

struct RunContext<'a> {
    config: &'a ExperimentConfig,
    variant: &'a Variant,
    repeat: usize,
    tail_len: usize,
}

fn run_one<P>(problem: &P, ctx: &RunContext<'_>) -> Result<RunRecord, HarnessError>
where
    P: Problem + ?Sized,
{
    let exp = &ctx.config.experiment;
    let start = Instant::now();
    let master = RngStream::new(exp.seed);
    let rep = repeat_stream(&master, ctx.repeat);
    let pop = init_population(ctx.variant.population, &mut rep.derive_named("init"), |rng| {
        problem.sample_prior(rng)
    })?;
    let rng = rep.derive_named("sampler");
    let spec = ctx.variant.kernel;

    let mut sampler: Box<dyn Sweep + '_> = match ctx.config.sampler.mode {
        SamplerMode::Likelihood => {
            let target = problem.likelihood().ok_or_else(|| HarnessError::Config {
                path: "sampler.mode".into(),
                msg: "problem has no likelihood".into(),
            })?;
            Box::new(LikelihoodChains::new(target, spec, pop, rng)?)
        }
        SamplerMode::Abc => {
            let eps = ctx.config.sampler.epsilon.expect("validated");
            Box::new(AbcChains::new(problem, spec, eps, problem.observed(), pop, rng)?)
        }
    };

    let mut cache: Vec<BitVector> = sampler.population().chains().to_vec();
    let mut errors: Vec<f64> = cache.iter().map(|x| problem.error(x)).collect();
    let summarise = |errors: &[f64]| {
        let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
        (errors.iter().sum::<f64>() / errors.len() as f64, min)
    };
    let (mut avg, mut min) = summarise(&errors);
    let mut best = (min, 0usize);
    let burn_in = (exp.burn_in * exp.iterations as f64).floor() as usize;
    let mut post_sum = 0.0;
    let mut post_n = 0usize;
    let mut counts = (0usize, 0usize, 0usize);
    let mut rows = Vec::with_capacity(ctx.config.rows_per_run());
    let mut tail: VecDeque<Population> = VecDeque::with_capacity(ctx.tail_len);

    run(sampler.as_mut(), exp.iterations, |stats, pop| {
        for (i, x) in pop.iter().enumerate() {
            if *x != cache[i] {
                cache[i] = x.clone();
                errors[i] = problem.error(x);
            }
        }
        (avg, min) = summarise(&errors);
        if min < best.0 {
            best = (min, stats.iteration);
        }
        if stats.iteration > burn_in {
            post_sum += avg;
            post_n += 1;
        }
        counts.0 += stats.proposals;
        counts.1 += stats.within_tolerance;
        counts.2 += stats.accepted;
        if ctx.tail_len > 0 {
            if tail.len() == ctx.tail_len {
                tail.pop_front();
            }
            tail.push_back(pop.clone());
        }
        if stats.iteration % exp.stride == 0 {
            rows.push(MetricsRow {
                repeat: ctx.repeat,
                iteration: stats.iteration,
                avg_error: avg,
                min_error: min,
                best_error: best.0,
                proposals: counts.0,
                within_tolerance: counts.1,
                accepted: counts.2,
                elapsed_ms: exp.record_wall_clock.then(|| start.elapsed().as_secs_f64() * 1e3),
            });
        }
        ControlFlow::Continue(())
    })?;

    let final_population = sampler.population().clone();
    drop(sampler);
    if ctx.tail_len > 0 && tail.is_empty() {
        tail.push_back(final_population.clone());
    }
    Ok(RunRecord {
        repeat: ctx.repeat,
        rows,
        final_population,
        tail: tail.into(),
        proposals: counts.0,
        within_tolerance: counts.1,
        accepted: counts.2,
        final_avg_error: avg,
        final_min_error: min,
        post_burn_in_avg_error: if post_n > 0 { post_sum / post_n as f64 } else { avg },
        best_error: best.0,
        best_iteration: best.1,
        posterior: None,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every (variant, repeat) pair; results are ordered by variant, then
/// repeat, independent of scheduling.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let instances = Instances::build(config)?;
    run_with_instances(config, &instances, options)
}

pub fn run_with_instances(
    config: &ExperimentConfig,
    instances: &Instances,
    options: &RunOptions,
) -> Result<ExperimentOutput, HarnessError> {
    let mut variants = config.variants();
    if let Some(only) = &options.only_variant {
        variants.retain(|v| &v.label == only);
        if variants.is_empty() {
            return Err(HarnessError::Replay(format!("no variant labelled {only}")));
        }
    }
    let repeats = config.experiment.repeats;
    let wants = |m| config.experiment.metrics.contains(&m);
    let tail_len = match (&config.problem, wants(Metric::Ensemble)) {
        (ProblemConfig::Binnn(b), true) => b.ensemble_last,
        _ => 0,
    };
    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..repeats).map(move |r| (v, r)))
        .collect();

    let execute = || {
        jobs.par_iter()
            .map(|&(v, r)| {
                let ctx = RunContext {
                    config,
                    variant: &variants[v],
                    repeat: r,
                    tail_len,
                };
                match instances {
                    Instances::Qmr(problems) => {
                        let problem = &problems[r];
                        let mut record = run_one(problem, &ctx)?;
                        if wants(Metric::Posterior) {
                            let max = match &config.problem {
                                ProblemConfig::Qmr(q) => q.max_enumeration,
                                _ => unreachable!(),
                            };
                            let inst = problem.instance();
                            record.posterior = Some(posterior_report(
                                &inst.model,
                                &inst.observed,
                                &record.final_population,
                                max,
                            )?);
                        }
                        Ok(record)
                    }
                    Instances::Binnn(problem) => run_one(problem, &ctx),
                    Instances::Nas(problem) => run_one(problem, &ctx),
                }
            })
            .collect::<Result<Vec<RunRecord>, HarnessError>>()
    };
    let workers = options.workers.unwrap_or(config.experiment.workers);
    let records = if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| HarnessError::Io(format!("thread pool: {e}")))?
            .install(execute)?
    } else {
        execute()?
    };

    let mut records = records.into_iter();
    let mut out = Vec::with_capacity(variants.len());
    for variant in variants {
        let runs: Vec<RunRecord> = records.by_ref().take(repeats).collect();
        let ensemble = match instances {
            Instances::Binnn(problem) if tail_len > 0 && !runs.is_empty() => {
                let tails: Vec<Vec<Population>> = runs.iter().map(|r| r.tail.clone()).collect();
                Some(ensemble_report(problem.spec(), &tails, problem.train(), problem.test())?)
            }
            _ => None,
        };
        out.push(VariantOutput {
            variant,
            runs,
            ensemble,
        });
    }
    Ok(ExperimentOutput {
        config: config.clone(),
        hash: config.hash(),
        variants: out,
    })
}
