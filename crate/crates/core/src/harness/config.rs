//! TOML experiment configuration.
//!
//! ```toml
//! [experiment]
//! name = "qmr-abc"
//! seed = 7
//! repeats = 20
//! iterations = 10000
//! stride = 100
//!
//! [problem]
//! kind = "qmr"
//! diseases = 10
//! findings = 20
//! beta_a = 0.15
//! beta_b = 0.15
//!
//! [sampler]
//! mode = "abc"
//! population = 24
//! epsilon = { mode = "exp", mean = 2.0 }
//!
//! [[kernels]]
//! kind = "dde-mc"
//! p_flip = 0.01
//!
//! [grid]                       # optional Cartesian sweep
//! population = [8, 12, 24]
//! p_flip = [0.1, 0.01]
//! ```

use std::path::PathBuf;

use serde::de::{self, DeserializeOwned};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::kernels::KernelSpec;
use crate::problems::nas::SynthParams;
use crate::sampler::EpsilonSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub problem: ProblemConfig,
    pub sampler: SamplerSection,
    pub kernels: Vec<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub seed: u64,
    pub repeats: usize,
    pub iterations: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Fraction of iterations discarded before the post-burn-in averages.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Adds an `elapsed_ms` CSV column; output is then no longer byte-reproducible.
    #[serde(default)]
    pub record_wall_clock: bool,
}

fn default_stride() -> usize {
    100
}

fn default_burn_in() -> f64 {
    0.5
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Error, Metric::Acceptance]
}

/// Summary sections written to the JSON report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Final and post-burn-in population errors, best error and when it was reached.
    Error,
    Acceptance,
    /// Majority-vote ensemble of the last populations (binnn only).
    Ensemble,
    /// Negative log posterior of the final chains (qmr only).
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    Likelihood,
    Abc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub mode: SamplerMode,
    pub population: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonSchedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub population: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_flip: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    Qmr(QmrConfig),
    Binnn(BinnnConfig),
    Nas(NasConfig),
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Qmr(_) => "qmr",
            ProblemConfig::Binnn(_) => "binnn",
            ProblemConfig::Nas(_) => "nas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmrConfig {
    pub diseases: usize,
    pub findings: usize,
    #[serde(default = "default_beta")]
    pub beta_a: f64,
    #[serde(default = "default_beta")]
    pub beta_b: f64,
    #[serde(default = "default_prior_p")]
    pub prior_p: f64,
    #[serde(default = "default_n_obs")]
    pub n_obs: usize,
    #[serde(default = "default_max_enumeration")]
    pub max_enumeration: usize,
}

fn default_beta() -> f64 {
    0.15
}

fn default_prior_p() -> f64 {
    0.5
}

fn default_n_obs() -> usize {
    10
}

fn default_max_enumeration() -> usize {
    crate::problems::qmr::DEFAULT_MAX_ENUMERATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinnnConfig {
    pub input_dim: usize,
    pub hidden: usize,
    /// Number of trailing populations pooled per repeat for the ensemble.
    #[serde(default = "default_ensemble_last")]
    pub ensemble_last: usize,
    pub data: BinnnData,
}

fn default_ensemble_last() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum BinnnData {
    /// Linearly separable polar data from a random teacher, drawn from the
    /// master seed.
    Synthetic { train: usize, test: usize },
    /// IDX files (`train-images-idx3-ubyte` etc.) in `dir`.
    Mnist {
        dir: PathBuf,
        #[serde(default = "default_digits")]
        digits: [u8; 2],
        #[serde(default = "default_side")]
        side: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticRepr {
    train: usize,
    test: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MnistRepr {
    dir: PathBuf,
    #[serde(default = "default_digits")]
    digits: [u8; 2],
    #[serde(default = "default_side")]
    side: usize,
    #[serde(default = "default_threshold")]
    threshold: f64,
}

// Tagged enums are decoded by hand; nested field paths travel in the
// error message between two PATH_MARKs.
const PATH_MARK: char = '\u{1f}';

fn split_marked(msg: &str) -> (String, String) {
    match msg.strip_prefix(PATH_MARK).and_then(|m| m.split_once(PATH_MARK)) {
        Some((path, rest)) => (path.to_string(), rest.to_string()),
        None => (String::new(), msg.to_string()),
    }
}

fn join_path(outer: &str, inner: &str) -> String {
    match (outer, inner) {
        ("" | ".", i) => i.to_string(),
        (o, "") => o.to_string(),
        (o, i) if i.starts_with('[') => format!("{o}{i}"),
        (o, i) => format!("{o}.{i}"),
    }
}

fn marked<E: de::Error>(path: &str, msg: impl std::fmt::Display) -> E {
    E::custom(format!("{PATH_MARK}{path}{PATH_MARK}{msg}"))
}

fn take_tag<E: de::Error>(table: &mut toml::Table, tag: &'static str) -> Result<String, E> {
    match table.remove(tag) {
        Some(toml::Value::String(s)) => Ok(s),
        Some(other) => Err(marked(tag, format!("expected a string, found {}", other.type_str()))),
        None => Err(marked("", format!("missing field `{tag}`"))),
    }
}

fn variant<T: DeserializeOwned, E: de::Error>(table: toml::Table) -> Result<T, E> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let outer = e.path().to_string();
        let (inner, msg) = split_marked(e.into_inner().message());
        marked(&join_path(&outer, &inner), msg)
    })
}

impl<'de> Deserialize<'de> for ProblemConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut table = toml::Table::deserialize(d)?;
        match take_tag(&mut table, "kind")?.as_str() {
            "qmr" => variant(table).map(ProblemConfig::Qmr),
            "binnn" => variant(table).map(ProblemConfig::Binnn),
            "nas" => variant(table).map(ProblemConfig::Nas),
            other => Err(marked("kind", format!("unknown problem `{other}`, expected qmr, binnn or nas"))),
        }
    }
}

impl<'de> Deserialize<'de> for BinnnData {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut table = toml::Table::deserialize(d)?;
        match take_tag(&mut table, "source")?.as_str() {
            "synthetic" => variant(table).map(|r: SyntheticRepr| BinnnData::Synthetic {
                train: r.train,
                test: r.test,
            }),
            "mnist" => variant(table).map(|r: MnistRepr| BinnnData::Mnist {
                dir: r.dir,
                digits: r.digits,
                side: r.side,
                threshold: r.threshold,
            }),
            other => Err(marked("source", format!("unknown data source `{other}`, expected synthetic or mnist"))),
        }
    }
}

fn default_digits() -> [u8; 2] {
    [0, 1]
}

fn default_side() -> usize {
    14
}

fn default_threshold() -> f64 {
    127.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NasConfig {
    /// Table file; when absent a synthetic table is generated from `table_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub table_seed: u64,
    #[serde(default)]
    pub synth: SynthParams,
}

/// One (kernel, population size) combination of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub kernel: KernelSpec,
    pub population: usize,
    /// File-name stem, unique within the experiment.
    pub label: String,
}

fn config_error(path: impl Into<String>, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("<toml>", e.message().to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let outer = e.path().to_string();
            let (inner, msg) = split_marked(e.into_inner().message());
            let path = join_path(&outer, &inner);
            config_error(if path.is_empty() { "<root>".to_string() } else { path }, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let e = &self.experiment;
        if e.name.is_empty() || !e.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(config_error("experiment.name", "must be non-empty and use [A-Za-z0-9._-]"));
        }
        if e.stride == 0 {
            return Err(config_error("experiment.stride", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&e.burn_in) {
            return Err(config_error("experiment.burn_in", "must lie in [0, 1)"));
        }
        let kind = self.problem.kind();
        if e.metrics.contains(&Metric::Ensemble) && kind != "binnn" {
            return Err(config_error("experiment.metrics", "ensemble requires a binnn problem"));
        }
        if e.metrics.contains(&Metric::Posterior) && kind != "qmr" {
            return Err(config_error("experiment.metrics", "posterior requires a qmr problem"));
        }
        self.validate_problem()?;

        match self.sampler.mode {
            SamplerMode::Likelihood => {
                if kind != "qmr" {
                    return Err(config_error("sampler.mode", format!("{kind} has no likelihood; use \"abc\"")));
                }
            }
            SamplerMode::Abc => {
                let eps = self
                    .sampler
                    .epsilon
                    .ok_or_else(|| config_error("sampler.epsilon", "required in abc mode"))?;
                eps.validate().map_err(|err| config_error("sampler.epsilon", err.to_string()))?;
            }
        }
        if self.kernels.is_empty() {
            return Err(config_error("kernels", "at least one kernel is required"));
        }
        for (k, spec) in self.kernels.iter().enumerate() {
            spec.validate()
                .map_err(|err| config_error(format!("kernels[{k}]"), err.to_string()))?;
        }
        if let Some(grid) = &self.grid {
            if grid.population.is_empty() && grid.p_flip.is_empty() {
                return Err(config_error("grid", "needs population and/or p_flip values"));
            }
            if let Some(p) = grid.p_flip.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(config_error("grid.p_flip", format!("{p} outside [0, 1]")));
            }
        }
        for v in self.variants() {
            let need = v.kernel.kind.min_population();
            if v.population < need {
                let path = if self.grid.as_ref().is_some_and(|g| !g.population.is_empty()) {
                    "grid.population"
                } else {
                    "sampler.population"
                };
                return Err(config_error(
                    path,
                    format!("{} needs at least {need} chains, got {}", v.kernel.kind, v.population),
                ));
            }
        }
        Ok(())
    }

    fn validate_problem(&self) -> Result<(), HarnessError> {
        match &self.problem {
            ProblemConfig::Qmr(q) => {
                if q.diseases == 0 {
                    return Err(config_error("problem.diseases", "must be at least 1"));
                }
                if q.findings == 0 {
                    return Err(config_error("problem.findings", "must be at least 1"));
                }
                for (name, v) in [("beta_a", q.beta_a), ("beta_b", q.beta_b)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(config_error(format!("problem.{name}"), "must be positive"));
                    }
                }
                if !(q.prior_p > 0.0 && q.prior_p < 1.0) {
                    return Err(config_error("problem.prior_p", "must lie in (0, 1)"));
                }
                if q.n_obs == 0 {
                    return Err(config_error("problem.n_obs", "must be at least 1"));
                }
                if self.experiment.metrics.contains(&Metric::Posterior) && q.diseases > 30 {
                    return Err(config_error("problem.diseases", "posterior reports support at most 30 diseases"));
                }
            }
            ProblemConfig::Binnn(b) => {
                if b.input_dim == 0 {
                    return Err(config_error("problem.input_dim", "must be at least 1"));
                }
                if b.hidden == 0 {
                    return Err(config_error("problem.hidden", "must be at least 1"));
                }
                if b.ensemble_last == 0 {
                    return Err(config_error("problem.ensemble_last", "must be at least 1"));
                }
                match &b.data {
                    BinnnData::Synthetic { train, test } => {
                        if *train == 0 || *test == 0 {
                            return Err(config_error("problem.data", "train and test sizes must be at least 1"));
                        }
                    }
                    BinnnData::Mnist { side, digits, .. } => {
                        if side * side != b.input_dim {
                            return Err(config_error(
                                "problem.data.side",
                                format!("side^2 = {} does not match input_dim {}", side * side, b.input_dim),
                            ));
                        }
                        if digits[0] == digits[1] || digits.iter().any(|&d| d > 9) {
                            return Err(config_error("problem.data.digits", "need two distinct digits 0-9"));
                        }
                    }
                }
            }
            ProblemConfig::Nas(n) => {
                n.synth
                    .validate()
                    .map_err(|err| config_error("problem.synth", err.to_string()))?;
            }
        }
        Ok(())
    }

    /// Kernel x population x p_flip combinations, kernels outermost.
    pub fn variants(&self) -> Vec<Variant> {
        let grid = self.grid.as_ref();
        let pops = grid
            .filter(|g| !g.population.is_empty())
            .map_or_else(|| vec![self.sampler.population], |g| g.population.clone());
        let mut out = Vec::new();
        for spec in &self.kernels {
            let flips = grid
                .filter(|g| !g.p_flip.is_empty())
                .map_or_else(|| vec![spec.p_flip], |g| g.p_flip.clone());
            for &population in &pops {
                for &p_flip in &flips {
                    let kernel = spec.with_p_flip(p_flip);
                    let label = match grid {
                        Some(_) => format!("{}-c{population}-p{p_flip}", kernel.label()),
                        None => kernel.label(),
                    };
                    out.push(Variant {
                        kernel,
                        population,
                        label,
                    });
                }
            }
        }
        let mut seen = std::collections::HashMap::<String, usize>::new();
        for v in &mut out {
            let n = seen.entry(v.label.clone()).or_insert(0);
            *n += 1;
            if *n > 1 {
                v.label = format!("{}-{}", v.label, n);
            }
        }
        out
    }

    /// Number of metric rows per run.
    pub fn rows_per_run(&self) -> usize {
        self.experiment.iterations / self.experiment.stride
    }
}
