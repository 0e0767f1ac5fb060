//! CSV and JSON emission.
//!
//! Every CSV starts with `#` metadata lines (experiment, variant, seed,
//! config hash and the full effective config as `# config: ` lines),
//! followed by the column header
//!
//! `repeat,iteration,kernel,population,p_flip,epsilon,avg_error,min_error,best_error,proposals,within_tolerance,accepted,acceptance_rate`
//!
//! plus `elapsed_ms` when wall-clock recording is enabled. Acceptance
//! counts are cumulative within a repeat.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, Metric};
use super::metrics::{EnsembleReport, PosteriorReport, Stat};
use super::run::{run_experiment, ExperimentOutput, RunOptions, VariantOutput};
use super::HarnessError;
use crate::kernels::KernelSpec;
use crate::sampler::EpsilonSchedule;

pub const OUT_DIR_ENV: &str = "DISCRETE_ABC_OUT_DIR";
const CONFIG_PREFIX: &str = "# config: ";

pub const CSV_COLUMNS: [&str; 13] = [
    "repeat",
    "iteration",
    "kernel",
    "population",
    "p_flip",
    "epsilon",
    "avg_error",
    "min_error",
    "best_error",
    "proposals",
    "within_tolerance",
    "accepted",
    "acceptance_rate",
];

/// Output directory: explicit flag, then config, then the environment, then `out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.experiment.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub fn csv_file_name(config: &ExperimentConfig, label: &str) -> String {
    format!("{}.{label}.csv", config.experiment.name)
}

fn epsilon_label(config: &ExperimentConfig) -> String {
    config.sampler.epsilon.map_or_else(|| "none".into(), |e| e.label())
}

/// Full CSV text for one variant.
pub fn csv_text(output: &ExperimentOutput, v: &VariantOutput) -> String {
    let cfg = &output.config;
    let mut s = String::new();
    let _ = writeln!(s, "# discrete-abc metrics");
    let _ = writeln!(s, "# experiment={}", cfg.experiment.name);
    let _ = writeln!(s, "# variant={}", v.variant.label);
    let _ = writeln!(s, "# seed={}", cfg.experiment.seed);
    let _ = writeln!(s, "# config_sha256={}", output.hash);
    let _ = writeln!(s, "# error_bars=standard error over repeats");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(s, "{CONFIG_PREFIX}{line}");
    }
    s.push_str(&CSV_COLUMNS.join(","));
    if cfg.experiment.record_wall_clock {
        s.push_str(",elapsed_ms");
    }
    s.push('\n');
    let eps = epsilon_label(cfg);
    let k = &v.variant.kernel;
    for run in &v.runs {
        for r in &run.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.repeat,
                r.iteration,
                k.kind,
                v.variant.population,
                k.p_flip,
                eps,
                r.avg_error,
                r.min_error,
                r.best_error,
                r.proposals,
                r.within_tolerance,
                r.accepted,
                r.acceptance_rate()
            );
            if let Some(ms) = r.elapsed_ms {
                let _ = write!(s, ",{ms:.3}");
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    seed: u64,
    config_sha256: &'a str,
    repeats: usize,
    iterations: usize,
    error_bars: &'static str,
    variants: Vec<VariantSummary<'a>>,
}

#[derive(Debug, Serialize)]
struct VariantSummary<'a> {
    label: &'a str,
    csv: String,
    kernel: KernelSpec,
    population: usize,
    epsilon: Option<EpsilonSchedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<ErrorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acceptance: Option<AcceptanceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<&'a EnsembleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_ms: Option<Stat>,
}

#[derive(Debug, Serialize)]
struct ErrorSummary {
    final_avg_error: Stat,
    final_min_error: Stat,
    post_burn_in_avg_error: Stat,
    best_error: Stat,
    best_iteration: Stat,
}

#[derive(Debug, Serialize)]
struct AcceptanceSummary {
    acceptance_rate: Stat,
    within_tolerance_rate: Stat,
    accepted: Vec<usize>,
    proposals: Vec<usize>,
}

fn stat_of<F: Fn(&super::run::RunRecord) -> f64>(v: &VariantOutput, f: F) -> Stat {
    Stat::of(&v.runs.iter().map(f).collect::<Vec<_>>())
}

/// JSON summary of an experiment.
pub fn summary_json(output: &ExperimentOutput) -> String {
    let cfg = &output.config;
    let wants = |m| cfg.experiment.metrics.contains(&m);
    let variants = output
        .variants
        .iter()
        .map(|v| VariantSummary {
            label: &v.variant.label,
            csv: csv_file_name(cfg, &v.variant.label),
            kernel: v.variant.kernel,
            population: v.variant.population,
            epsilon: cfg.sampler.epsilon,
            errors: wants(Metric::Error).then(|| ErrorSummary {
                final_avg_error: stat_of(v, |r| r.final_avg_error),
                final_min_error: stat_of(v, |r| r.final_min_error),
                post_burn_in_avg_error: stat_of(v, |r| r.post_burn_in_avg_error),
                best_error: stat_of(v, |r| r.best_error),
                best_iteration: stat_of(v, |r| r.best_iteration as f64),
            }),
            acceptance: wants(Metric::Acceptance).then(|| AcceptanceSummary {
                acceptance_rate: stat_of(v, |r| r.acceptance_rate()),
                within_tolerance_rate: stat_of(v, |r| {
                    if r.proposals == 0 {
                        0.0
                    } else {
                        r.within_tolerance as f64 / r.proposals as f64
                    }
                }),
                accepted: v.runs.iter().map(|r| r.accepted).collect(),
                proposals: v.runs.iter().map(|r| r.proposals).collect(),
            }),
            ensemble: v.ensemble.as_ref(),
            wall_clock_ms: cfg.experiment.record_wall_clock.then(|| stat_of(v, |r| r.elapsed_ms)),
        })
        .collect();
    let summary = Summary {
        experiment: &cfg.experiment.name,
        seed: cfg.experiment.seed,
        config_sha256: &output.hash,
        repeats: cfg.experiment.repeats,
        iterations: cfg.experiment.iterations,
        error_bars: "standard error over repeats",
        variants,
    };
    serde_json::to_string_pretty(&summary).expect("summary serialises") + "\n"
}

#[derive(Debug, Serialize)]
struct PosteriorFile<'a> {
    experiment: &'a str,
    config_sha256: &'a str,
    variants: Vec<PosteriorVariant<'a>>,
}

#[derive(Debug, Serialize)]
struct PosteriorVariant<'a> {
    label: &'a str,
    repeats: Vec<&'a PosteriorReport>,
}

/// Per-chain negative log posteriors, when the run computed them.
pub fn posterior_json(output: &ExperimentOutput) -> Option<String> {
    let variants: Vec<PosteriorVariant> = output
        .variants
        .iter()
        .map(|v| PosteriorVariant {
            label: &v.variant.label,
            repeats: v.runs.iter().filter_map(|r| r.posterior.as_ref()).collect(),
        })
        .collect();
    if variants.iter().all(|v| v.repeats.is_empty()) {
        return None;
    }
    let file = PosteriorFile {
        experiment: &output.config.experiment.name,
        config_sha256: &output.hash,
        variants,
    };
    Some(serde_json::to_string_pretty(&file).expect("report serialises") + "\n")
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

/// Writes one CSV per variant, the JSON summary and, when present, the
/// posterior report. Returns the written paths.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let name = &output.config.experiment.name;
    let mut written = Vec::new();
    for v in &output.variants {
        let path = dir.join(csv_file_name(&output.config, &v.variant.label));
        write_file(&path, &csv_text(output, v))?;
        written.push(path);
    }
    let path = dir.join(format!("{name}.summary.json"));
    write_file(&path, &summary_json(output))?;
    written.push(path);
    if let Some(text) = posterior_json(output) {
        let path = dir.join(format!("{name}.posterior.json"));
        write_file(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// Config, hash and variant recovered from a CSV header.
#[derive(Debug, Clone)]
pub struct CsvHeader {
    pub config: ExperimentConfig,
    pub hash: String,
    pub variant: String,
}

pub fn parse_csv_header(text: &str) -> Result<CsvHeader, HarnessError> {
    let bad = |m: &str| HarnessError::Replay(m.to_string());
    let mut toml = String::new();
    let mut hash = None;
    let mut variant = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(rest) = line.strip_prefix(CONFIG_PREFIX) {
            toml.push_str(rest);
            toml.push('\n');
        } else if let Some(h) = line.strip_prefix("# config_sha256=") {
            hash = Some(h.to_string());
        } else if let Some(v) = line.strip_prefix("# variant=") {
            variant = Some(v.to_string());
        }
    }
    let config = ExperimentConfig::from_toml(&toml)?;
    let hash = hash.ok_or_else(|| bad("header lacks config_sha256"))?;
    if config.hash() != hash {
        return Err(bad("embedded config does not match its recorded hash"));
    }
    Ok(CsvHeader {
        config,
        hash,
        variant: variant.ok_or_else(|| bad("header lacks variant"))?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub variant: String,
    pub identical: bool,
    pub regenerated: String,
}

/// Re-runs the variant recorded in a CSV and compares the bytes.
pub fn replay(path: &Path, workers: Option<usize>) -> Result<ReplayOutcome, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let header = parse_csv_header(&text)?;
    let options = RunOptions {
        workers,
        only_variant: Some(header.variant.clone()),
    };
    let output = run_experiment(&header.config, &options)?;
    let regenerated = csv_text(&output, &output.variants[0]);
    Ok(ReplayOutcome {
        variant: header.variant,
        identical: regenerated == text,
        regenerated,
    })
}
