use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use discrete_abc::bitstate::RngStream;
use discrete_abc::harness::{
    replay, resolve_out_dir, run_experiment, write_outputs, ExperimentConfig, ExperimentOutput, HarnessError, Metric,
    RunOptions, RunRecord, Stat,
};
use discrete_abc::problems::nas::{nas_synth_table, SynthParams};

#[derive(Parser, Debug)]
#[command(name = "discrete-abc", version, about = "Population MCMC and ABC over binary parameter spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write CSV and JSON output.
    Run(RunArgs),
    /// Run a QMR experiment and write the per-chain negative log posterior report.
    Posterior(RunArgs),
    /// Generate a synthetic architecture table.
    TableGen { seed: u64, out: PathBuf },
    /// Check a config and print what it would run.
    Validate(Overrides),
    /// Re-run the variant recorded in a CSV file and compare bytes.
    Replay {
        csv: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Overrides {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn exit_code(e: &HarnessError) -> u8 {
    if e.is_config() {
        2
    } else {
        1
    }
}

fn load(o: &Overrides) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(&o.config)?;
    if let Some(seed) = o.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(repeats) = o.repeats {
        cfg.experiment.repeats = repeats;
    }
    if let Some(stride) = o.stride {
        cfg.experiment.stride = stride;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_stat(s: &Stat) -> String {
    if s.n == 0 {
        "-".into()
    } else {
        format!("{:.4} ± {:.4}", s.mean, s.se)
    }
}

fn print_summary(out: &ExperimentOutput, written: &[PathBuf]) {
    println!("experiment {} seed {} sha256 {}", out.config.experiment.name, out.config.experiment.seed, out.hash);
    for v in &out.variants {
        let stat = |f: &dyn Fn(&RunRecord) -> f64| Stat::of(&v.runs.iter().map(f).collect::<Vec<_>>());
        println!(
            "  {:<24} avg error {}  min error {}  acceptance {}",
            v.variant.label,
            fmt_stat(&stat(&|r| r.final_avg_error)),
            fmt_stat(&stat(&|r| r.final_min_error)),
            fmt_stat(&stat(&|r| r.acceptance_rate())),
        );
        if let Some(e) = &v.ensemble {
            println!(
                "  {:<24} ensemble test {}  best single test {}",
                "",
                fmt_stat(&e.ensemble_test_error),
                fmt_stat(&e.best_single_test_error)
            );
        }
    }
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn run(args: &RunArgs, posterior: bool) -> Result<(), HarnessError> {
    let mut cfg = load(&args.overrides)?;
    if posterior {
        if cfg.problem.kind() != "qmr" {
            return Err(HarnessError::Config {
                path: "problem.kind".into(),
                msg: "posterior reports need a qmr problem".into(),
            });
        }
        if !cfg.experiment.metrics.contains(&Metric::Posterior) {
            cfg.experiment.metrics.push(Metric::Posterior);
        }
    }
    let options = RunOptions {
        workers: args.workers,
        only_variant: None,
    };
    let out = run_experiment(&cfg, &options)?;
    let dir = resolve_out_dir(args.out_dir.as_deref(), &cfg);
    let written = write_outputs(&out, &dir)?;
    print_summary(&out, &written);
    Ok(())
}

fn validate(o: &Overrides) -> Result<(), HarnessError> {
    let cfg = load(o)?;
    let e = &cfg.experiment;
    println!("config ok: {}", o.config.display());
    println!("  experiment {} seed {} sha256 {}", e.name, e.seed, cfg.hash());
    println!("  problem {}, sampler {:?}", cfg.problem.kind(), cfg.sampler.mode);
    println!(
        "  {} repeats x {} iterations, stride {}, {} rows per run",
        e.repeats,
        e.iterations,
        e.stride,
        cfg.rows_per_run()
    );
    for v in cfg.variants() {
        println!("  variant {} (population {})", v.label, v.population);
    }
    Ok(())
}

fn table_gen(seed: u64, out: &Path) -> Result<(), HarnessError> {
    let table = nas_synth_table(&mut RngStream::new(seed), &SynthParams::default())?;
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", out.display()));
    let mut file = std::io::BufWriter::new(std::fs::File::create(out).map_err(io)?);
    table.write_to(&mut file)?;
    file.flush().map_err(io)?;
    let (best, entry) = table.best();
    println!(
        "wrote {} ({} architectures, best {} validation error {})",
        out.display(),
        table.len(),
        best,
        entry.validation_error
    );
    Ok(())
}

fn replay_cmd(csv: &Path, workers: Option<usize>) -> Result<(), HarnessError> {
    let outcome = replay(csv, workers)?;
    if outcome.identical {
        println!("replay of {} ({}) is byte-identical", csv.display(), outcome.variant);
        Ok(())
    } else {
        Err(HarnessError::Replay(format!("{} differs from its regenerated output", csv.display())))
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(args) => run(&args, false),
        Command::Posterior(args) => run(&args, true),
        Command::TableGen { seed, out } => table_gen(seed, &out),
        Command::Validate(o) => validate(&o),
        Command::Replay { csv, workers } => replay_cmd(&csv, workers),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
