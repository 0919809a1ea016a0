use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use storelab::experiment::{run, ExperimentConfig, ExperimentKind};
use storelab::Error;

/// Estimate price bounds and run storage-control experiments.
#[derive(Debug, Parser)]
#[command(name = "storelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate price bounds and the threshold from a history.
    Estimate(Common),
    /// Bound-violation probability over a grid of sample sizes.
    ViolationCurve(Common),
    /// Threshold, modified threshold and DP policies against the offline optimum.
    PolicyCompare(Common),
    /// Adaptive policy regret over a grid of warmup lengths and strides.
    Adaptive(Common),
    /// Policy performance when the price and demand assumptions are relaxed.
    Relax(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "STORELAB_SEED")]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Override a config key, e.g. `--set alpha=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for pair in &args.overrides {
        let (key, value) = pair.split_once('=').ok_or_else(|| Error::Config {
            key: pair.clone(),
            reason: "expected KEY=VALUE".into(),
        })?;
        config.set(key.trim(), value.trim())?;
    }
    config.kind = kind;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(kind: ExperimentKind, args: &Common) -> Result<(), Error> {
    let config = load(kind, args)?;
    let output = run(&config)?;
    for note in &output.notes {
        eprintln!("{note}");
    }
    match &config.out {
        Some(path) => {
            write(path, &output.csv)?;
            if let Some(summary) = &output.summary {
                let mut name = path.as_os_str().to_owned();
                name.push(".summary.csv");
                write(Path::new(&name), summary)?;
            }
        }
        None => {
            print!("{}", output.csv);
            if let Some(summary) = &output.summary {
                eprint!("{summary}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, args) = match &cli.command {
        Command::Estimate(a) => (ExperimentKind::Estimate, a),
        Command::ViolationCurve(a) => (ExperimentKind::ViolationCurve, a),
        Command::PolicyCompare(a) => (ExperimentKind::PolicyCompare, a),
        Command::Adaptive(a) => (ExperimentKind::Adaptive, a),
        Command::Relax(a) => (ExperimentKind::Relax, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
