//! Experiment runner CLI for the ASIR courage model engine.
//!
//! Subcommands reproduce the standard experiments and emit plot-ready CSV
//! plus a JSON run summary. Exit codes: 0 success, 1 configuration error
//! (nothing written), 2 runtime error (partial outputs removed).

mod config;
mod output;
mod runner;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{Experiment, RunConfig};

#[derive(Parser)]
#[command(
    name = "asir",
    version,
    about = "Deterministic simulation engine for the ASIR courage model"
)]
struct Cli {
    /// Path to a key-value config file; omitted means all defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding `run.master_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for parallel trials; affects wall clock only, never
    /// output bytes.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relational-gravity sweep: Monte Carlo transition probability over a
    /// gamma grid.
    Exp1,
    /// Pressure accumulation: suppression vs natural-release trajectories.
    Exp2,
    /// Feedback dynamics over scripted episode sequences.
    Exp3,
    /// Phase portrait in the (lambda, psi) plane with zone labels.
    Exp4,
    /// Sensitivity grid over (alpha, beta, delta).
    SweepGrid,
    /// Logistic fit of the gamma sweep plus the gamma band.
    Fit,
    /// Run the three built-in prediction checks and print pass/fail.
    Predict,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Exp1 => Experiment::Exp1,
            Command::Exp2 => Experiment::Exp2,
            Command::Exp3 => Experiment::Exp3,
            Command::Exp4 => Experiment::Exp4,
            Command::SweepGrid => Experiment::SweepGrid,
            Command::Fit => Experiment::Fit,
            Command::Predict => Experiment::Predict,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    artifact_version: &'static str,
    experiment: &'static str,
    master_seed: u64,
    duration_seconds: f64,
    outputs: Vec<&'a str>,
    config: &'a std::collections::BTreeMap<String, String>,
}

enum CliError {
    Config(String),
    Runtime(String),
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    // Configuration phase: nothing is written while this can still fail.
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let experiment = cli.command.experiment();
    let config = RunConfig::resolve(experiment, &text, cli.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;

    // Execution phase: outputs are built in memory first, so an error here
    // leaves nothing behind.
    let start = Instant::now();
    let files = runner::execute(&config).map_err(|e| CliError::Runtime(e.to_string()))?;

    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", cli.out.display())))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = write_outputs(&cli.out, &config, &files, start, &mut written);
    if let Err(e) = result {
        for path in &written {
            let _ = fs::remove_file(path);
        }
        return Err(CliError::Runtime(e));
    }
    Ok(())
}

fn write_outputs(
    out_dir: &Path,
    config: &RunConfig,
    files: &[(String, String)],
    start: Instant,
    written: &mut Vec<PathBuf>,
) -> Result<(), String> {
    for (name, contents) in files {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
        written.push(path);
    }
    let summary = Summary {
        artifact_version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.name(),
        master_seed: config.master_seed,
        duration_seconds: start.elapsed().as_secs_f64(),
        outputs: files.iter().map(|(name, _)| name.as_str()).collect(),
        config: &config.effective,
    };
    let path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())? + "\n";
    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    written.push(path);
    Ok(())
}
