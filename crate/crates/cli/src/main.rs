use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use iwl_cli::{cmd_generate, cmd_report, cmd_train, cmd_weights, ExperimentConfig};
use iwl_core::IwlConfig;

#[derive(Parser)]
#[command(name = "iwl", version, about = "Importance-weighted loss experiments for anomaly detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/test CSVs and manifests for every beta and seed.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train paired MSE/IWL models over the sweep and write result files.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute importance weights for a one-column CSV of anomaly scores.
    Weights {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Experiment config whose `train.iwl` section supplies epsilon,
        /// alpha and t0; defaults are used without it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize one or more results.json files.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Directory for report.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?.with_overrides(seed, out);
    cfg.validate().with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let cfg = load_config(&config, seed, out)?;
            for m in cmd_generate(&cfg)? {
                println!("{}", m.display());
            }
        }
        Command::Train { config, seed, out } => {
            let cfg = load_config(&config, seed, out)?;
            let result = cmd_train(&cfg)?;
            let report = iwl_cli::commands::build_report(std::slice::from_ref(&result));
            print!("{}", report.text());
            for f in &result.failures {
                eprintln!(
                    "run failed: seed {} {} beta {:?}: {}",
                    f.seed, f.loss_mode, f.beta, f.error
                );
            }
            println!("results written to {}", cfg.output_dir.display());
        }
        Command::Weights { input, out, config } => {
            let iwl = match config {
                Some(p) => ExperimentConfig::load(&p)?.train.iwl,
                None => IwlConfig::default(),
            };
            let s = cmd_weights(&input, &out, &iwl)?;
            println!(
                "{} weights, cap {}, max {}",
                s.weights.len(),
                s.cap,
                s.weights.iter().cloned().fold(0.0, f64::max)
            );
        }
        Command::Report { files, out } => {
            let report = cmd_report(&files, out.as_deref())?;
            print!("{}", report.text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
