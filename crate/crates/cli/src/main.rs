//! Command-line driver for the two-stage swing-up pipeline.
//!
//! Exit codes: 0 success, 2 configuration error (bad file, bad flags),
//! 3 runtime failure (I/O, corrupt checkpoint, diverged training).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swingup_core::config::ExperimentConfig;
use swingup_core::pipeline;
use swingup_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "swingup",
    about = "Swing-up control for underactuated double pendulums: SAC training, \
             SNES fine-tuning, and competition-style evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the SAC stage and write its checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides run.output from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write into a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Evolve a trained policy against the episode-level score.
    Finetune {
        #[arg(long)]
        config: PathBuf,
        /// Stage-1 checkpoint holding the policy to evolve.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Score a checkpoint: trajectory CSV, report, and figures.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also run the perturbation sweep.
        #[arg(long)]
        robustness: bool,
        #[arg(long)]
        force: bool,
    },
    /// Render the trajectory figure from an existing CSV.
    Plot {
        /// Trajectory CSV emitted by `eval`.
        trajectory: PathBuf,
        /// Output SVG path; defaults to the CSV path with .svg.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn resolve_output(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.run.output.clone()).ok_or_else(|| {
        Error::Config("no output directory: pass --output or set run.output".into())
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            output,
            force,
        } => {
            let cfg = load_config(&config, seed)?;
            let out = resolve_output(output, &cfg)?;
            let artifacts = pipeline::run_train(&cfg, &out, force)?;
            let best = &artifacts.result.best_eval;
            println!(
                "trained {} env steps; best eval: success rate {:.2}, performance {:.3} at step {}",
                artifacts.result.env_steps,
                best.success_rate,
                best.mean_performance,
                best.env_step
            );
            println!("checkpoint: {}", artifacts.checkpoint.display());
        }
        Command::Finetune {
            config,
            checkpoint,
            seed,
            output,
            force,
        } => {
            let cfg = load_config(&config, seed)?;
            let out = resolve_output(output, &cfg)?;
            let artifacts = pipeline::run_finetune(&cfg, &checkpoint, &out, force)?;
            match (
                artifacts.result.baseline_fitness,
                artifacts.result.best_fitness,
            ) {
                (Some(base), Some(best)) => {
                    println!(
                        "finetuned {} generations: fitness {:.4} -> {:.4}",
                        artifacts.result.generations_run, base, best
                    );
                }
                _ => println!("no generations configured; checkpoint copied unchanged"),
            }
            println!("checkpoint: {}", artifacts.checkpoint.display());
        }
        Command::Eval {
            config,
            checkpoint,
            seed,
            output,
            robustness,
            force,
        } => {
            let cfg = load_config(&config, seed)?;
            let out = resolve_output(output, &cfg)?;
            let artifacts = pipeline::run_eval(&cfg, &checkpoint, &out, robustness, force)?;
            let report = &artifacts.report;
            println!("performance: {:.4}", report.performance);
            if let Some(rob) = &report.robustness {
                println!("robustness: {:.4}", rob.score);
            }
            if let Some(avg) = report.average {
                println!("average: {:.4}", avg);
            }
            println!("report: {}", artifacts.report_path.display());
        }
        Command::Plot { trajectory, output } => {
            let out = pipeline::run_plot(&trajectory, output.as_deref())?;
            println!("figure: {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    if let Err(e) = pipeline::init_worker_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
