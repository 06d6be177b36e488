//! Stage orchestration: run-directory layout, stage entry points, and
//! artifact writing. Every stage is a pure function of (config, seed,
//! input checkpoint), so reruns produce byte-identical artifacts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::nn::{Checkpoint, NetworkEntry, SquashedGaussianPolicy};
use crate::plot::{write_robustness_plot, write_trajectory_plot};
use crate::sac::{self, TrainResult};
use crate::scoring::{
    performance_score, robustness_score, write_csv, Controller, EpisodeRunner, PolicyController,
    ScoreReport, Trajectory,
};
use crate::snes::{self, FinetuneResult};
use crate::{Error, Result};

pub const CONFIG_SNAPSHOT: &str = "config.resolved";
pub const SAC_CHECKPOINT: &str = "checkpoints/sac.ckpt";
pub const SAC_FINAL_CHECKPOINT: &str = "checkpoints/sac-final.ckpt";
pub const SNES_CHECKPOINT: &str = "checkpoints/snes.ckpt";
pub const TRAIN_LOG: &str = "logs/train.jsonl";
pub const FINETUNE_LOG: &str = "logs/finetune.jsonl";
pub const REPORT_JSON: &str = "reports/report.json";
pub const TRAJECTORY_CSV: &str = "reports/trajectory.csv";
pub const TRAJECTORY_SVG: &str = "plots/trajectory.svg";
pub const ROBUSTNESS_SVG: &str = "plots/robustness.svg";

/// Sizes the global worker pool from SWINGUP_WORKERS when set. Call once
/// at process start; later calls are ignored by rayon.
pub fn init_worker_pool() -> Result<()> {
    if let Ok(raw) = std::env::var("SWINGUP_WORKERS") {
        let n: usize = raw
            .parse()
            .map_err(|_| Error::Config(format!("SWINGUP_WORKERS must be a number, got {raw:?}")))?;
        if n == 0 {
            return Err(Error::Config("SWINGUP_WORKERS must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("worker pool already initialized: {e}");
        }
    }
    Ok(())
}

/// Creates the run-directory skeleton. An existing non-empty directory is
/// refused unless `force` is set.
pub fn prepare_run_dir(root: &Path, force: bool) -> Result<()> {
    if root.exists() {
        let non_empty = fs::read_dir(root)?.next().is_some();
        if non_empty && !force {
            return Err(Error::OutputExists(root.to_path_buf()));
        }
    }
    for sub in ["checkpoints", "logs", "reports", "plots"] {
        fs::create_dir_all(root.join(sub))?;
    }
    Ok(())
}

fn write_snapshot(cfg: &ExperimentConfig, root: &Path) -> Result<()> {
    let mut resolved = cfg.clone();
    resolved.run.output = Some(root.to_path_buf());
    fs::write(root.join(CONFIG_SNAPSHOT), resolved.to_toml()?)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub final_checkpoint: PathBuf,
    pub log: PathBuf,
    pub result: TrainResult,
}

/// Stage 1: SAC training. Writes the best-evaluation checkpoint (used by
/// the later stages), the final-step checkpoint, and the training log.
pub fn run_train(cfg: &ExperimentConfig, root: &Path, force: bool) -> Result<TrainArtifacts> {
    cfg.validate()?;
    prepare_run_dir(root, force)?;
    write_snapshot(cfg, root)?;

    let log_path = root.join(TRAIN_LOG);
    let mut log = BufWriter::new(fs::File::create(&log_path)?);
    let model = cfg.model_params();
    let result = sac::train(
        &model,
        &cfg.reward,
        &cfg.sac,
        &cfg.scoring.criteria,
        cfg.run.seed,
        &mut log,
    )?;
    log.flush()?;

    let best_path = root.join(SAC_CHECKPOINT);
    let final_path = root.join(SAC_FINAL_CHECKPOINT);
    result.best_checkpoint.save(&best_path)?;
    result.final_checkpoint.save(&final_path)?;
    Ok(TrainArtifacts {
        checkpoint: best_path,
        final_checkpoint: final_path,
        log: log_path,
        result,
    })
}

#[derive(Debug, Clone)]
pub struct FinetuneArtifacts {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub result: FinetuneResult,
}

/// Stage 2: SNES fine-tuning of the policy from a stage-1 checkpoint.
/// The checkpoint policy must match the architecture the config declares.
pub fn run_finetune(
    cfg: &ExperimentConfig,
    checkpoint_path: &Path,
    root: &Path,
    force: bool,
) -> Result<FinetuneArtifacts> {
    cfg.validate()?;
    let parent = Checkpoint::load(checkpoint_path)?;
    let policy_net = parent.network("policy")?;
    let expected = cfg.sac.policy_arch();
    if policy_net.arch != expected {
        return Err(Error::ArchitectureMismatch(format!(
            "checkpoint policy layers {:?} do not match config layers {:?}",
            policy_net.arch.layer_sizes, expected.layer_sizes
        )));
    }

    prepare_run_dir(root, force)?;
    write_snapshot(cfg, root)?;
    let log_path = root.join(FINETUNE_LOG);
    let mut log = BufWriter::new(fs::File::create(&log_path)?);
    let model = cfg.model_params();
    let result = snes::finetune(
        &policy_net.arch,
        &policy_net.params,
        &model,
        &cfg.reward,
        &cfg.scoring.criteria,
        &cfg.snes,
        cfg.run.seed,
        &mut log,
    )?;
    log.flush()?;

    let evolved = Checkpoint {
        stage: "snes".into(),
        seed: cfg.snes.seed.unwrap_or(cfg.run.seed),
        networks: vec![NetworkEntry::new(
            "policy",
            policy_net.arch.clone(),
            result.params.clone(),
        )],
    };
    let out_path = root.join(SNES_CHECKPOINT);
    evolved.save(&out_path)?;
    Ok(FinetuneArtifacts {
        checkpoint: out_path,
        log: log_path,
        result,
    })
}

#[derive(Debug, Clone)]
pub struct EvalArtifacts {
    pub report_path: PathBuf,
    pub trajectory_csv: PathBuf,
    pub trajectory_svg: PathBuf,
    pub robustness_svg: Option<PathBuf>,
    pub report: ScoreReport,
    pub trajectory: Trajectory,
}

/// Evaluation: one greedy episode from hanging rest (trajectory CSV and
/// figure), the performance score, and optionally the perturbation sweep.
pub fn run_eval(
    cfg: &ExperimentConfig,
    checkpoint_path: &Path,
    root: &Path,
    robustness: bool,
    force: bool,
) -> Result<EvalArtifacts> {
    cfg.validate()?;
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let net = checkpoint.network("policy")?;
    let policy = SquashedGaussianPolicy::new(net.arch.clone(), net.params.clone())?;

    prepare_run_dir(root, force)?;
    write_snapshot(cfg, root)?;
    let model = cfg.model_params();
    let runner = EpisodeRunner::new(model, cfg.reward);
    let mut controller = PolicyController {
        policy: policy.clone(),
    };
    let traj = runner.run(&mut controller, None, cfg.run.seed);

    let csv_path = root.join(TRAJECTORY_CSV);
    let mut csv_file = BufWriter::new(fs::File::create(&csv_path)?);
    write_csv(&traj, &mut csv_file)?;
    csv_file.flush()?;
    let svg_path = root.join(TRAJECTORY_SVG);
    write_trajectory_plot(&svg_path, &traj)?;

    let breakdown = performance_score(&traj, &model, &cfg.scoring.criteria);
    let mut robustness_svg = None;
    let robustness_report = if robustness {
        if cfg.scoring.perturbations.is_empty() {
            return Err(Error::Config(
                "robustness requested but scoring.perturbations is empty".into(),
            ));
        }
        let make = || -> Box<dyn Controller> {
            Box::new(PolicyController {
                policy: policy.clone(),
            })
        };
        let report = robustness_score(
            &runner,
            make,
            &cfg.scoring.criteria.success,
            &cfg.scoring.perturbations,
            cfg.run.seed,
        )?;
        let path = root.join(ROBUSTNESS_SVG);
        write_robustness_plot(&path, &report)?;
        robustness_svg = Some(path);
        Some(report)
    } else {
        None
    };

    let report = ScoreReport::new(breakdown, robustness_report);
    let report_path = root.join(REPORT_JSON);
    let mut payload = serde_json::to_string_pretty(&report)?;
    payload.push('\n');
    fs::write(&report_path, payload)?;
    Ok(EvalArtifacts {
        report_path,
        trajectory_csv: csv_path,
        trajectory_svg: svg_path,
        robustness_svg,
        report,
        trajectory: traj,
    })
}

/// Renders the trajectory figure for an existing CSV. Defaults to the CSV
/// path with an svg extension.
pub fn run_plot(csv: &Path, output: Option<&Path>) -> Result<PathBuf> {
    let traj = crate::scoring::read_csv(fs::File::open(csv)?)?;
    let out = match output {
        Some(p) => p.to_path_buf(),
        None => csv.with_extension("svg"),
    };
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    write_trajectory_plot(&out, &traj)?;
    Ok(out)
}
