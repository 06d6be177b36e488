//! Robustness sweep: pass rates over perturbation categories and magnitudes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParamField;
use crate::util::mix_seed;
use crate::{Error, Result};

use super::episode::{Controller, EpisodeRunner, Perturbation, PerturbationKind};
use super::score::{success, SuccessCriterion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationCategory {
    ModelParamScale,
    VelocityNoise,
    TorqueNoise,
    TorqueDelay,
    ActionResponse,
}

/// One category of the sweep: a magnitude grid and a trial count per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub category: PerturbationCategory,
    /// Which physical parameter to scale; required for (and only for)
    /// `model_param_scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<ModelParamField>,
    pub magnitudes: Vec<f64>,
    pub trials: usize,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.magnitudes.is_empty() {
            return Err(Error::Config(format!(
                "perturbation {:?}: magnitude grid is empty",
                self.category
            )));
        }
        if self.magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Config(format!(
                "perturbation {:?}: magnitudes must be finite and non-negative",
                self.category
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config(format!(
                "perturbation {:?}: trials must be at least 1",
                self.category
            )));
        }
        match (self.category, self.param) {
            (PerturbationCategory::ModelParamScale, None) => Err(Error::Config(
                "perturbation model_param_scale needs a `param` field".into(),
            )),
            (PerturbationCategory::ModelParamScale, Some(_)) => Ok(()),
            (_, Some(_)) => Err(Error::Config(format!(
                "perturbation {:?} does not take a `param` field",
                self.category
            ))),
            (_, None) => Ok(()),
        }
    }

    pub fn kind(&self) -> PerturbationKind {
        match self.category {
            PerturbationCategory::ModelParamScale => {
                PerturbationKind::ModelParamScale(self.param.expect("validated spec"))
            }
            PerturbationCategory::VelocityNoise => PerturbationKind::VelocityNoise,
            PerturbationCategory::TorqueNoise => PerturbationKind::TorqueNoise,
            PerturbationCategory::TorqueDelay => PerturbationKind::TorqueDelay,
            PerturbationCategory::ActionResponse => PerturbationKind::ActionResponse,
        }
    }

    pub fn label(&self) -> String {
        match (self.category, self.param) {
            (PerturbationCategory::ModelParamScale, Some(p)) => {
                format!("model_param_scale({p:?})").to_lowercase()
            }
            (c, _) => format!("{c:?}")
                .chars()
                .flat_map(|ch| {
                    if ch.is_uppercase() {
                        vec!['_', ch.to_ascii_lowercase()]
                    } else {
                        vec![ch]
                    }
                })
                .skip(1)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudePoint {
    pub magnitude: f64,
    pub trials: usize,
    pub passes: usize,
    pub pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryOutcome {
    pub label: String,
    /// Fraction of all trials in the category that passed.
    pub pass_fraction: f64,
    pub points: Vec<MagnitudePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Mean of the per-category pass fractions.
    pub score: f64,
    pub categories: Vec<CategoryOutcome>,
}

/// Runs the sweep. Each trial gets a fresh controller and a seed derived
/// from its (category, magnitude, trial) position, so results do not depend
/// on scheduling; trials run in parallel.
pub fn robustness_score<F>(
    runner: &EpisodeRunner,
    make_controller: F,
    criterion: &SuccessCriterion,
    specs: &[PerturbationSpec],
    base_seed: u64,
) -> Result<RobustnessReport>
where
    F: Fn() -> Box<dyn Controller> + Sync,
{
    if specs.is_empty() {
        return Err(Error::Config("robustness sweep has no perturbations".into()));
    }
    for spec in specs {
        spec.validate()?;
    }

    let mut jobs = Vec::new();
    for (ci, spec) in specs.iter().enumerate() {
        for (mi, &magnitude) in spec.magnitudes.iter().enumerate() {
            for ti in 0..spec.trials {
                jobs.push((ci, mi, ti, magnitude));
            }
        }
    }

    let passes: Vec<(usize, usize, bool)> = jobs
        .par_iter()
        .map(|&(ci, mi, ti, magnitude)| {
            let perturbation = Perturbation {
                kind: specs[ci].kind(),
                magnitude,
            };
            let seed = mix_seed(&[base_seed, ci as u64, mi as u64, ti as u64]);
            let mut controller = make_controller();
            let traj = runner.run(controller.as_mut(), Some(&perturbation), seed);
            (ci, mi, success(&traj, &runner.model, criterion))
        })
        .collect();

    let mut categories = Vec::with_capacity(specs.len());
    for (ci, spec) in specs.iter().enumerate() {
        let mut points = Vec::with_capacity(spec.magnitudes.len());
        let mut cat_passes = 0usize;
        let mut cat_trials = 0usize;
        for (mi, &magnitude) in spec.magnitudes.iter().enumerate() {
            let n_pass = passes
                .iter()
                .filter(|&&(c, m, ok)| c == ci && m == mi && ok)
                .count();
            cat_passes += n_pass;
            cat_trials += spec.trials;
            points.push(MagnitudePoint {
                magnitude,
                trials: spec.trials,
                passes: n_pass,
                pass_rate: n_pass as f64 / spec.trials as f64,
            });
        }
        categories.push(CategoryOutcome {
            label: spec.label(),
            pass_fraction: cat_passes as f64 / cat_trials as f64,
            points,
        });
    }
    let score =
        categories.iter().map(|c| c.pass_fraction).sum::<f64>() / categories.len() as f64;
    Ok(RobustnessReport { score, categories })
}
