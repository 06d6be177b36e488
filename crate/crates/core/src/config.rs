//! Experiment configuration: one TOML file describing the plant, reward,
//! both trainers, and the scoring protocol. Unknown keys are rejected in
//! every section so a typo cannot silently fall back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ActuationSetting, ModelParams};
use crate::reward::RewardConfig;
use crate::sac::SacConfig;
use crate::scoring::{PerturbationSpec, ScoreCriteria};
use crate::snes::SnesConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub setting: ActuationSetting,
    /// Run directory; a CLI flag may override or supply it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringSection {
    pub criteria: ScoreCriteria,
    #[serde(default)]
    pub perturbations: Vec<PerturbationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub model: ModelParams,
    pub reward: RewardConfig,
    pub sac: SacConfig,
    pub snes: SnesConfig,
    pub scoring: ScoringSection,
}

impl ExperimentConfig {
    /// Parses and validates. TOML errors keep their line/column context.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Cross-section invariants on top of the per-section ones.
    pub fn validate(&self) -> Result<()> {
        let model = self.model_params();
        model.validate()?;
        self.reward.validate(&model)?;
        self.sac.validate()?;
        self.snes.validate()?;
        self.scoring.criteria.validate(&model)?;
        for spec in &self.scoring.perturbations {
            spec.validate()?;
        }
        Ok(())
    }

    /// Plant parameters with the actuation choice from the run section.
    pub fn model_params(&self) -> ModelParams {
        let mut model = self.model;
        model.setting = self.run.setting;
        model
    }

    /// Snapshot for the run directory; parses back to an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}
