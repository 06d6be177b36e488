//! Shaped swing-up reward with two height-gated branches.
//!
//! Above the height threshold the reward pays potential energy plus an
//! alignment bonus and charges kinetic energy, torque effort and action
//! slew; below it the reward pays potential energy and charges a milder
//! effort/slew penalty plus a velocity penalty. The branch switch gives the
//! learner a distinct objective for the pumping phase and the catch phase.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, ModelParams, State};
use crate::{Error, Result};

/// Branch selected by the end-effector height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Height strictly above the threshold: catch-and-hold shaping.
    Above,
    /// Height at or below the threshold: pumping shaping.
    Below,
}

/// Action context for one reward evaluation. `prev_action` is the action
/// applied on the previous decision step, defined as 0 at episode start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub action: f64,
    pub prev_action: f64,
}

impl StepContext {
    pub fn new(action: f64, prev_action: f64) -> Self {
        Self {
            action,
            prev_action,
        }
    }
}

/// Reward weights and the branch threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// End-effector height threshold separating the branches (m).
    pub y_th: f64,
    /// Alignment bonus weight on (1 + cos(theta2))^2.
    pub alpha: f64,
    /// Kinetic-energy penalty weight (above branch).
    pub beta: f64,
    /// Squared-action penalty weight above / below the threshold.
    pub rho1: f64,
    pub rho2: f64,
    /// Action-slew penalty weight above / below the threshold.
    pub phi1: f64,
    pub phi2: f64,
    /// Velocity penalty weight (below branch).
    pub eta: f64,
}

impl RewardConfig {
    pub fn acrobot() -> Self {
        Self {
            y_th: 0.375,
            ..Self::pendubot()
        }
    }

    pub fn pendubot() -> Self {
        Self {
            y_th: 0.35,
            alpha: 2.0,
            beta: 1.0,
            rho1: 0.1,
            rho2: 0.02,
            phi1: 0.15,
            phi2: 0.15,
            eta: 0.02,
        }
    }

    pub fn validate(&self, model: &ModelParams) -> Result<()> {
        for (name, v) in [
            ("y_th", self.y_th),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("phi1", self.phi1),
            ("phi2", self.phi2),
            ("eta", self.eta),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("reward.{name} must be finite")));
            }
        }
        let reach = model.l1 + model.l2;
        if self.y_th <= -reach || self.y_th >= reach {
            return Err(Error::Config(format!(
                "reward.y_th = {} is outside the reachable band (-{reach}, {reach})",
                self.y_th
            )));
        }
        Ok(())
    }
}

/// Which branch applies to a state. The gate is strict: exactly at the
/// threshold the below branch applies.
pub fn branch(s: &State, model: &ModelParams, cfg: &RewardConfig) -> Branch {
    if dynamics::end_effector_height(s, model) > cfg.y_th {
        Branch::Above
    } else {
        Branch::Below
    }
}

/// Shaped reward for arriving in state `s` after applying `ctx.action`.
pub fn surrogate_reward(
    s: &State,
    ctx: &StepContext,
    model: &ModelParams,
    cfg: &RewardConfig,
) -> f64 {
    let v = dynamics::potential_energy(s, model);
    let a = ctx.action;
    let d = ctx.action - ctx.prev_action;
    let slew = d * d;
    match branch(s, model, cfg) {
        Branch::Above => {
            let align = 1.0 + s.theta2.cos();
            let t = dynamics::kinetic_energy(s, model);
            v + cfg.alpha * align * align - cfg.beta * t - cfg.rho1 * a * a - cfg.phi1 * slew
        }
        Branch::Below => {
            v - cfg.rho2 * a * a
                - cfg.phi2 * slew
                - cfg.eta * (s.omega1 * s.omega1 + s.omega2 * s.omega2)
        }
    }
}
