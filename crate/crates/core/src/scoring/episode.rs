//! Episode execution at the plant rate, optionally under one perturbation.
//!
//! The controller is queried every plant step with the observed state (which
//! carries sensor noise when the velocity-noise perturbation is active). The
//! runner then routes the action through delay, actuation, response scaling
//! and torque noise before integrating. All randomness comes from one seeded
//! stream, so a (controller, perturbation, seed) triple replays exactly.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;

use crate::dynamics::{
    self, ModelParamField, ModelParams, State, TorquePair, PLANT_DT,
};
use crate::nn::{observe, SquashedGaussianPolicy};
use crate::reward::{surrogate_reward, RewardConfig, StepContext};

use super::trajectory::{Trajectory, TrajectorySample, EPISODE_SECONDS};

/// Closed-loop controller queried at the plant rate. Implementations may be
/// stateful; a fresh controller is built per episode for reproducibility.
pub trait Controller: Send {
    fn act(&mut self, observed: &State) -> f64;
}

/// Always outputs zero torque.
pub struct ZeroController;

impl Controller for ZeroController {
    fn act(&mut self, _observed: &State) -> f64 {
        0.0
    }
}

/// Greedy policy rollout: tanh of the head mean, no exploration noise.
pub struct PolicyController {
    pub policy: SquashedGaussianPolicy,
}

impl Controller for PolicyController {
    fn act(&mut self, observed: &State) -> f64 {
        match self.policy.act_greedy(&observe(observed)) {
            Ok(a) => a[0],
            Err(_) => f64::NAN,
        }
    }
}

/// One perturbation category at a concrete magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationKind {
    /// Scales one physical parameter by (1 + magnitude) for the episode.
    ModelParamScale(ModelParamField),
    /// Gaussian noise with std = magnitude (rad/s) on observed velocities.
    VelocityNoise,
    /// Gaussian noise with std = magnitude * tau_max on the motor torque.
    TorqueNoise,
    /// Delays the applied action by magnitude seconds (rounded to steps).
    TorqueDelay,
    /// Scales the produced torque by (1 - magnitude).
    ActionResponse,
}

/// Runs episodes on a fixed plant with a fixed reward configuration.
#[derive(Debug, Clone)]
pub struct EpisodeRunner {
    pub model: ModelParams,
    pub reward: RewardConfig,
    /// Episode length (s); the competition evaluates 10 s episodes.
    pub duration: f64,
}

impl EpisodeRunner {
    pub fn new(model: ModelParams, reward: RewardConfig) -> Self {
        Self {
            model,
            reward,
            duration: EPISODE_SECONDS,
        }
    }

    /// Full episode from hanging rest.
    pub fn run(
        &self,
        controller: &mut dyn Controller,
        perturbation: Option<&Perturbation>,
        seed: u64,
    ) -> Trajectory {
        self.run_from(State::hanging(), controller, perturbation, seed)
    }

    /// Full episode from an arbitrary start state.
    pub fn run_from(
        &self,
        start: State,
        controller: &mut dyn Controller,
        perturbation: Option<&Perturbation>,
        seed: u64,
    ) -> Trajectory {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let steps = (self.duration / PLANT_DT).round() as usize;

        // Episode-constant plant modification.
        let model = match perturbation {
            Some(Perturbation {
                kind: PerturbationKind::ModelParamScale(field),
                magnitude,
            }) => self.model.scaled(*field, 1.0 + magnitude),
            _ => self.model,
        };

        let delay_steps = match perturbation {
            Some(Perturbation {
                kind: PerturbationKind::TorqueDelay,
                magnitude,
            }) => (magnitude / PLANT_DT).round() as usize,
            _ => 0,
        };
        let mut delay_queue = std::collections::VecDeque::from(vec![0.0; delay_steps]);

        let mut samples = Vec::with_capacity(steps + 1);
        let mut state = start;
        samples.push(TrajectorySample {
            t: 0.0,
            state,
            tau: TorquePair::ZERO,
            action: 0.0,
            reward: 0.0,
        });
        let mut prev_action = 0.0;
        let mut diverged = !state.is_finite();

        if !diverged {
            for k in 0..steps {
                let mut observed = state;
                if let Some(Perturbation {
                    kind: PerturbationKind::VelocityNoise,
                    magnitude,
                }) = perturbation
                {
                    let n1: f64 = rng.sample(StandardNormal);
                    let n2: f64 = rng.sample(StandardNormal);
                    observed.omega1 += magnitude * n1;
                    observed.omega2 += magnitude * n2;
                }

                let raw = controller.act(&observed);
                if !raw.is_finite() {
                    diverged = true;
                    break;
                }
                let commanded = raw.clamp(-1.0, 1.0);
                delay_queue.push_back(commanded);
                let action = delay_queue.pop_front().unwrap();

                let mut tau = dynamics::apply_actuation(action, &model)
                    .expect("clamped finite action");
                if let Some(p) = perturbation {
                    match p.kind {
                        PerturbationKind::ActionResponse => {
                            tau.tau1 *= 1.0 - p.magnitude;
                            tau.tau2 *= 1.0 - p.magnitude;
                        }
                        PerturbationKind::TorqueNoise => {
                            let n: f64 = rng.sample(StandardNormal);
                            let noise = p.magnitude * model.tau_max * n;
                            match model.setting {
                                dynamics::ActuationSetting::Acrobot => tau.tau2 += noise,
                                dynamics::ActuationSetting::Pendubot => tau.tau1 += noise,
                            }
                            // The motor still saturates at its torque limit.
                            tau.tau1 = tau.tau1.clamp(-model.tau_max, model.tau_max);
                            tau.tau2 = tau.tau2.clamp(-model.tau_max, model.tau_max);
                        }
                        _ => {}
                    }
                }

                let next = dynamics::step_torque(&state, &tau, PLANT_DT, &model);
                if !next.is_finite() {
                    diverged = true;
                    break;
                }
                let reward = surrogate_reward(
                    &next,
                    &StepContext::new(action, prev_action),
                    &model,
                    &self.reward,
                );
                prev_action = action;
                state = next;
                samples.push(TrajectorySample {
                    t: (k + 1) as f64 * PLANT_DT,
                    state,
                    tau,
                    action,
                    reward,
                });
            }
        }

        Trajectory { samples, diverged }
    }
}
