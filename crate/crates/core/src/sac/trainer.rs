//! SAC update rules and the environment-interaction training loop.
//!
//! Gradients are written out by hand. The actor gradient follows the
//! reparameterized sample a = tanh(mean + std * z) with z held fixed; the
//! log-density derivative with respect to the pre-tanh value is
//! 2 a (1 - a^2) / (1 - a^2 + eps), and the clamped log-std channel passes
//! gradient only while the raw output is inside the clamp interval.

use std::io::Write;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, ModelParams, State, PLANT_DT, PLANT_HZ};
use crate::nn::{
    Adam, Checkpoint, FlatParams, MlpArchitecture, MlpMatrices, NetworkEntry,
    SquashedGaussianPolicy, Activation, observe, LOG_STD_MAX, LOG_STD_MIN, OBS_DIM, SQUASH_EPS,
};
use crate::reward::{surrogate_reward, RewardConfig, StepContext};
use crate::scoring::{performance_score, EpisodeRunner, PolicyController, ScoreCriteria};
use crate::util::mix_seed;
use crate::{Error, Result};

use super::replay::{ReplayBuffer, Transition, TransitionBatch};

const EVAL_SEED_TAG: u64 = 0x6576616c; // "eval"
const START_SEED_TAG: u64 = 0x73746172; // "star(t)"
/// Uniform half-width of the training/eval start-state angle noise (rad).
const START_NOISE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntAlphaMode {
    /// Gradient-tuned temperature targeting entropy -1 per action dim.
    Auto,
    /// Temperature frozen at `ent_alpha_init`.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub polyak_tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub ent_alpha_mode: EntAlphaMode,
    pub ent_alpha_init: f64,
    /// Decision rate (Hz); must divide the 500 Hz plant rate.
    pub control_hz: u32,
    pub episode_seconds: f64,
    /// Environment-step budget, warmup included.
    pub total_steps: u64,
    /// Steps driven by uniform random actions before updates begin.
    pub warmup_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub log_every: u64,
    /// Stop once an evaluation reaches this greedy success rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_success_rate: Option<f64>,
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("sac.gamma must lie in [0, 1)".into()));
        }
        if !(self.polyak_tau > 0.0 && self.polyak_tau <= 1.0) {
            return Err(Error::Config("sac.polyak_tau must lie in (0, 1]".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("sac.lr must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("sac.batch_size must be positive".into()));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::Config(
                "sac.buffer_capacity must hold at least one batch".into(),
            ));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::Config("sac.hidden_sizes must be positive".into()));
        }
        if !(self.ent_alpha_init > 0.0 && self.ent_alpha_init.is_finite()) {
            return Err(Error::Config("sac.ent_alpha_init must be positive".into()));
        }
        if self.control_hz == 0 || PLANT_HZ % self.control_hz != 0 {
            return Err(Error::Config(format!(
                "sac.control_hz must divide the plant rate ({PLANT_HZ} Hz)"
            )));
        }
        if !(self.episode_seconds > 0.0) {
            return Err(Error::Config("sac.episode_seconds must be positive".into()));
        }
        if self.warmup_steps > self.total_steps {
            return Err(Error::Config(
                "sac.warmup_steps cannot exceed sac.total_steps".into(),
            ));
        }
        if self.warmup_steps < self.batch_size as u64 {
            return Err(Error::Config(
                "sac.warmup_steps must cover at least one batch".into(),
            ));
        }
        if self.eval_every == 0 || self.log_every == 0 {
            return Err(Error::Config(
                "sac.eval_every and sac.log_every must be positive".into(),
            ));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("sac.eval_episodes must be positive".into()));
        }
        if let Some(r) = self.early_stop_success_rate {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(
                    "sac.early_stop_success_rate must lie in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn policy_arch(&self) -> MlpArchitecture {
        let mut sizes = vec![OBS_DIM];
        sizes.extend(&self.hidden_sizes);
        sizes.push(2); // scalar action: mean and log-std
        MlpArchitecture {
            layer_sizes: sizes,
            activation: self.activation,
        }
    }

    pub fn q_arch(&self) -> MlpArchitecture {
        let mut sizes = vec![OBS_DIM + 1];
        sizes.extend(&self.hidden_sizes);
        sizes.push(1);
        MlpArchitecture {
            layer_sizes: sizes,
            activation: self.activation,
        }
    }

    /// Plant substeps per decision.
    pub fn substeps(&self) -> u32 {
        PLANT_HZ / self.control_hz
    }
}

/// Learnable state: actor, twin critics, their targets, temperature, and
/// the per-network Adam moments.
#[derive(Debug, Clone)]
pub struct SacState {
    pub policy_arch: MlpArchitecture,
    pub q_arch: MlpArchitecture,
    pub policy: FlatParams,
    pub q1: FlatParams,
    pub q2: FlatParams,
    pub target_q1: FlatParams,
    pub target_q2: FlatParams,
    pub log_alpha: f64,
    pub target_entropy: f64,
    auto_alpha: bool,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_alpha: Adam,
    pub updates: u64,
}

impl SacState {
    pub fn new(cfg: &SacConfig, rng: &mut impl Rng) -> Self {
        let policy_arch = cfg.policy_arch();
        let q_arch = cfg.q_arch();
        let policy = FlatParams::init(&policy_arch, rng);
        let q1 = FlatParams::init(&q_arch, rng);
        let q2 = FlatParams::init(&q_arch, rng);
        let target_q1 = q1.clone();
        let target_q2 = q2.clone();
        Self {
            opt_policy: Adam::new(policy.len(), cfg.lr),
            opt_q1: Adam::new(q1.len(), cfg.lr),
            opt_q2: Adam::new(q2.len(), cfg.lr),
            opt_alpha: Adam::new(1, cfg.lr),
            policy_arch,
            q_arch,
            policy,
            q1,
            q2,
            target_q1,
            target_q2,
            log_alpha: cfg.ent_alpha_init.ln(),
            target_entropy: -1.0,
            auto_alpha: cfg.ent_alpha_mode == EntAlphaMode::Auto,
            updates: 0,
        }
    }

    pub fn ent_alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn policy_network(&self) -> SquashedGaussianPolicy {
        SquashedGaussianPolicy::new(self.policy_arch.clone(), self.policy.clone())
            .expect("state holds a consistent policy")
    }

    pub fn checkpoint(&self, stage: &str, seed: u64) -> Checkpoint {
        Checkpoint {
            stage: stage.into(),
            seed,
            networks: vec![
                NetworkEntry::new("policy", self.policy_arch.clone(), self.policy.clone()),
                NetworkEntry::new("q1", self.q_arch.clone(), self.q1.clone()),
                NetworkEntry::new("q2", self.q_arch.clone(), self.q2.clone()),
            ],
        }
    }
}

/// Per-update diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub policy_loss: f64,
    pub alpha_loss: f64,
    pub ent_alpha: f64,
    /// Batch estimate of the policy entropy, mean(-log pi).
    pub entropy: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        self.q1_loss.is_finite()
            && self.q2_loss.is_finite()
            && self.policy_loss.is_finite()
            && self.alpha_loss.is_finite()
            && self.ent_alpha.is_finite()
            && self.entropy.is_finite()
    }
}

/// target = tau * online + (1 - tau) * target, elementwise.
pub fn polyak_update(target: &mut FlatParams, online: &FlatParams, tau: f64) {
    assert_eq!(target.len(), online.len(), "polyak dimensions");
    for (t, o) in target.0.iter_mut().zip(online.as_slice()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

fn ln_2pi() -> f64 {
    (2.0 * std::f64::consts::PI).ln()
}

/// Squashed-Gaussian quantities for one batch row.
struct RowSample {
    a: f64,
    logp: f64,
    /// d logp / d u at fixed z.
    glogp_u: f64,
    std: f64,
    z: f64,
    clamped: bool,
}

fn sample_row(mean: f64, raw_log_std: f64, z: f64) -> RowSample {
    let clamped = !(LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_log_std);
    let ls = raw_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
    let std = ls.exp();
    let u = mean + std * z;
    let a = u.tanh();
    let sq = 1.0 - a * a;
    let logp = -ls - 0.5 * ln_2pi() - 0.5 * z * z - (sq + SQUASH_EPS).ln();
    let glogp_u = 2.0 * a * sq / (sq + SQUASH_EPS);
    RowSample {
        a,
        logp,
        glogp_u,
        std,
        z,
        clamped,
    }
}

/// Bellman targets y = r + gamma (1 - done) (min target-Q(s', a') - alpha
/// log pi(a'|s')) with a' freshly sampled from the current policy.
pub fn critic_targets(
    batch: &TransitionBatch,
    state: &SacState,
    gamma: f64,
    rng: &mut impl Rng,
) -> Array1<f64> {
    let b = batch.len();
    let pol = MlpMatrices::from_flat(&state.policy_arch, &state.policy);
    let head = pol.forward_batch(&batch.next_obs);
    let out = head.output();
    let mut xq = Array2::zeros((b, OBS_DIM + 1));
    let mut logp = Array1::zeros(b);
    for i in 0..b {
        let z: f64 = rng.sample(StandardNormal);
        let row = sample_row(out[[i, 0]], out[[i, 1]], z);
        for j in 0..OBS_DIM {
            xq[[i, j]] = batch.next_obs[[i, j]];
        }
        xq[[i, OBS_DIM]] = row.a;
        logp[i] = row.logp;
    }
    let tq1 = MlpMatrices::from_flat(&state.q_arch, &state.target_q1);
    let tq2 = MlpMatrices::from_flat(&state.q_arch, &state.target_q2);
    let q1 = tq1.forward_batch(&xq);
    let q2 = tq2.forward_batch(&xq);
    let alpha = state.ent_alpha();
    let mut y = Array1::zeros(b);
    for i in 0..b {
        let qmin = q1.output()[[i, 0]].min(q2.output()[[i, 0]]);
        y[i] = batch.reward[i] + gamma * (1.0 - batch.done[i]) * (qmin - alpha * logp[i]);
    }
    y
}

/// One regression step on a critic. Returns the batch MSE loss.
fn critic_step(
    arch: &MlpArchitecture,
    params: &mut FlatParams,
    opt: &mut Adam,
    xq: &Array2<f64>,
    y: &Array1<f64>,
) -> f64 {
    let b = xq.nrows();
    let mats = MlpMatrices::from_flat(arch, params);
    let cache = mats.forward_batch(xq);
    let mut upstream = Array2::zeros((b, 1));
    let mut loss = 0.0;
    for i in 0..b {
        let diff = cache.output()[[i, 0]] - y[i];
        loss += diff * diff;
        upstream[[i, 0]] = 2.0 * diff / b as f64;
    }
    let (grad, _) = mats.backward_batch(arch, &cache, &upstream);
    opt.step(&mut params.0, grad.as_slice());
    loss / b as f64
}

/// Actor gradient and diagnostics for a fixed noise vector z. Exposed
/// separately from [`update_step`] so the analytic gradient can be checked
/// against finite differences of [`policy_objective`].
fn policy_gradient(
    state: &SacState,
    obs: &Array2<f64>,
    z: &Array1<f64>,
) -> (FlatParams, f64, f64) {
    let b = obs.nrows();
    let alpha = state.ent_alpha();
    let pol = MlpMatrices::from_flat(&state.policy_arch, &state.policy);
    let cache = pol.forward_batch(obs);
    let out = cache.output();
    let rows: Vec<RowSample> = (0..b)
        .map(|i| sample_row(out[[i, 0]], out[[i, 1]], z[i]))
        .collect();

    let mut xa = Array2::zeros((b, OBS_DIM + 1));
    for i in 0..b {
        for j in 0..OBS_DIM {
            xa[[i, j]] = obs[[i, j]];
        }
        xa[[i, OBS_DIM]] = rows[i].a;
    }
    let q1 = MlpMatrices::from_flat(&state.q_arch, &state.q1);
    let q2 = MlpMatrices::from_flat(&state.q_arch, &state.q2);
    let c1 = q1.forward_batch(&xa);
    let c2 = q2.forward_batch(&xa);
    let mut up1 = Array2::zeros((b, 1));
    let mut up2 = Array2::zeros((b, 1));
    let mut qmin = Array1::zeros(b);
    for i in 0..b {
        let (v1, v2) = (c1.output()[[i, 0]], c2.output()[[i, 0]]);
        if v1 <= v2 {
            up1[[i, 0]] = 1.0;
            qmin[i] = v1;
        } else {
            up2[[i, 0]] = 1.0;
            qmin[i] = v2;
        }
    }
    let (_, gin1) = q1.backward_batch(&state.q_arch, &c1, &up1);
    let (_, gin2) = q2.backward_batch(&state.q_arch, &c2, &up2);

    let mut upstream = Array2::zeros((b, 2));
    let mut loss = 0.0;
    let mut entropy = 0.0;
    for i in 0..b {
        let r = &rows[i];
        let dq_da = gin1[[i, OBS_DIM]] + gin2[[i, OBS_DIM]];
        let sq = 1.0 - r.a * r.a;
        let d_mean = alpha * r.glogp_u - dq_da * sq;
        let d_ls = if r.clamped {
            0.0
        } else {
            alpha * (-1.0 + r.glogp_u * r.std * r.z) - dq_da * sq * r.std * r.z
        };
        upstream[[i, 0]] = d_mean / b as f64;
        upstream[[i, 1]] = d_ls / b as f64;
        loss += alpha * r.logp - qmin[i];
        entropy += -r.logp;
    }
    let (grad, _) = pol.backward_batch(&state.policy_arch, &cache, &upstream);
    (grad, loss / b as f64, entropy / b as f64)
}

/// Actor objective mean(alpha log pi - min Q) at fixed noise; finite
/// difference ground truth for the analytic gradient.
#[cfg(test)]
fn policy_objective(state: &SacState, obs: &Array2<f64>, z: &Array1<f64>) -> f64 {
    let b = obs.nrows();
    let alpha = state.ent_alpha();
    let pol = MlpMatrices::from_flat(&state.policy_arch, &state.policy);
    let out_cache = pol.forward_batch(obs);
    let out = out_cache.output();
    let q1 = MlpMatrices::from_flat(&state.q_arch, &state.q1);
    let q2 = MlpMatrices::from_flat(&state.q_arch, &state.q2);
    let mut xa = Array2::zeros((b, OBS_DIM + 1));
    let mut rows = Vec::with_capacity(b);
    for i in 0..b {
        let row = sample_row(out[[i, 0]], out[[i, 1]], z[i]);
        for j in 0..OBS_DIM {
            xa[[i, j]] = obs[[i, j]];
        }
        xa[[i, OBS_DIM]] = row.a;
        rows.push(row);
    }
    let v1 = q1.forward_batch(&xa);
    let v2 = q2.forward_batch(&xa);
    let mut loss = 0.0;
    for i in 0..b {
        let qmin = v1.output()[[i, 0]].min(v2.output()[[i, 0]]);
        loss += alpha * rows[i].logp - qmin;
    }
    loss / b as f64
}

/// One full SAC update: both critics, the actor, the temperature (when
/// auto), then the polyak target move. Draw order from `rng` is fixed:
/// batch indices, target-action noise, actor noise.
pub fn update_step(
    state: &mut SacState,
    buffer: &ReplayBuffer,
    cfg: &SacConfig,
    rng: &mut impl Rng,
) -> Result<LossReport> {
    let batch = buffer.sample(cfg.batch_size, rng)?;
    let y = critic_targets(&batch, state, cfg.gamma, rng);

    let b = batch.len();
    let mut xq = Array2::zeros((b, OBS_DIM + 1));
    for i in 0..b {
        for j in 0..OBS_DIM {
            xq[[i, j]] = batch.obs[[i, j]];
        }
        xq[[i, OBS_DIM]] = batch.action[i];
    }
    let q1_loss = critic_step(&state.q_arch, &mut state.q1, &mut state.opt_q1, &xq, &y);
    let q2_loss = critic_step(&state.q_arch, &mut state.q2, &mut state.opt_q2, &xq, &y);

    let z = Array1::from_iter((0..b).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let (pgrad, policy_loss, entropy) = policy_gradient(state, &batch.obs, &z);
    state.opt_policy.step(&mut state.policy.0, pgrad.as_slice());

    let alpha_loss = if state.auto_alpha {
        // L(log alpha) = -alpha * (mean log pi + target entropy); the mean
        // log pi comes from the actor batch just drawn.
        let mean_logp = -entropy;
        let g = -state.ent_alpha() * (mean_logp + state.target_entropy);
        let mut la = [state.log_alpha];
        state.opt_alpha.step(&mut la, &[g]);
        state.log_alpha = la[0];
        g
    } else {
        0.0
    };

    polyak_update(&mut state.target_q1, &state.q1, cfg.polyak_tau);
    polyak_update(&mut state.target_q2, &state.q2, cfg.polyak_tau);
    state.updates += 1;

    let report = LossReport {
        q1_loss,
        q2_loss,
        policy_loss,
        alpha_loss,
        ent_alpha: state.ent_alpha(),
        entropy,
    };
    if !report.is_finite() {
        return Err(Error::NonFiniteLoss {
            step: state.updates,
            report: serde_json::to_string(&report).unwrap_or_else(|_| format!("{report:?}")),
        });
    }
    Ok(report)
}

/// One greedy evaluation round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub env_step: u64,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_performance: f64,
    pub mean_return: f64,
}

/// Greedy rollouts at the plant rate from near-hanging starts (uniform
/// angle noise of 0.01 rad, velocities zero). Start states depend only on
/// (seed, eval_index, episode), so evaluations replay exactly.
pub fn evaluate_policy(
    policy: &SquashedGaussianPolicy,
    model: &ModelParams,
    reward: &RewardConfig,
    criteria: &ScoreCriteria,
    episodes: usize,
    seed: u64,
    eval_index: u64,
) -> (f64, f64, f64) {
    let runner = EpisodeRunner::new(*model, *reward);
    let mut successes = 0usize;
    let mut perf = 0.0;
    let mut ret = 0.0;
    for ep in 0..episodes {
        let ep_seed = mix_seed(&[seed, EVAL_SEED_TAG, eval_index, ep as u64]);
        let mut start_rng = ChaCha12Rng::seed_from_u64(mix_seed(&[ep_seed, START_SEED_TAG]));
        let start = State::new(
            start_rng.random_range(-START_NOISE..START_NOISE),
            start_rng.random_range(-START_NOISE..START_NOISE),
            0.0,
            0.0,
        );
        let mut controller = PolicyController {
            policy: policy.clone(),
        };
        let traj = runner.run_from(start, &mut controller, None, ep_seed);
        let breakdown = performance_score(&traj, model, criteria);
        if breakdown.success {
            successes += 1;
        }
        perf += breakdown.score;
        ret += traj.samples.iter().map(|s| s.reward).sum::<f64>();
    }
    let n = episodes as f64;
    (successes as f64 / n, perf / n, ret / n)
}

#[derive(Debug, Clone, Serialize)]
struct UpdateLogLine<'a> {
    kind: &'a str,
    env_step: u64,
    updates: u64,
    #[serde(flatten)]
    report: LossReport,
}

#[derive(Debug, Clone, Serialize)]
struct EvalLogLine<'a> {
    kind: &'a str,
    #[serde(flatten)]
    record: EvalRecord,
    best: bool,
}

/// Training outcome: final and best-evaluation checkpoints plus the
/// evaluation history.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub final_checkpoint: Checkpoint,
    pub best_checkpoint: Checkpoint,
    pub best_eval: EvalRecord,
    pub evals: Vec<EvalRecord>,
    pub env_steps: u64,
    pub updates: u64,
}

/// Runs SAC against the plant. Writes JSONL progress records to `log`.
/// Fully deterministic for a fixed (config, seed) pair.
pub fn train(
    model: &ModelParams,
    reward: &RewardConfig,
    cfg: &SacConfig,
    criteria: &ScoreCriteria,
    seed: u64,
    log: &mut dyn Write,
) -> Result<TrainResult> {
    cfg.validate()?;
    model.validate()?;
    reward.validate(model)?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state = SacState::new(cfg, &mut rng);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);

    let substeps = cfg.substeps();
    let decisions_per_episode =
        (cfg.episode_seconds * cfg.control_hz as f64).round().max(1.0) as u64;

    let mut env_step: u64 = 0;
    let mut evals = Vec::new();
    let mut best: Option<(EvalRecord, Checkpoint)> = None;
    let mut stop = false;

    'outer: while env_step < cfg.total_steps {
        let mut s = State::new(
            rng.random_range(-START_NOISE..START_NOISE),
            rng.random_range(-START_NOISE..START_NOISE),
            0.0,
            0.0,
        );
        let mut prev_action = 0.0;
        for _ in 0..decisions_per_episode {
            if env_step >= cfg.total_steps || stop {
                break 'outer;
            }
            let obs = observe(&s);
            let action = if env_step < cfg.warmup_steps {
                rng.random_range(-1.0..1.0)
            } else {
                let out = crate::nn::mlp::forward(&state.policy_arch, &state.policy, &obs)?;
                sample_row(out[0], out[1], rng.sample(StandardNormal)).a
            };
            let tau = dynamics::apply_actuation(action, model)?;
            let mut next = s;
            for _ in 0..substeps {
                next = dynamics::step_torque(&next, &tau, PLANT_DT, model);
            }
            if !next.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: state.updates,
                    report: format!("plant state diverged at env step {env_step}"),
                });
            }
            let r = surrogate_reward(
                &next,
                &StepContext::new(action, prev_action),
                model,
                reward,
            );
            buffer.push(Transition {
                obs,
                action,
                reward: r,
                next_obs: observe(&next),
                done: false,
            });
            prev_action = action;
            s = next;
            env_step += 1;

            if env_step >= cfg.warmup_steps {
                let report = match update_step(&mut state, &buffer, cfg, &mut rng) {
                    Ok(rep) => rep,
                    Err(Error::NonFiniteLoss { step, report }) => {
                        let line = serde_json::json!({
                            "kind": "diagnostic",
                            "env_step": env_step,
                            "updates": step,
                            "report": report,
                        });
                        writeln!(log, "{line}")?;
                        return Err(Error::NonFiniteLoss { step, report });
                    }
                    Err(e) => return Err(e),
                };
                if state.updates % cfg.log_every == 0 {
                    let line = UpdateLogLine {
                        kind: "update",
                        env_step,
                        updates: state.updates,
                        report,
                    };
                    writeln!(log, "{}", serde_json::to_string(&line)?)?;
                }
            }

            if env_step % cfg.eval_every == 0 && env_step >= cfg.warmup_steps {
                let record = run_eval(
                    &state, model, reward, criteria, cfg, seed, env_step, &mut evals,
                );
                let is_best = better(&record, best.as_ref().map(|(r, _)| r));
                if is_best {
                    best = Some((record, state.checkpoint("sac", seed)));
                }
                let line = EvalLogLine {
                    kind: "eval",
                    record,
                    best: is_best,
                };
                writeln!(log, "{}", serde_json::to_string(&line)?)?;
                if let Some(th) = cfg.early_stop_success_rate {
                    if record.success_rate >= th {
                        stop = true;
                    }
                }
            }
        }
    }

    // Ensure at least one (final) evaluation exists.
    let need_final = evals.last().map_or(true, |e| e.env_step != env_step);
    if need_final {
        let record = run_eval(
            &state, model, reward, criteria, cfg, seed, env_step, &mut evals,
        );
        let is_best = better(&record, best.as_ref().map(|(r, _)| r));
        if is_best {
            best = Some((record, state.checkpoint("sac", seed)));
        }
        let line = EvalLogLine {
            kind: "eval",
            record,
            best: is_best,
        };
        writeln!(log, "{}", serde_json::to_string(&line)?)?;
    }

    let (best_eval, best_checkpoint) = best.expect("at least one evaluation ran");
    Ok(TrainResult {
        final_checkpoint: state.checkpoint("sac", seed),
        best_checkpoint,
        best_eval,
        evals,
        env_steps: env_step,
        updates: state.updates,
    })
}

fn better(candidate: &EvalRecord, incumbent: Option<&EvalRecord>) -> bool {
    match incumbent {
        None => true,
        Some(inc) => {
            candidate.success_rate > inc.success_rate
                || (candidate.success_rate == inc.success_rate
                    && candidate.mean_performance > inc.mean_performance)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    state: &SacState,
    model: &ModelParams,
    reward: &RewardConfig,
    criteria: &ScoreCriteria,
    cfg: &SacConfig,
    seed: u64,
    env_step: u64,
    evals: &mut Vec<EvalRecord>,
) -> EvalRecord {
    let policy = state.policy_network();
    let (success_rate, mean_performance, mean_return) = evaluate_policy(
        &policy,
        model,
        reward,
        criteria,
        cfg.eval_episodes,
        seed,
        evals.len() as u64,
    );
    let record = EvalRecord {
        env_step,
        episodes: cfg.eval_episodes,
        success_rate,
        mean_performance,
        mean_return,
    };
    evals.push(record);
    record
}
