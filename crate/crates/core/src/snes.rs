//! Separable natural evolution strategy over flat policy parameters.
//!
//! The optimizer keeps a diagonal Gaussian search distribution (theta,
//! sigma), draws mirrored candidate pairs, converts fitnesses to rank
//! utilities, and applies the natural-gradient update
//!   theta <- theta + eta_mean * sigma . sum_k u_k z_k
//!   sigma_i <- sigma_i * exp(eta_sigma / 2 * sum_k u_k (z_ki^2 - 1)).
//! Accumulation runs over mirrored pairs so that tied pairs cancel exactly
//! and a rank-preserving fitness transform leaves the update bit-identical.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelParams, State};
use crate::nn::{observe, FlatParams, MlpArchitecture, SquashedGaussianPolicy};
use crate::reward::RewardConfig;
use crate::scoring::{performance_score, Controller, EpisodeRunner, ScoreCriteria};
use crate::util::mix_seed;
use crate::{Error, Result};

const GEN_SEED_TAG: u64 = 0x736e6573; // "snes"
const EPISODE_SEED_TAG: u64 = 0x65700000;
const NOISE_SEED_TAG: u64 = 0x6e6f6973;
const BASELINE_CANDIDATE: u64 = u64::MAX;
/// Pre-tanh values are clamped to this magnitude before perturbing, which
/// keeps atanh of a saturated action finite.
const PRE_TANH_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionScope {
    /// Evolve every policy parameter.
    Full,
    /// Evolve only the final linear layer; the rest stays frozen.
    FinalLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnesConfig {
    /// Candidates per generation; mirrored sampling needs an even count.
    pub population_size: usize,
    /// Initial per-dimension step size.
    pub sigma_init: f64,
    /// Learning rate on the distribution center.
    #[serde(default = "default_eta_mean")]
    pub eta_mean: f64,
    /// Learning rate on the step sizes; defaults to (3 + ln d) / (5 sqrt d).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_sigma: Option<f64>,
    pub generations: u32,
    /// Episodes averaged per candidate fitness.
    pub fitness_repeats: usize,
    /// Std of the pre-tanh action perturbation during fitness rollouts.
    pub action_noise_sigma: f64,
    /// Overrides the run seed when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_scope")]
    pub scope: EvolutionScope,
}

fn default_eta_mean() -> f64 {
    1.0
}

fn default_scope() -> EvolutionScope {
    EvolutionScope::Full
}

impl SnesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return Err(Error::Config(
                "snes.population_size must be even and at least 2".into(),
            ));
        }
        if !(self.sigma_init > 0.0 && self.sigma_init.is_finite()) {
            return Err(Error::Config("snes.sigma_init must be positive".into()));
        }
        if !(self.eta_mean >= 0.0 && self.eta_mean.is_finite()) {
            return Err(Error::Config("snes.eta_mean must be non-negative".into()));
        }
        if let Some(e) = self.eta_sigma {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Config("snes.eta_sigma must be non-negative".into()));
            }
        }
        if self.fitness_repeats == 0 {
            return Err(Error::Config("snes.fitness_repeats must be positive".into()));
        }
        if !(self.action_noise_sigma >= 0.0 && self.action_noise_sigma.is_finite()) {
            return Err(Error::Config(
                "snes.action_noise_sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn eta_sigma_for(&self, dims: usize) -> f64 {
        self.eta_sigma
            .unwrap_or_else(|| (3.0 + (dims as f64).ln()) / (5.0 * (dims as f64).sqrt()))
    }
}

/// Diagonal Gaussian search distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDistribution {
    pub theta: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SearchDistribution {
    pub fn new(theta: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if theta.len() != sigma.len() {
            return Err(Error::DimMismatch {
                what: "search distribution sigma",
                expected: theta.len(),
                got: sigma.len(),
            });
        }
        let dist = Self { theta, sigma };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.iter().all(|t| t.is_finite()) {
            return Err(Error::Config("search center must be finite".into()));
        }
        if !self.sigma.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::Config(
                "search step sizes must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.theta.len()
    }
}

/// Mirrored sampling: draws come in exact +-z pairs and candidates are
/// theta + sigma . z.
pub fn sample_population(
    dist: &SearchDistribution,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    dist.validate()?;
    if n == 0 || n % 2 != 0 {
        return Err(Error::Config(
            "population size must be even and non-zero".into(),
        ));
    }
    let d = dist.dims();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let plus: Vec<f64> = (0..d).map(|i| dist.theta[i] + dist.sigma[i] * z[i]).collect();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let minus: Vec<f64> = (0..d).map(|i| dist.theta[i] + dist.sigma[i] * neg[i]).collect();
        out.push((plus, z));
        out.push((minus, neg));
    }
    Ok(out)
}

/// Rank utilities, best first: u_k = w_k / sum w - 1/n with
/// w_k = max(0, ln(n/2 + 1) - ln(rank_k)). Tied fitnesses share the mean
/// utility of their rank span; a fully tied population gets exact zeros.
/// Non-finite fitnesses rank strictly worst.
fn rank_utilities(fitnesses: &[f64]) -> Vec<f64> {
    let n = fitnesses.len();
    let keyed: Vec<f64> = fitnesses
        .iter()
        .enumerate()
        .map(|(k, f)| {
            if f.is_finite() {
                *f
            } else {
                log::warn!("candidate {k} fitness {f} is not finite; ranked worst");
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keyed[b].partial_cmp(&keyed[a]).expect("keys are ordered"));

    if keyed.iter().all(|f| *f == keyed[order[0]]) {
        return vec![0.0; n];
    }

    let half_log = (n as f64 / 2.0 + 1.0).ln();
    let raw: Vec<f64> = (0..n)
        .map(|p| (half_log - ((p + 1) as f64).ln()).max(0.0))
        .collect();
    let total: f64 = raw.iter().sum();
    let by_pos: Vec<f64> = raw.iter().map(|w| w / total - 1.0 / n as f64).collect();

    let mut utilities = vec![0.0; n];
    let mut p = 0;
    while p < n {
        let mut q = p;
        while q + 1 < n && keyed[order[q + 1]] == keyed[order[p]] {
            q += 1;
        }
        let mean = by_pos[p..=q].iter().sum::<f64>() / (q - p + 1) as f64;
        for &k in &order[p..=q] {
            utilities[k] = mean;
        }
        p = q + 1;
    }
    utilities
}

/// Natural-gradient step from one generation of mirrored samples. `draws`
/// holds the standard-normal vectors in the order [`sample_population`]
/// produced them (consecutive +-pairs).
pub fn snes_update(
    dist: &SearchDistribution,
    draws: &[Vec<f64>],
    fitnesses: &[f64],
    cfg: &SnesConfig,
) -> Result<SearchDistribution> {
    dist.validate()?;
    let n = draws.len();
    if n != fitnesses.len() || n != cfg.population_size {
        return Err(Error::DimMismatch {
            what: "fitness vector",
            expected: n,
            got: fitnesses.len(),
        });
    }
    if n % 2 != 0 {
        return Err(Error::Config("mirrored samples come in pairs".into()));
    }
    let d = dist.dims();
    for z in draws {
        if z.len() != d {
            return Err(Error::DimMismatch {
                what: "draw dimension",
                expected: d,
                got: z.len(),
            });
        }
    }
    let u = rank_utilities(fitnesses);
    let eta_sigma = cfg.eta_sigma_for(d);

    let mut g_theta = vec![0.0; d];
    let mut g_sigma = vec![0.0; d];
    for j in 0..n / 2 {
        let (k0, k1) = (2 * j, 2 * j + 1);
        let z = &draws[k0]; // draws[k1] is its exact negation
        let du = u[k0] - u[k1];
        let su = u[k0] + u[k1];
        for i in 0..d {
            g_theta[i] += du * z[i];
            g_sigma[i] += su * (z[i] * z[i] - 1.0);
        }
    }

    let theta: Vec<f64> = (0..d)
        .map(|i| dist.theta[i] + cfg.eta_mean * dist.sigma[i] * g_theta[i])
        .collect();
    let sigma: Vec<f64> = (0..d)
        .map(|i| dist.sigma[i] * (eta_sigma / 2.0 * g_sigma[i]).exp())
        .collect();
    SearchDistribution::new(theta, sigma)
}

/// Perturbs a greedy action in pre-tanh space: a = tanh(atanh(a*) + eps),
/// eps ~ N(0, sigma^2). A saturated greedy action is clamped to a pre-tanh
/// magnitude of 10 before perturbing.
pub fn noisy_rollout_action(
    policy: &SquashedGaussianPolicy,
    observation: &[f64],
    action_noise_sigma: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let greedy = policy.act_greedy(observation)?[0];
    if action_noise_sigma == 0.0 {
        return Ok(greedy);
    }
    let mut pre = greedy.atanh();
    if pre.abs() > PRE_TANH_LIMIT {
        log::warn!("greedy action {greedy} saturates tanh; clamping pre-tanh value");
        pre = pre.clamp(-PRE_TANH_LIMIT, PRE_TANH_LIMIT);
    }
    let eps: f64 = rng.sample(StandardNormal);
    Ok((pre + action_noise_sigma * eps).tanh())
}

/// Controller that applies [`noisy_rollout_action`] at every decision.
pub struct NoisyPolicyController {
    pub policy: SquashedGaussianPolicy,
    pub action_noise_sigma: f64,
    pub rng: ChaCha12Rng,
}

impl Controller for NoisyPolicyController {
    fn act(&mut self, observed: &State) -> f64 {
        match noisy_rollout_action(
            &self.policy,
            &observe(observed),
            self.action_noise_sigma,
            &mut self.rng,
        ) {
            Ok(a) => a,
            Err(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct GenerationLogLine {
    kind: &'static str,
    generation: u32,
    best: f64,
    mean: f64,
    worst: f64,
    sigma_mean: f64,
    best_ever: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneResult {
    /// Full policy parameter vector of the best-ever candidate.
    pub params: FlatParams,
    /// Fitness of that candidate; `None` when no generation ran.
    pub best_fitness: Option<f64>,
    /// Fitness of the unmodified starting policy under the same protocol.
    pub baseline_fitness: Option<f64>,
    pub episodes: u64,
    pub generations_run: u32,
}

/// Evolves policy parameters against the episode-level performance score.
/// Candidate fitness is the mean score over `fitness_repeats` noisy
/// rollouts; every episode seed is a pure function of (seed, generation,
/// candidate, repeat), so parallel evaluation is reproducible. A diverged
/// rollout pins the candidate fitness to negative infinity.
#[allow(clippy::too_many_arguments)]
pub fn finetune(
    arch: &MlpArchitecture,
    initial: &FlatParams,
    model: &ModelParams,
    reward: &RewardConfig,
    criteria: &ScoreCriteria,
    cfg: &SnesConfig,
    fallback_seed: u64,
    log: &mut dyn Write,
) -> Result<FinetuneResult> {
    cfg.validate()?;
    model.validate()?;
    reward.validate(model)?;
    criteria.validate(model)?;
    // Fails fast on a checkpoint that is not a policy network.
    SquashedGaussianPolicy::new(arch.clone(), initial.clone())?;

    if cfg.generations == 0 {
        return Ok(FinetuneResult {
            params: initial.clone(),
            best_fitness: None,
            baseline_fitness: None,
            episodes: 0,
            generations_run: 0,
        });
    }

    let seed = cfg.seed.unwrap_or(fallback_seed);
    let (span_start, span_len) = match cfg.scope {
        EvolutionScope::Full => (0, initial.len()),
        EvolutionScope::FinalLayer => arch.final_layer_span(),
    };
    let runner = EpisodeRunner::new(*model, *reward);
    let episodes_done = std::sync::atomic::AtomicU64::new(0);

    let fitness_of = |slice: &[f64], generation: u64, candidate: u64| -> f64 {
        let mut params = initial.clone();
        params.0[span_start..span_start + span_len].copy_from_slice(slice);
        let policy = SquashedGaussianPolicy::new(arch.clone(), params)
            .expect("span replacement preserves the architecture");
        let mut total = 0.0;
        for rep in 0..cfg.fitness_repeats {
            let ep_seed = mix_seed(&[seed, EPISODE_SEED_TAG, generation, candidate, rep as u64]);
            let mut controller = NoisyPolicyController {
                policy: policy.clone(),
                action_noise_sigma: cfg.action_noise_sigma,
                rng: ChaCha12Rng::seed_from_u64(mix_seed(&[ep_seed, NOISE_SEED_TAG])),
            };
            let traj = runner.run(&mut controller, None, ep_seed);
            episodes_done.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            if traj.diverged {
                log::warn!(
                    "generation {generation} candidate {candidate} rollout diverged; \
                     fitness pinned to -inf"
                );
                return f64::NEG_INFINITY;
            }
            total += performance_score(&traj, model, criteria).score;
        }
        total / cfg.fitness_repeats as f64
    };

    let baseline_slice = initial.as_slice()[span_start..span_start + span_len].to_vec();
    let baseline = fitness_of(&baseline_slice, 0, BASELINE_CANDIDATE);

    let mut dist = SearchDistribution::new(
        baseline_slice.clone(),
        vec![cfg.sigma_init; span_len],
    )?;
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(&[seed, GEN_SEED_TAG]));
    let mut best_slice = baseline_slice;
    let mut best_fitness = baseline;

    for generation in 0..cfg.generations {
        let population = sample_population(&dist, cfg.population_size, &mut rng)?;
        let fitnesses: Vec<f64> = population
            .par_iter()
            .enumerate()
            .map(|(k, (candidate, _))| fitness_of(candidate, generation as u64, k as u64))
            .collect();

        for (k, f) in fitnesses.iter().enumerate() {
            if *f > best_fitness {
                best_fitness = *f;
                best_slice = population[k].0.clone();
            }
        }

        let draws: Vec<Vec<f64>> = population.into_iter().map(|(_, z)| z).collect();
        dist = snes_update(&dist, &draws, &fitnesses, cfg)?;

        let finite: Vec<f64> = fitnesses.iter().copied().filter(|f| f.is_finite()).collect();
        let line = GenerationLogLine {
            kind: "generation",
            generation,
            best: fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: if finite.is_empty() {
                f64::NEG_INFINITY
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64
            },
            worst: fitnesses.iter().copied().fold(f64::INFINITY, f64::min),
            sigma_mean: dist.sigma.iter().sum::<f64>() / dist.dims() as f64,
            best_ever: best_fitness,
        };
        writeln!(log, "{}", serde_json::to_string(&line)?)?;
    }

    let mut params = initial.clone();
    params.0[span_start..span_start + span_len].copy_from_slice(&best_slice);
    Ok(FinetuneResult {
        params,
        best_fitness: Some(best_fitness),
        baseline_fitness: Some(baseline),
        episodes: episodes_done.into_inner(),
        generations_run: cfg.generations,
    })
}
