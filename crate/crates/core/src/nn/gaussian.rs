//! Diagonal Gaussian with tanh squashing. Actions live in (-1, 1)^k; the
//! log-density carries the tanh change-of-variables correction with a small
//! epsilon guard against log(0) at the saturation boundary.

use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside log(1 - tanh(u)^2 + eps).
pub const SQUASH_EPS: f64 = 1e-6;

/// Head parameters after the log-std clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

/// One squashed draw together with its log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample {
    pub pre_tanh: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

impl GaussianHead {
    /// Builds a head from raw network outputs, clamping log-std into
    /// [LOG_STD_MIN, LOG_STD_MAX].
    pub fn from_raw(mean: Vec<f64>, raw_log_std: &[f64]) -> Self {
        assert_eq!(mean.len(), raw_log_std.len(), "head dimensions");
        let log_std = raw_log_std
            .iter()
            .map(|&v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect();
        Self { mean, log_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Deterministic (greedy) action: tanh of the mean.
    pub fn mean_action(&self) -> Vec<f64> {
        self.mean.iter().map(|&m| m.tanh()).collect()
    }

    /// Reparameterized draw u = mean + std * z, action = tanh(u).
    pub fn sample(&self, rng: &mut impl Rng) -> SquashedSample {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with_noise(&z)
    }

    /// Same as [`GaussianHead::sample`] with the standard-normal draw given
    /// explicitly (training keeps z around for the gradient).
    pub fn sample_with_noise(&self, z: &[f64]) -> SquashedSample {
        assert_eq!(z.len(), self.dim(), "noise dimension");
        let pre_tanh: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(z)
            .map(|((m, ls), zi)| m + ls.exp() * zi)
            .collect();
        let action: Vec<f64> = pre_tanh.iter().map(|u| u.tanh()).collect();
        let log_prob = self.log_prob_pre_tanh(&pre_tanh);
        SquashedSample {
            pre_tanh,
            action,
            log_prob,
        }
    }

    /// Log-density of the squashed action identified by its pre-tanh value:
    /// Gaussian log-density of u minus sum(log(1 - tanh(u)^2 + eps)).
    pub fn log_prob_pre_tanh(&self, pre_tanh: &[f64]) -> f64 {
        assert_eq!(pre_tanh.len(), self.dim(), "pre-tanh dimension");
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut lp = 0.0;
        for i in 0..self.dim() {
            let std = self.log_std[i].exp();
            let z = (pre_tanh[i] - self.mean[i]) / std;
            let t = pre_tanh[i].tanh();
            lp += -self.log_std[i] - 0.5 * ln_2pi - 0.5 * z * z - (1.0 - t * t + SQUASH_EPS).ln();
        }
        lp
    }
}
