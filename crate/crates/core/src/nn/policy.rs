//! Observation featurization and the squashed-Gaussian policy network.

use rand::Rng;

use super::gaussian::{GaussianHead, SquashedSample};
use super::mlp::{self, FlatParams, MlpArchitecture};
use crate::dynamics::State;
use crate::{Error, Result};

/// Observation layout: (cos t1, sin t1, cos t2, sin t2, w1/20, w2/20).
pub const OBS_DIM: usize = 6;
/// Velocity feature scale (rad/s mapped to roughly unit range).
pub const OMEGA_SCALE: f64 = 20.0;

/// Trig featurization of the joint state. The angle wrap-around disappears
/// and velocities are brought to a comparable scale.
pub fn observe(s: &State) -> [f64; OBS_DIM] {
    [
        s.theta1.cos(),
        s.theta1.sin(),
        s.theta2.cos(),
        s.theta2.sin(),
        s.omega1 / OMEGA_SCALE,
        s.omega2 / OMEGA_SCALE,
    ]
}

/// Policy network emitting [mean..., log_std...] for a squashed Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedGaussianPolicy {
    pub arch: MlpArchitecture,
    pub params: FlatParams,
}

impl SquashedGaussianPolicy {
    pub fn new(arch: MlpArchitecture, params: FlatParams) -> Result<Self> {
        arch.validate()?;
        if arch.output_dim() % 2 != 0 {
            return Err(Error::ArchitectureMismatch(format!(
                "policy output must hold mean and log-std pairs, got width {}",
                arch.output_dim()
            )));
        }
        if params.len() != arch.param_count() {
            return Err(Error::DimMismatch {
                what: "policy parameters",
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { arch, params })
    }

    pub fn action_dim(&self) -> usize {
        self.arch.output_dim() / 2
    }

    /// Distribution head at one observation (scalar forward path).
    pub fn head(&self, obs: &[f64]) -> Result<GaussianHead> {
        let out = mlp::forward(&self.arch, &self.params, obs)?;
        let k = out.len() / 2;
        Ok(GaussianHead::from_raw(out[..k].to_vec(), &out[k..]))
    }

    /// Deterministic action: tanh of the head mean.
    pub fn act_greedy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.head(obs)?.mean_action())
    }

    /// Stochastic reparameterized action draw.
    pub fn sample_action(&self, obs: &[f64], rng: &mut impl Rng) -> Result<SquashedSample> {
        Ok(self.head(obs)?.sample(rng))
    }
}
