//! Recorded episode rollout at the plant rate.

use crate::dynamics::{State, TorquePair};
use crate::{Error, Result};

/// Nominal evaluation episode length (s). At the 500 Hz plant rate a full
/// episode holds 5001 samples including the initial state.
pub const EPISODE_SECONDS: f64 = 10.0;

/// One plant step: the state arrived at, the torque and (post-delay) action
/// that produced it, and the shaped reward collected on arrival. The first
/// sample of a trajectory is the initial state with zero torque, action and
/// reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: State,
    pub tau: TorquePair,
    pub action: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// True when the episode was cut short because the state or the
    /// controller output stopped being finite. Samples are always finite;
    /// a diverged trajectory is simply truncated. The flag lives in
    /// reports, not in the CSV serialization.
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample spacing (s). Meaningful for trajectories with two or more
    /// samples; episode recordings are uniformly spaced by construction.
    pub fn dt(&self) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        self.samples[1].t - self.samples[0].t
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Structural invariants: non-empty, time starts at zero and strictly
    /// increases, every recorded value is finite.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Csv {
                row: 0,
                column: "t".into(),
                message: "trajectory has no samples".into(),
            });
        }
        if self.samples[0].t != 0.0 {
            return Err(Error::Csv {
                row: 2,
                column: "t".into(),
                message: format!("trajectory must start at t = 0, got {}", self.samples[0].t),
            });
        }
        let mut prev_t = f64::NEG_INFINITY;
        for (i, s) in self.samples.iter().enumerate() {
            let row = i + 2; // header is row 1
            if s.t <= prev_t {
                return Err(Error::Csv {
                    row,
                    column: "t".into(),
                    message: format!("time must strictly increase, got {} after {prev_t}", s.t),
                });
            }
            prev_t = s.t;
            let finite = s.t.is_finite()
                && s.state.is_finite()
                && s.tau.tau1.is_finite()
                && s.tau.tau2.is_finite()
                && s.action.is_finite()
                && s.reward.is_finite();
            if !finite {
                return Err(Error::Csv {
                    row,
                    column: "t".into(),
                    message: "non-finite value in trajectory".into(),
                });
            }
        }
        Ok(())
    }
}
