//! Success detection and the weighted performance score.

use serde::{Deserialize, Serialize};

use crate::dynamics::{end_effector_height, ModelParams};
use crate::{Error, Result};

use super::trajectory::Trajectory;

/// Success means the end effector stays strictly above the height
/// threshold through the final window of the episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessCriterion {
    /// Height threshold above the pivot (m).
    pub height_threshold: f64,
    /// Final stretch that must stay above the threshold (s).
    pub window_seconds: f64,
}

/// One value per scored metric; used for both weights and normalizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSet {
    /// Swing-up time (s).
    pub time: f64,
    /// Integrated |torque| (N m s).
    pub torque: f64,
    /// Integrated |torque * velocity| (J).
    pub energy: f64,
    /// Peak |torque| (N m).
    pub peak_torque: f64,
    /// Peak |velocity| (rad/s).
    pub peak_velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreCriteria {
    pub success: SuccessCriterion,
    pub weights: MetricSet,
    pub normalizers: MetricSet,
}

impl ScoreCriteria {
    /// Repo defaults: swing-up speed dominates, effort metrics share the
    /// rest. Normalizers map "uses the whole budget" onto penalty 1.
    pub fn defaults_for(y_th: f64) -> Self {
        Self {
            success: SuccessCriterion {
                height_threshold: y_th,
                window_seconds: 2.0,
            },
            weights: MetricSet {
                time: 0.4,
                torque: 0.2,
                energy: 0.2,
                peak_torque: 0.1,
                peak_velocity: 0.1,
            },
            normalizers: MetricSet {
                time: 10.0,
                torque: 30.0,
                energy: 60.0,
                peak_torque: 6.0,
                peak_velocity: 20.0,
            },
        }
    }

    pub fn validate(&self, model: &ModelParams) -> Result<()> {
        let reach = model.l1 + model.l2;
        if !self.success.height_threshold.is_finite()
            || self.success.height_threshold.abs() >= reach
        {
            return Err(Error::Config(format!(
                "scoring.success.height_threshold must lie inside (-{reach}, {reach})"
            )));
        }
        if !(self.success.window_seconds > 0.0) {
            return Err(Error::Config(
                "scoring.success.window_seconds must be positive".into(),
            ));
        }
        for (name, v) in [
            ("time", self.weights.time),
            ("torque", self.weights.torque),
            ("energy", self.weights.energy),
            ("peak_torque", self.weights.peak_torque),
            ("peak_velocity", self.weights.peak_velocity),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "scoring.weights.{name} must be a finite non-negative number"
                )));
            }
        }
        for (name, v) in [
            ("time", self.normalizers.time),
            ("torque", self.normalizers.torque),
            ("energy", self.normalizers.energy),
            ("peak_torque", self.normalizers.peak_torque),
            ("peak_velocity", self.normalizers.peak_velocity),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "scoring.normalizers.{name} must be a finite positive number"
                )));
            }
        }
        Ok(())
    }
}

/// Earliest time after which the end effector never drops back to or below
/// the threshold; None when the trajectory ends at or below it.
pub fn swingup_time(traj: &Trajectory, model: &ModelParams, y_th: f64) -> Option<f64> {
    let above: Vec<bool> = traj
        .samples
        .iter()
        .map(|s| end_effector_height(&s.state, model) > y_th)
        .collect();
    if !*above.last()? {
        return None;
    }
    let first_held = match above.iter().rposition(|&a| !a) {
        Some(last_below) => last_below + 1,
        None => 0,
    };
    Some(traj.samples[first_held].t)
}

/// True when the final window stays strictly above the threshold and the
/// trajectory ran to completion.
pub fn success(traj: &Trajectory, model: &ModelParams, criterion: &SuccessCriterion) -> bool {
    if traj.diverged || traj.len() < 2 {
        return false;
    }
    let window_steps = (criterion.window_seconds / traj.dt()).round() as usize;
    if traj.len() <= window_steps {
        return false;
    }
    traj.samples[traj.len() - 1 - window_steps..]
        .iter()
        .all(|s| end_effector_height(&s.state, model) > criterion.height_threshold)
}

/// Everything that went into a performance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub success: bool,
    pub diverged: bool,
    pub swingup_time: Option<f64>,
    pub metrics: Option<MetricSet>,
    /// Per-metric terms w * min(1, metric / normalizer).
    pub penalties: Option<MetricSet>,
    pub score: f64,
}

fn measured(traj: &Trajectory, model: &ModelParams, y_th: f64) -> MetricSet {
    let dt = traj.dt();
    let mut torque = 0.0;
    let mut energy = 0.0;
    let mut peak_torque: f64 = 0.0;
    let mut peak_velocity: f64 = 0.0;
    for s in &traj.samples[1..] {
        torque += (s.tau.tau1.abs() + s.tau.tau2.abs()) * dt;
        energy +=
            ((s.tau.tau1 * s.state.omega1).abs() + (s.tau.tau2 * s.state.omega2).abs()) * dt;
        peak_torque = peak_torque.max(s.tau.tau1.abs()).max(s.tau.tau2.abs());
        peak_velocity = peak_velocity
            .max(s.state.omega1.abs())
            .max(s.state.omega2.abs());
    }
    MetricSet {
        time: swingup_time(traj, model, y_th).unwrap_or(f64::INFINITY),
        torque,
        energy,
        peak_torque,
        peak_velocity,
    }
}

/// Weighted performance score in [0, 1]. A failed or diverged episode
/// scores 0; otherwise each metric charges w * min(1, metric / normalizer)
/// against a starting score of 1.
pub fn performance_score(
    traj: &Trajectory,
    model: &ModelParams,
    criteria: &ScoreCriteria,
) -> ScoreBreakdown {
    let ok = success(traj, model, &criteria.success);
    if !ok {
        return ScoreBreakdown {
            success: false,
            diverged: traj.diverged,
            swingup_time: swingup_time(traj, model, criteria.success.height_threshold),
            metrics: None,
            penalties: None,
            score: 0.0,
        };
    }
    let m = measured(traj, model, criteria.success.height_threshold);
    let pen = |metric: f64, norm: f64, w: f64| w * (metric / norm).min(1.0);
    let penalties = MetricSet {
        time: pen(m.time, criteria.normalizers.time, criteria.weights.time),
        torque: pen(m.torque, criteria.normalizers.torque, criteria.weights.torque),
        energy: pen(m.energy, criteria.normalizers.energy, criteria.weights.energy),
        peak_torque: pen(
            m.peak_torque,
            criteria.normalizers.peak_torque,
            criteria.weights.peak_torque,
        ),
        peak_velocity: pen(
            m.peak_velocity,
            criteria.normalizers.peak_velocity,
            criteria.weights.peak_velocity,
        ),
    };
    let total = penalties.time
        + penalties.torque
        + penalties.energy
        + penalties.peak_torque
        + penalties.peak_velocity;
    ScoreBreakdown {
        success: true,
        diverged: false,
        swingup_time: Some(m.time),
        metrics: Some(m),
        penalties: Some(penalties),
        score: (1.0 - total).clamp(0.0, 1.0),
    }
}

/// Top-level evaluation document. `average` exists only when robustness
/// was measured and is the arithmetic mean of the two scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub performance: f64,
    pub breakdown: ScoreBreakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<super::robustness::RobustnessReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<f64>,
}

impl ScoreReport {
    pub fn new(
        breakdown: ScoreBreakdown,
        robustness: Option<super::robustness::RobustnessReport>,
    ) -> Self {
        let performance = breakdown.score;
        let average = robustness.as_ref().map(|r| (performance + r.score) / 2.0);
        Self {
            performance,
            breakdown,
            robustness,
            average,
        }
    }
}
