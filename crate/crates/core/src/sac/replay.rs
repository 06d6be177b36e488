//! Uniform ring-buffer replay.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::nn::OBS_DIM;
use crate::{Error, Result};

/// One decision-level transition. Observations are stored featurized; the
/// action is the normalized scalar command. `done` marks absorbing ends
/// only, not time truncation, so stored episodes keep bootstrapping across
/// the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: [f64; OBS_DIM],
    pub action: f64,
    pub reward: f64,
    pub next_obs: [f64; OBS_DIM],
    pub done: bool,
}

/// Fixed-capacity buffer; once full, new transitions overwrite the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            data: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniform sample with replacement, packed into batch arrays.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<TransitionBatch> {
        if self.len() < n {
            return Err(Error::InsufficientBuffer {
                have: self.len(),
                need: n,
            });
        }
        let mut batch = TransitionBatch::zeros(n);
        for i in 0..n {
            let t = &self.data[rng.random_range(0..self.len())];
            for j in 0..OBS_DIM {
                batch.obs[[i, j]] = t.obs[j];
                batch.next_obs[[i, j]] = t.next_obs[j];
            }
            batch.action[i] = t.action;
            batch.reward[i] = t.reward;
            batch.done[i] = if t.done { 1.0 } else { 0.0 };
        }
        Ok(batch)
    }
}

/// Column-packed minibatch.
#[derive(Debug, Clone)]
pub struct TransitionBatch {
    pub obs: Array2<f64>,
    pub action: Array1<f64>,
    pub reward: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Array1<f64>,
}

impl TransitionBatch {
    pub fn zeros(n: usize) -> Self {
        Self {
            obs: Array2::zeros((n, OBS_DIM)),
            action: Array1::zeros(n),
            reward: Array1::zeros(n),
            next_obs: Array2::zeros((n, OBS_DIM)),
            done: Array1::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.action.len()
    }

    pub fn is_empty(&self) -> bool {
        self.action.is_empty()
    }
}
