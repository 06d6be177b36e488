//! Soft actor-critic on the surrogate reward: twin critics with polyak
//! targets, a squashed-Gaussian actor updated by the reparameterization
//! trick, and optional automatic temperature tuning. Control runs slower
//! than the plant; each decision is held over a fixed number of plant
//! substeps.

mod replay;
mod trainer;

pub use replay::{ReplayBuffer, Transition, TransitionBatch};
pub use trainer::{
    critic_targets, polyak_update, train, update_step, EntAlphaMode, EvalRecord, LossReport,
    SacConfig, SacState, TrainResult,
};
