//! Minimal feed-forward networks with hand-written backprop over a flat
//! parameter vector, plus the squashed-Gaussian policy head and checkpoint
//! serialization. Two forward paths exist on purpose: a scalar path with a
//! fixed summation order for anything that must be reproducible sample by
//! sample (rollouts, golden files), and an ndarray path for batched
//! training where throughput matters.

pub mod adam;
pub mod batch;
pub mod checkpoint;
pub mod gaussian;
pub mod mlp;
pub mod policy;

pub use adam::Adam;
pub use batch::{BatchCache, MlpMatrices};
pub use checkpoint::{Checkpoint, NetworkEntry, CHECKPOINT_MAGIC};
pub use gaussian::{GaussianHead, SquashedSample, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};
pub use mlp::{Activation, FlatParams, MlpArchitecture};
pub use policy::{observe, SquashedGaussianPolicy, OBS_DIM, OMEGA_SCALE};
