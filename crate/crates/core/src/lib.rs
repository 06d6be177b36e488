//! Swing-up laboratory for the underactuated double pendulum.
//!
//! The crate covers the full experiment pipeline: rigid-body plant dynamics,
//! the shaped swing-up reward, soft actor-critic training, separable
//! natural-evolution-strategy fine-tuning, and competition-style performance
//! and robustness scoring.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod nn;
pub mod pipeline;
pub mod plot;
pub mod reward;
pub mod sac;
pub mod scoring;
pub mod snes;
pub mod util;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
