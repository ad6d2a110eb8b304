//! Machine unlearning with forgetting neural networks.
//!
//! The crate trains small image classifiers whose hidden layers are followed
//! by *forget layers*: per-neuron gains `exp(-t / tau)` that stay at 1 while
//! the model learns and decay as an unlearning phase runs. Training alternates
//! learning and unlearning phases, and after every epoch the model is audited
//! with a loss-threshold membership-inference attack that compares the
//! samples to be forgotten against held-out test samples.
//!
//! Modules, bottom-up:
//!
//! * [`tensor`], [`rng`]: numeric carriers and seeded randomness.
//! * [`nn`]: layers, forward/backward passes, SGD, gradient checking.
//! * [`forgetting`]: the decay gain, the decay clock and tau policies.
//! * [`theory`]: executable checks of the forgetting scaling laws.
//! * [`dataset`]: IDX loading and the retain/forget split.
//! * [`mia`]: the membership-inference scorer.
//! * [`engine`]: learning/unlearning schedule, metrics, checkpoints, baseline.

pub mod dataset;
pub mod engine;
mod error;
pub mod forgetting;
pub mod mia;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
pub use forgetting::{ForgetClock, ForgettingPolicy, PolicyKind, TauAssignment};
pub use nn::{Architecture, Network};
pub use rng::Rng;
pub use tensor::Tensor;
