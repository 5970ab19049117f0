//! UWB range-error mitigation toolkit.
//!
//! Trains a compact residual 1D CNN (REMNet without self-attention) on
//! channel impulse response (CIR) windows, optimizes and quantizes it to
//! int8, and runs it with integer-only arithmetic suitable for
//! microcontrollers. The crate also carries the deployment side: a binary
//! model image, embedded-source emission, static memory planning and
//! latency/energy accounting.

pub mod dataset;
pub mod deploy;
pub mod engine;
pub mod error;
pub mod model;
pub mod nn;
pub mod quant;
pub mod tensor;
pub mod train;

pub use dataset::{CirSample, Environment, NormMode};
pub use engine::Engine;
pub use error::{Error, Result};
pub use model::{mitigate, MlpWeights, ModelConfig, Regressor, RemnetWeights, SavedModel};
pub use quant::{FixedPointMultiplier, QuantParams, QuantizedModel};
pub use tensor::Tensor;
pub use train::{Metrics, TrainConfig};
