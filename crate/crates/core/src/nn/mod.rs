//! Float kernels and their hand-written backward passes.

mod adam;
mod conv;
mod dense;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, AdamState};
pub use conv::{conv1d_backward, conv1d_pre_activation, conv1d_same, same_padding, ConvKernel};
pub use dense::{dense_backward, dense_forward, DenseLayer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    None,
    Relu,
}

/// Anything owning trainable tensors. The order of the returned slices is
/// the order of the matching [`Gradients`].
pub trait Parameters {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|p| p.len()).sum()
    }
}

/// Per-tensor gradients, aligned with [`Parameters::param_slices`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like<P: Parameters + ?Sized>(params: &P) -> Self {
        Gradients(params.param_slices().iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::Shape(format!(
                "gradient sets have {} and {} tensors",
                self.0.len(),
                other.0.len()
            )));
        }
        for (acc, g) in self.0.iter_mut().zip(&other.0) {
            if acc.len() != g.len() {
                return Err(Error::Shape("gradient tensor length mismatch".into()));
            }
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.0
            .iter_mut()
            .flat_map(|g| g.iter_mut())
            .for_each(|v| *v *= factor);
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flat_map(|g| g.iter().copied())
    }
}

/// Uniform He-style initialization: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn he_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, count: usize) -> Vec<f64> {
    let limit = (6.0 / fan_in.max(1) as f64).sqrt();
    (0..count).map(|_| rng.random_range(-limit..limit)).collect()
}

/// Inverted-dropout mask over a flattened feature vector. Kept units are
/// scaled by `1 / (1 - rate)` so inference needs no rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Vec<f64>);

impl DropoutMask {
    pub fn identity(len: usize) -> Self {
        DropoutMask(vec![1.0; len])
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, len: usize, rate: f64) -> Self {
        if rate <= 0.0 {
            return Self::identity(len);
        }
        let keep = 1.0 / (1.0 - rate);
        DropoutMask(
            (0..len)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// MAE subgradient convention: `sign(0) = 0`.
#[inline]
pub fn mae_sign(residual: f64) -> f64 {
    if residual > 0.0 {
        1.0
    } else if residual < 0.0 {
        -1.0
    } else {
        0.0
    }
}
