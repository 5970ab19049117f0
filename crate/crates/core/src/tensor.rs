use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `[length, channels]` activation tensor stored row-major, so element
/// `(l, c)` lives at `l * channels + c`. Flattening is therefore free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    len: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(len: usize, channels: usize) -> Self {
        Tensor {
            len,
            channels,
            data: vec![0.0; len * channels],
        }
    }

    pub fn from_vec(len: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != len * channels {
            return Err(Error::Shape(format!(
                "tensor [{len}, {channels}] needs {} values, got {}",
                len * channels,
                data.len()
            )));
        }
        Ok(Tensor { len, channels, data })
    }

    /// Single-channel tensor from a signal, e.g. a prepared CIR window.
    pub fn from_signal(signal: &[f64]) -> Self {
        Tensor {
            len: signal.len(),
            channels: 1,
            data: signal.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.len, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, l: usize, c: usize) -> f64 {
        self.data[l * self.channels + c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise sum of two tensors of identical shape.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor {
            len: self.len,
            channels: self.channels,
            data,
        })
    }

    pub fn relu(&self) -> Tensor {
        Tensor {
            len: self.len,
            channels: self.channels,
            data: self.data.iter().map(|&v| v.max(0.0)).collect(),
        }
    }
}
