use rand::Rng;
use serde::{Deserialize, Serialize};

use super::he_uniform;
use crate::error::{Error, Result};

/// Fully connected layer, weights laid out `[in][out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn he_init<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: he_uniform(rng, in_dim, in_dim * out_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::Shape(format!(
                "dense {}x{} has {} weights and {} biases",
                self.in_dim,
                self.out_dim,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// `y = Wᵀx + b`.
pub fn dense_forward(x: &[f64], layer: &DenseLayer) -> Result<Vec<f64>> {
    if x.len() != layer.in_dim {
        return Err(Error::Shape(format!(
            "dense expects {} inputs, got {}",
            layer.in_dim,
            x.len()
        )));
    }
    let mut y = layer.bias.clone();
    for (i, &xv) in x.iter().enumerate() {
        let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
        y.iter_mut().zip(row).for_each(|(acc, &w)| *acc += xv * w);
    }
    Ok(y)
}

/// Returns `(dx, dweights, dbias)` for upstream gradient `dy`.
pub fn dense_backward(x: &[f64], layer: &DenseLayer, dy: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if x.len() != layer.in_dim || dy.len() != layer.out_dim {
        return Err(Error::Shape(format!(
            "dense backward: x {} (want {}), dy {} (want {})",
            x.len(),
            layer.in_dim,
            dy.len(),
            layer.out_dim
        )));
    }
    let mut dx = vec![0.0; layer.in_dim];
    let mut dw = vec![0.0; layer.weights.len()];
    for (i, &xv) in x.iter().enumerate() {
        let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
        let drow = &mut dw[i * layer.out_dim..(i + 1) * layer.out_dim];
        let mut acc = 0.0;
        for o in 0..layer.out_dim {
            drow[o] = xv * dy[o];
            acc += row[o] * dy[o];
        }
        dx[i] = acc;
    }
    Ok((dx, dw, dy.to_vec()))
}
