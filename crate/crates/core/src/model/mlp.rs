use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Regressor;
use crate::error::{Error, Result};
use crate::nn::{dense_backward, dense_forward, DenseLayer, DropoutMask, Gradients, Parameters};

/// Hidden widths of the baseline MLP. With 157 inputs this totals exactly
/// 54,401 parameters.
pub const REFERENCE_MLP_HIDDEN: [usize; 3] = [240, 64, 16];

/// Fully connected ReLU network with a scalar output. Dropout sits in
/// front of the output layer, mirroring the REMNet head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub layers: Vec<DenseLayer>,
}

pub fn mlp_param_count(input_dim: usize, hidden: &[usize]) -> usize {
    let mut prev = input_dim;
    let mut total = 0;
    for &h in hidden.iter().chain(std::iter::once(&1)) {
        total += prev * h + h;
        prev = h;
    }
    total
}

impl MlpWeights {
    pub fn build(input_dim: usize, hidden: &[usize], dropout_rate: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::Config("MLP layer widths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {dropout_rate} outside [0, 1)"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prev = input_dim;
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        for &h in hidden.iter().chain(std::iter::once(&1)) {
            layers.push(DenseLayer::he_init(&mut rng, prev, h));
            prev = h;
        }
        Ok(MlpWeights {
            input_dim,
            hidden: hidden.to_vec(),
            dropout_rate,
            layers,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.hidden.len() + 1 {
            return Err(Error::Shape("MLP layer count does not match hidden spec".into()));
        }
        let mut prev = self.input_dim;
        for (layer, &h) in self
            .layers
            .iter()
            .zip(self.hidden.iter().chain(std::iter::once(&1)))
        {
            layer.validate()?;
            if layer.in_dim != prev || layer.out_dim != h {
                return Err(Error::Shape("MLP layer widths do not chain".into()));
            }
            prev = h;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "MLP expects {} inputs, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input to every layer; entry `i` feeds `layers[i]` (the last one is
    /// already masked by dropout).
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    mask: DropoutMask,
}

impl Parameters for MlpWeights {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl Regressor for MlpWeights {
    type Trace = MlpTrace;

    fn input_len(&self) -> usize {
        self.input_dim
    }

    fn dropout_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.in_dim)
    }

    fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        let (last, hidden) = self.layers.split_last().expect("at least one layer");
        for layer in hidden {
            a = dense_forward(&a, layer)?
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
        }
        Ok(dense_forward(&a, last)?[0])
    }

    fn forward_train(&self, x: &[f64], mask: &DropoutMask) -> Result<(f64, MlpTrace)> {
        self.check_input(x)?;
        if mask.len() != self.dropout_len() {
            return Err(Error::Shape("dropout mask length mismatch".into()));
        }
        let (last, hidden) = self.layers.split_last().expect("at least one layer");
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden.len());
        let mut a = x.to_vec();
        for layer in hidden {
            let z = dense_forward(&a, layer)?;
            layer_inputs.push(a);
            a = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
        }
        let dropped: Vec<f64> = a.iter().zip(&mask.0).map(|(v, m)| v * m).collect();
        let y = dense_forward(&dropped, last)?[0];
        layer_inputs.push(dropped);
        Ok((
            y,
            MlpTrace {
                layer_inputs,
                pre,
                mask: mask.clone(),
            },
        ))
    }

    fn backward(&self, trace: &MlpTrace, dy: f64) -> Result<Gradients> {
        let n = self.layers.len();
        let mut grads = vec![Vec::new(); 2 * n];
        let (mut da, dw, db) = dense_backward(&trace.layer_inputs[n - 1], &self.layers[n - 1], &[dy])?;
        grads[2 * (n - 1)] = dw;
        grads[2 * (n - 1) + 1] = db;
        da.iter_mut().zip(&trace.mask.0).for_each(|(g, m)| *g *= m);
        for i in (0..n - 1).rev() {
            let dz: Vec<f64> = da
                .iter()
                .zip(&trace.pre[i])
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect();
            let (dx, dw, db) = dense_backward(&trace.layer_inputs[i], &self.layers[i], &dz)?;
            grads[2 * i] = dw;
            grads[2 * i + 1] = db;
            da = dx;
        }
        Ok(Gradients(grads))
    }
}
