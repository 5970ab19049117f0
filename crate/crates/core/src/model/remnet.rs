use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, Regressor};
use crate::error::{Error, Result};
use crate::nn::{
    conv1d_backward, conv1d_pre_activation, dense_backward, dense_forward, Activation, ConvKernel,
    DenseLayer, DropoutMask, Gradients, Parameters,
};
use crate::tensor::Tensor;

/// One residual reduction module:
/// `h = relu(block(x)) + x`, `out = relu(reduce(h)) + shortcut(h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrmWeights {
    pub block: ConvKernel,
    pub reduce: ConvKernel,
    pub shortcut: ConvKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemnetWeights {
    pub config: ModelConfig,
    pub stem: ConvKernel,
    pub modules: Vec<RrmWeights>,
    pub head: DenseLayer,
}

impl RemnetWeights {
    /// Builds a freshly initialized network (He-uniform weights, zero biases).
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = config.filters;
        let stem = ConvKernel::he_init(
            &mut rng,
            config.effective_stem_kernel(),
            1,
            f,
            1,
            Activation::Relu,
            config.stem_has_bias(),
        )?;
        let modules = (0..config.modules)
            .map(|_| {
                Ok(RrmWeights {
                    block: ConvKernel::he_init(
                        &mut rng,
                        config.block_kernel,
                        f,
                        f,
                        1,
                        Activation::Relu,
                        true,
                    )?,
                    reduce: ConvKernel::he_init(
                        &mut rng,
                        config.block_kernel,
                        f,
                        f,
                        2,
                        Activation::Relu,
                        true,
                    )?,
                    shortcut: ConvKernel::he_init(
                        &mut rng,
                        1,
                        f,
                        f,
                        2,
                        Activation::None,
                        config.shortcut_has_bias(),
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let head = DenseLayer::he_init(&mut rng, config.feature_len(), 1);
        Ok(RemnetWeights {
            config,
            stem,
            modules,
            head,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.modules.len() != self.config.modules {
            return Err(Error::Shape(format!(
                "config declares {} modules, weights have {}",
                self.config.modules,
                self.modules.len()
            )));
        }
        self.stem.validate()?;
        if self.stem.in_channels != 1 || self.stem.stride != 1 {
            return Err(Error::Shape("stem must map 1 channel with stride 1".into()));
        }
        let f = self.stem.out_channels;
        for m in &self.modules {
            for (k, stride) in [(&m.block, 1), (&m.reduce, 2), (&m.shortcut, 2)] {
                k.validate()?;
                if k.in_channels != f || k.out_channels != f || k.stride != stride {
                    return Err(Error::Shape("module kernel shape mismatch".into()));
                }
            }
            if m.shortcut.kernel_size != 1 {
                return Err(Error::Shape("shortcut must be a 1x1 convolution".into()));
            }
        }
        self.head.validate()?;
        if self.head.out_dim != 1 || self.head.in_dim != self.config.feature_len() {
            return Err(Error::Shape(format!(
                "head must be {}x1, got {}x{}",
                self.config.feature_len(),
                self.head.in_dim,
                self.head.out_dim
            )));
        }
        Ok(())
    }

    fn input_tensor(&self, x: &[f64]) -> Result<Tensor> {
        if x.len() != self.config.cir_len {
            return Err(Error::Shape(format!(
                "REMNet expects {} CIR samples, got {}",
                self.config.cir_len,
                x.len()
            )));
        }
        Ok(Tensor::from_signal(x))
    }

    /// Feature tensor right before flattening, in inference mode.
    pub fn features(&self, x: &[f64]) -> Result<Tensor> {
        let input = self.input_tensor(x)?;
        let mut t = conv1d_pre_activation(&input, &self.stem)?.relu();
        for m in &self.modules {
            let h = conv1d_pre_activation(&t, &m.block)?.relu().add(&t)?;
            let r = conv1d_pre_activation(&h, &m.reduce)?.relu();
            let s = conv1d_pre_activation(&h, &m.shortcut)?;
            t = r.add(&s)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone)]
struct ModuleTrace {
    input: Tensor,
    block_pre: Tensor,
    hidden: Tensor,
    reduce_pre: Tensor,
}

/// Activations recorded by [`RemnetWeights::forward_train`].
#[derive(Debug, Clone)]
pub struct RemnetTrace {
    input: Tensor,
    stem_pre: Tensor,
    modules: Vec<ModuleTrace>,
    output_shape: (usize, usize),
    dropped: Vec<f64>,
    mask: DropoutMask,
}

fn relu_grad(pre: &Tensor, upstream: &Tensor) -> Tensor {
    let data = pre
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(pre.len(), pre.channels(), data).expect("same shape")
}

fn push_conv_grads(grads: &mut Vec<Vec<f64>>, dw: Vec<f64>, db: Option<Vec<f64>>) {
    grads.push(dw);
    if let Some(db) = db {
        grads.push(db);
    }
}

impl Parameters for RemnetWeights {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        fn push<'a>(k: &'a ConvKernel, out: &mut Vec<&'a [f64]>) {
            out.push(&k.weights);
            if let Some(b) = &k.bias {
                out.push(b);
            }
        }
        push(&self.stem, &mut out);
        for m in &self.modules {
            push(&m.block, &mut out);
            push(&m.reduce, &mut out);
            push(&m.shortcut, &mut out);
        }
        out.push(&self.head.weights);
        out.push(&self.head.bias);
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        fn push<'a>(k: &'a mut ConvKernel, out: &mut Vec<&'a mut [f64]>) {
            out.push(&mut k.weights);
            if let Some(b) = &mut k.bias {
                out.push(b);
            }
        }
        let mut out: Vec<&mut [f64]> = Vec::new();
        push(&mut self.stem, &mut out);
        for m in &mut self.modules {
            push(&mut m.block, &mut out);
            push(&mut m.reduce, &mut out);
            push(&mut m.shortcut, &mut out);
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }
}

impl Regressor for RemnetWeights {
    type Trace = RemnetTrace;

    fn input_len(&self) -> usize {
        self.config.cir_len
    }

    fn dropout_len(&self) -> usize {
        self.config.feature_len()
    }

    fn dropout_rate(&self) -> f64 {
        self.config.dropout_rate
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        let features = self.features(x)?;
        Ok(dense_forward(features.data(), &self.head)?[0])
    }

    fn forward_train(&self, x: &[f64], mask: &DropoutMask) -> Result<(f64, RemnetTrace)> {
        if mask.len() != self.dropout_len() {
            return Err(Error::Shape(format!(
                "dropout mask has {} entries, expected {}",
                mask.len(),
                self.dropout_len()
            )));
        }
        let input = self.input_tensor(x)?;
        let stem_pre = conv1d_pre_activation(&input, &self.stem)?;
        let mut t = stem_pre.relu();
        let mut modules = Vec::with_capacity(self.modules.len());
        for m in &self.modules {
            let block_pre = conv1d_pre_activation(&t, &m.block)?;
            let hidden = block_pre.relu().add(&t)?;
            let reduce_pre = conv1d_pre_activation(&hidden, &m.reduce)?;
            let shortcut = conv1d_pre_activation(&hidden, &m.shortcut)?;
            let out = reduce_pre.relu().add(&shortcut)?;
            modules.push(ModuleTrace {
                input: t,
                block_pre,
                hidden,
                reduce_pre,
            });
            t = out;
        }
        let dropped: Vec<f64> = t.data().iter().zip(&mask.0).map(|(v, m)| v * m).collect();
        let y = dense_forward(&dropped, &self.head)?[0];
        Ok((
            y,
            RemnetTrace {
                input,
                stem_pre,
                modules,
                output_shape: t.shape(),
                dropped,
                mask: mask.clone(),
            },
        ))
    }

    fn backward(&self, trace: &RemnetTrace, dy: f64) -> Result<Gradients> {
        let (d_dropped, head_dw, head_db) = dense_backward(&trace.dropped, &self.head, &[dy])?;
        let d_flat: Vec<f64> = d_dropped.iter().zip(&trace.mask.0).map(|(g, m)| g * m).collect();
        let (len, ch) = trace.output_shape;
        let mut grad = Tensor::from_vec(len, ch, d_flat)?;

        let mut module_grads: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.modules.len());
        for (m, mt) in self.modules.iter().zip(&trace.modules).rev() {
            let mut g = Vec::new();
            // out = relu(reduce(h)) + shortcut(h)
            let d_reduce_pre = relu_grad(&mt.reduce_pre, &grad);
            let (dh_reduce, dw_r, db_r) = conv1d_backward(&mt.hidden, &m.reduce, &d_reduce_pre)?;
            let (dh_short, dw_s, db_s) = conv1d_backward(&mt.hidden, &m.shortcut, &grad)?;
            let dh = dh_reduce.add(&dh_short)?;
            // h = relu(block(x)) + x
            let d_block_pre = relu_grad(&mt.block_pre, &dh);
            let (dx_block, dw_b, db_b) = conv1d_backward(&mt.input, &m.block, &d_block_pre)?;
            grad = dx_block.add(&dh)?;

            push_conv_grads(&mut g, dw_b, db_b);
            push_conv_grads(&mut g, dw_r, db_r);
            push_conv_grads(&mut g, dw_s, db_s);
            module_grads.push(g);
        }

        let d_stem_pre = relu_grad(&trace.stem_pre, &grad);
        let (_, dw_stem, db_stem) = conv1d_backward(&trace.input, &self.stem, &d_stem_pre)?;

        let mut grads = Vec::new();
        push_conv_grads(&mut grads, dw_stem, db_stem);
        for g in module_grads.into_iter().rev() {
            grads.extend(g);
        }
        grads.push(head_dw);
        grads.push(head_db);
        Ok(Gradients(grads))
    }
}
