use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{he_uniform, Activation};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 1D convolution with "same" zero padding.
///
/// Weights are laid out `[tap][in_channel][out_channel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvKernel {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl ConvKernel {
    pub fn zeros(
        kernel_size: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        activation: Activation,
        with_bias: bool,
    ) -> Result<Self> {
        let kernel = ConvKernel {
            kernel_size,
            in_channels,
            out_channels,
            stride,
            activation,
            weights: vec![0.0; kernel_size * in_channels * out_channels],
            bias: with_bias.then(|| vec![0.0; out_channels]),
        };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn he_init<R: Rng + ?Sized>(
        rng: &mut R,
        kernel_size: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        activation: Activation,
        with_bias: bool,
    ) -> Result<Self> {
        let mut kernel = Self::zeros(
            kernel_size,
            in_channels,
            out_channels,
            stride,
            activation,
            with_bias,
        )?;
        kernel.weights = he_uniform(rng, kernel_size * in_channels, kernel.weights.len());
        Ok(kernel)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 {
            return Err(Error::Config("kernel size must be >= 1".into()));
        }
        if !(1..=2).contains(&self.stride) {
            return Err(Error::Config(format!(
                "stride must be 1 or 2, got {}",
                self.stride
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("channel counts must be >= 1".into()));
        }
        let expected = self.kernel_size * self.in_channels * self.out_channels;
        if self.weights.len() != expected {
            return Err(Error::Shape(format!(
                "conv weights: expected {expected}, got {}",
                self.weights.len()
            )));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_channels {
                return Err(Error::Shape(format!(
                    "conv bias: expected {}, got {}",
                    self.out_channels,
                    b.len()
                )));
            }
        }
        Ok(())
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        input_len.div_ceil(self.stride)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

/// Left and right zero padding for "same" output length `ceil(len / stride)`.
/// An odd total puts the extra element on the right.
pub fn same_padding(len: usize, kernel_size: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let needed = ((out.saturating_sub(1)) * stride + kernel_size).saturating_sub(len);
    let left = needed / 2;
    (left, needed - left)
}

fn check_input(x: &Tensor, kernel: &ConvKernel) -> Result<()> {
    if x.channels() != kernel.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            kernel.in_channels,
            x.channels()
        )));
    }
    if x.is_empty() {
        return Err(Error::Shape("conv input is empty".into()));
    }
    Ok(())
}

/// Convolution output before the activation.
pub fn conv1d_pre_activation(x: &Tensor, kernel: &ConvKernel) -> Result<Tensor> {
    check_input(x, kernel)?;
    let (len, cin, cout) = (x.len(), kernel.in_channels, kernel.out_channels);
    let out_len = kernel.output_len(len);
    let (pad_left, _) = same_padding(len, kernel.kernel_size, kernel.stride);
    let xd = x.data();
    let mut out = vec![0.0; out_len * cout];

    for o in 0..out_len {
        let row = &mut out[o * cout..(o + 1) * cout];
        if let Some(b) = &kernel.bias {
            row.copy_from_slice(b);
        }
        for tap in 0..kernel.kernel_size {
            let pos = (o * kernel.stride + tap) as isize - pad_left as isize;
            if pos < 0 || pos as usize >= len {
                continue;
            }
            let pos = pos as usize;
            let xs = &xd[pos * cin..(pos + 1) * cin];
            let ws = kernel.weights[tap * cin * cout..(tap + 1) * cin * cout].chunks_exact(cout);
            for (&xv, w) in xs.iter().zip(ws) {
                for (acc, &wv) in row.iter_mut().zip(w) {
                    *acc += xv * wv;
                }
            }
        }
    }
    Tensor::from_vec(out_len, cout, out)
}

/// Forward convolution including the kernel's activation.
pub fn conv1d_same(x: &Tensor, kernel: &ConvKernel) -> Result<Tensor> {
    let z = conv1d_pre_activation(x, kernel)?;
    Ok(match kernel.activation {
        Activation::None => z,
        Activation::Relu => z.relu(),
    })
}

/// Gradients of a convolution given `grad_pre`, the loss gradient with
/// respect to the pre-activation output. Returns `(dx, dweights, dbias)`.
pub fn conv1d_backward(
    x: &Tensor,
    kernel: &ConvKernel,
    grad_pre: &Tensor,
) -> Result<(Tensor, Vec<f64>, Option<Vec<f64>>)> {
    check_input(x, kernel)?;
    let (len, cin, cout) = (x.len(), kernel.in_channels, kernel.out_channels);
    let out_len = kernel.output_len(len);
    if grad_pre.shape() != (out_len, cout) {
        return Err(Error::Shape(format!(
            "conv gradient shape {:?}, expected {:?}",
            grad_pre.shape(),
            (out_len, cout)
        )));
    }
    let (pad_left, _) = same_padding(len, kernel.kernel_size, kernel.stride);
    let xd = x.data();
    let gd = grad_pre.data();
    let mut dx = vec![0.0; len * cin];
    let mut dw = vec![0.0; kernel.weights.len()];
    let mut db = kernel.bias.as_ref().map(|_| vec![0.0; cout]);

    // Weights as [tap][out][in] so the input-gradient update runs along a
    // contiguous axis instead of reducing across one.
    let k = kernel.kernel_size;
    let mut wt = vec![0.0; kernel.weights.len()];
    for tap in 0..k {
        for i in 0..cin {
            for c in 0..cout {
                wt[(tap * cout + c) * cin + i] = kernel.weights[(tap * cin + i) * cout + c];
            }
        }
    }

    for o in 0..out_len {
        let g = &gd[o * cout..(o + 1) * cout];
        if let Some(db) = db.as_mut() {
            db.iter_mut().zip(g).for_each(|(d, v)| *d += v);
        }
        for tap in 0..k {
            let pos = (o * kernel.stride + tap) as isize - pad_left as isize;
            if pos < 0 || pos as usize >= len {
                continue;
            }
            let pos = pos as usize;
            let xs = &xd[pos * cin..(pos + 1) * cin];
            let span = tap * cin * cout..(tap + 1) * cin * cout;
            for (&xv, dwr) in xs.iter().zip(dw[span.clone()].chunks_exact_mut(cout)) {
                for (dwv, &gv) in dwr.iter_mut().zip(g) {
                    *dwv += xv * gv;
                }
            }
            let dxs = &mut dx[pos * cin..(pos + 1) * cin];
            for (&gv, wrow) in g.iter().zip(wt[span].chunks_exact(cin)) {
                for (d, &wv) in dxs.iter_mut().zip(wrow) {
                    *d += wv * gv;
                }
            }
        }
    }
    Ok((Tensor::from_vec(len, cin, dx)?, dw, db))
}
