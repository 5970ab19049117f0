use serde::{Deserialize, Serialize};

use super::calibrate::TensorRange;
use super::fixed_point::FixedPointMultiplier;
use super::graph::{Architecture, FloatGraph, FloatOp, Shape, TensorId};
use super::kernels::{self, AddArgs, ConvGeometry, LinearArgs, ADD_FRACTION_BITS};
use super::params::{choose_qparams, dequantize, quantize_slice, QuantParams};
use crate::error::{Error, Result};
use crate::nn::Activation;

/// Upper bound for real multipliers. Conv and dense layers widen their
/// output range to stay below it; adds take headroom bits instead.
const MULTIPLIER_LIMIT: f64 = 1.0 - 1.0 / 65536.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QTensor {
    pub shape: Shape,
    pub qparams: QuantParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QConv {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub relu: bool,
    /// `[tap][in][out]`, symmetric (zero point 0).
    pub weights: Vec<i8>,
    pub weight_scale: f32,
    /// Scale `S_in * S_w`, zero point 0.
    pub bias: Option<Vec<i32>>,
    pub multiplier: FixedPointMultiplier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QDense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub relu: bool,
    /// `[in][out]`, symmetric (zero point 0).
    pub weights: Vec<i8>,
    pub weight_scale: f32,
    pub bias: Vec<i32>,
    pub multiplier: FixedPointMultiplier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAdd {
    pub relu: bool,
    /// `S_a / (S_out * 2^headroom)`.
    pub multiplier_a: FixedPointMultiplier,
    /// `S_b / (S_out * 2^headroom)`.
    pub multiplier_b: FixedPointMultiplier,
    /// See [`kernels::AddArgs::headroom`].
    pub headroom: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QOp {
    Conv(QConv),
    Dense(QDense),
    Add(QAdd),
}

impl QOp {
    pub fn name(&self) -> &'static str {
        match self {
            QOp::Conv(_) => "conv",
            QOp::Dense(_) => "dense",
            QOp::Add(_) => "add",
        }
    }

    pub fn arity(&self) -> usize {
        if matches!(self, QOp::Add(_)) {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNode {
    pub op: QOp,
    pub inputs: Vec<TensorId>,
    pub output: TensorId,
}

/// Integer-only network. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    pub architecture: Architecture,
    pub tensors: Vec<QTensor>,
    pub nodes: Vec<QNode>,
    pub input: TensorId,
    pub output: TensorId,
}

/// Non-fatal findings of [`quantize_model`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantizeReport {
    pub warnings: Vec<String>,
    pub widened_outputs: usize,
}

fn linear_multiplier(s_in: f32, s_w: f32, s_out: f32) -> f64 {
    s_in as f64 * s_w as f64 / s_out as f64
}

fn check_multiplier(stored: FixedPointMultiplier, real: f64, what: &str) -> Result<()> {
    let expected = FixedPointMultiplier::from_real(real)
        .map_err(|_| Error::Quant(format!("{what}: real multiplier {real} not in (0, 1)")))?;
    if expected != stored {
        return Err(Error::Quant(format!(
            "{what}: multiplier {stored:?} does not match tensor scales ({real})"
        )));
    }
    Ok(())
}

/// Worst-case accumulator magnitude: every `|q - Z_in| <= 255`.
fn check_accumulator(weights: &[i8], terms: usize, bias: Option<&[i32]>, what: &str) -> Result<()> {
    let wmax = weights.iter().map(|w| (*w as i64).abs()).max().unwrap_or(0);
    let bmax = bias
        .and_then(|b| b.iter().map(|v| (*v as i64).abs()).max())
        .unwrap_or(0);
    let bound = wmax * 255 * terms as i64 + bmax;
    if bound > i32::MAX as i64 {
        return Err(Error::Quant(format!(
            "{what}: accumulator bound {bound} exceeds int32"
        )));
    }
    Ok(())
}

impl QuantizedModel {
    pub fn input_qparams(&self) -> QuantParams {
        self.tensors[self.input].qparams
    }

    pub fn output_qparams(&self) -> QuantParams {
        self.tensors[self.output].qparams
    }

    pub fn input_shape(&self) -> Shape {
        self.tensors[self.input].shape
    }

    /// Structural and numerical consistency: ids, ordering, shapes,
    /// multipliers against the tensor scales and the int32 overflow bound.
    pub fn validate(&self) -> Result<()> {
        let n = self.tensors.len();
        if n == 0 || self.input >= n || self.output >= n {
            return Err(Error::Quant("input/output id out of range".into()));
        }
        for t in &self.tensors {
            t.qparams.validate()?;
            if t.shape.numel() == 0 {
                return Err(Error::Quant("empty tensor".into()));
            }
        }
        let mut produced = vec![false; n];
        produced[self.input] = true;
        for (idx, node) in self.nodes.iter().enumerate() {
            let what = format!("node {idx} ({})", node.op.name());
            if node.inputs.len() != node.op.arity() {
                return Err(Error::Quant(format!("{what}: wrong number of inputs")));
            }
            for &t in &node.inputs {
                if t >= n || !produced[t] {
                    return Err(Error::Quant(format!(
                        "{what}: consumes tensor {t} before it is produced"
                    )));
                }
            }
            if node.output >= n || produced[node.output] {
                return Err(Error::Quant(format!(
                    "{what}: output tensor {} invalid or produced twice",
                    node.output
                )));
            }
            produced[node.output] = true;
            let x = self.tensors[node.inputs[0]];
            let y = self.tensors[node.output];
            match &node.op {
                QOp::Conv(c) => {
                    if !(c.stride == 1 || c.stride == 2)
                        || c.kernel_size == 0
                        || x.shape.channels != c.in_channels
                        || y.shape != Shape::new(x.shape.len.div_ceil(c.stride), c.out_channels)
                        || c.weights.len() != c.kernel_size * c.in_channels * c.out_channels
                        || c.bias.as_ref().is_some_and(|b| b.len() != c.out_channels)
                    {
                        return Err(Error::Quant(format!("{what}: shapes do not chain")));
                    }
                    c.multiplier.validate()?;
                    check_multiplier(
                        c.multiplier,
                        linear_multiplier(x.qparams.scale, c.weight_scale, y.qparams.scale),
                        &what,
                    )?;
                    check_accumulator(
                        &c.weights,
                        c.kernel_size * c.in_channels,
                        c.bias.as_deref(),
                        &what,
                    )?;
                }
                QOp::Dense(d) => {
                    if x.shape.numel() != d.in_dim
                        || y.shape != Shape::new(d.out_dim, 1)
                        || d.weights.len() != d.in_dim * d.out_dim
                        || d.bias.len() != d.out_dim
                    {
                        return Err(Error::Quant(format!("{what}: shapes do not chain")));
                    }
                    d.multiplier.validate()?;
                    check_multiplier(
                        d.multiplier,
                        linear_multiplier(x.qparams.scale, d.weight_scale, y.qparams.scale),
                        &what,
                    )?;
                    check_accumulator(&d.weights, d.in_dim, Some(&d.bias), &what)?;
                }
                QOp::Add(a) => {
                    let b = self.tensors[node.inputs[1]];
                    if b.shape != x.shape || y.shape != x.shape {
                        return Err(Error::Quant(format!("{what}: operand shapes differ")));
                    }
                    if a.headroom > ADD_FRACTION_BITS {
                        return Err(Error::Quant(format!(
                            "{what}: headroom {} exceeds {ADD_FRACTION_BITS} bits",
                            a.headroom
                        )));
                    }
                    let grid = y.qparams.scale as f64 * 2f64.powi(a.headroom as i32);
                    check_multiplier(a.multiplier_a, x.qparams.scale as f64 / grid, &what)?;
                    check_multiplier(a.multiplier_b, b.qparams.scale as f64 / grid, &what)?;
                }
            }
        }
        if !produced[self.output] {
            return Err(Error::Quant("output tensor is never produced".into()));
        }
        Ok(())
    }

    pub fn quantize_input(&self, x: &[f64]) -> Result<Vec<i8>> {
        if x.len() != self.input_shape().numel() {
            return Err(Error::Shape(format!(
                "model expects {} inputs, got {}",
                self.input_shape().numel(),
                x.len()
            )));
        }
        Ok(quantize_slice(x, self.input_qparams()))
    }

    /// Runs one node given the int8 contents of its inputs.
    pub fn run_node(&self, node: &QNode, a: &[i8], b: Option<&[i8]>, out: &mut [i8]) {
        let x = self.tensors[node.inputs[0]];
        let zp_out = self.tensors[node.output].qparams.zero_point;
        match &node.op {
            QOp::Conv(c) => kernels::conv(
                a,
                &ConvGeometry {
                    in_len: x.shape.len,
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    kernel_size: c.kernel_size,
                    stride: c.stride,
                },
                &LinearArgs {
                    weights: &c.weights,
                    bias: c.bias.as_deref(),
                    zp_in: x.qparams.zero_point,
                    zp_out,
                    multiplier: c.multiplier,
                    relu: c.relu,
                },
                out,
            ),
            QOp::Dense(d) => kernels::dense(
                a,
                &LinearArgs {
                    weights: &d.weights,
                    bias: Some(&d.bias),
                    zp_in: x.qparams.zero_point,
                    zp_out,
                    multiplier: d.multiplier,
                    relu: d.relu,
                },
                out,
            ),
            QOp::Add(add) => kernels::add(
                a,
                b.expect("add takes two inputs"),
                &AddArgs {
                    zp_a: x.qparams.zero_point,
                    zp_b: self.tensors[node.inputs[1]].qparams.zero_point,
                    zp_out,
                    multiplier_a: add.multiplier_a,
                    multiplier_b: add.multiplier_b,
                    headroom: add.headroom,
                    relu: add.relu,
                },
                out,
            ),
        }
    }

    /// Integer inference. Returns the int8 output and its dequantized values.
    pub fn int_forward(&self, q_input: &[i8]) -> Result<(Vec<i8>, Vec<f64>)> {
        if q_input.len() != self.input_shape().numel() {
            return Err(Error::Shape(format!(
                "model expects {} inputs, got {}",
                self.input_shape().numel(),
                q_input.len()
            )));
        }
        let mut values: Vec<Vec<i8>> = vec![Vec::new(); self.tensors.len()];
        values[self.input] = q_input.to_vec();
        for node in &self.nodes {
            let mut out = vec![0i8; self.tensors[node.output].shape.numel()];
            let b = node.inputs.get(1).map(|&t| values[t].as_slice());
            self.run_node(node, &values[node.inputs[0]], b, &mut out);
            values[node.output] = out;
        }
        let q = std::mem::take(&mut values[self.output]);
        let qp = self.output_qparams();
        let r = q.iter().map(|&v| dequantize(v, qp)).collect();
        Ok((q, r))
    }

    /// Quantize, run, dequantize a scalar regression output.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let (_, y) = self.int_forward(&self.quantize_input(x)?)?;
        match y.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Shape(format!("expected a scalar output, got {}", y.len()))),
        }
    }

    pub fn weight_bytes(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match &n.op {
                QOp::Conv(c) => c.weights.len() + 4 * c.bias.as_ref().map_or(0, Vec::len),
                QOp::Dense(d) => d.weights.len() + 4 * d.bias.len(),
                QOp::Add(_) => 0,
            })
            .sum()
    }
}

fn weight_qparams(w: &[f64], what: &str, report: &mut QuantizeReport) -> Result<QuantParams> {
    let (lo, hi) = w
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == 0.0 && hi == 0.0 {
        report
            .warnings
            .push(format!("{what}: all weights are zero, using minimal span"));
    }
    choose_qparams(lo, hi, true)
}

fn quantize_bias(b: &[f64], scale: f64, what: &str, report: &mut QuantizeReport) -> Vec<i32> {
    let mut saturated = false;
    let q = b
        .iter()
        .map(|&v| {
            let r = (v / scale).round();
            if r.abs() > i32::MAX as f64 {
                saturated = true;
            }
            r.clamp(i32::MIN as f64 + 1.0, i32::MAX as f64) as i32
        })
        .collect();
    if saturated {
        report.warnings.push(format!("{what}: bias saturated at int32"));
    }
    q
}

/// Chooses output parameters for `range` such that every multiplier
/// `numerator / S_out` stays below one, widening the range if needed.
fn output_qparams(
    range: TensorRange,
    numerators: &[f64],
    report: &mut QuantizeReport,
) -> Result<QuantParams> {
    let mut qp = choose_qparams(range.min, range.max, false)?;
    let need = numerators.iter().cloned().fold(0.0, f64::max) / MULTIPLIER_LIMIT;
    if need <= qp.scale as f64 {
        return Ok(qp);
    }
    report.widened_outputs += 1;
    let (lo, hi) = (range.min.min(0.0), range.max.max(0.0));
    let mut factor = need / qp.scale as f64;
    for _ in 0..16 {
        qp = choose_qparams(lo * factor, hi * factor, false)?;
        if need <= qp.scale as f64 {
            return Ok(qp);
        }
        factor *= 1.0 + 1e-6;
    }
    Err(Error::Quant(
        "could not bring requantization multiplier below one".into(),
    ))
}

/// Converts an optimized float graph to integer form. Weights are
/// symmetric per-tensor int8, biases int32 at `S_in * S_w`, activations
/// asymmetric int8 from the calibrated ranges.
pub fn quantize_model(
    graph: &FloatGraph,
    ranges: &[TensorRange],
) -> Result<(QuantizedModel, QuantizeReport)> {
    graph.validate()?;
    if ranges.len() != graph.tensors.len() {
        return Err(Error::InvalidArgument(format!(
            "{} ranges for {} tensors",
            ranges.len(),
            graph.tensors.len()
        )));
    }
    let mut report = QuantizeReport::default();
    let mut qparams: Vec<Option<QuantParams>> = vec![None; graph.tensors.len()];
    let r_in = ranges[graph.input];
    qparams[graph.input] = Some(choose_qparams(r_in.min, r_in.max, false)?);
    let mut nodes = Vec::with_capacity(graph.nodes.len());

    for (idx, node) in graph.nodes.iter().enumerate() {
        let what = format!("node {idx} ({})", node.op.name());
        let s_in = qparams[node.inputs[0]].expect("inputs precede consumers").scale;
        let range = ranges[node.output];
        let relu = |a: Activation| a == Activation::Relu;
        let (op, out_qp) = match &node.op {
            FloatOp::Conv(k) => {
                let wq = weight_qparams(&k.weights, &what, &mut report)?;
                let acc_scale = s_in as f64 * wq.scale as f64;
                let out_qp = output_qparams(range, &[acc_scale], &mut report)?;
                let op = QOp::Conv(QConv {
                    kernel_size: k.kernel_size,
                    in_channels: k.in_channels,
                    out_channels: k.out_channels,
                    stride: k.stride,
                    relu: relu(k.activation),
                    weights: quantize_slice(&k.weights, wq),
                    weight_scale: wq.scale,
                    bias: k
                        .bias
                        .as_ref()
                        .map(|b| quantize_bias(b, acc_scale, &what, &mut report)),
                    multiplier: FixedPointMultiplier::from_real(linear_multiplier(
                        s_in,
                        wq.scale,
                        out_qp.scale,
                    ))?,
                });
                (op, out_qp)
            }
            FloatOp::Dense { layer, activation } => {
                let wq = weight_qparams(&layer.weights, &what, &mut report)?;
                let acc_scale = s_in as f64 * wq.scale as f64;
                let out_qp = output_qparams(range, &[acc_scale], &mut report)?;
                let op = QOp::Dense(QDense {
                    in_dim: layer.in_dim,
                    out_dim: layer.out_dim,
                    relu: relu(*activation),
                    weights: quantize_slice(&layer.weights, wq),
                    weight_scale: wq.scale,
                    bias: quantize_bias(&layer.bias, acc_scale, &what, &mut report),
                    multiplier: FixedPointMultiplier::from_real(linear_multiplier(
                        s_in,
                        wq.scale,
                        out_qp.scale,
                    ))?,
                });
                (op, out_qp)
            }
            FloatOp::Add { activation } => {
                let s_b = qparams[node.inputs[1]].expect("inputs precede consumers").scale;
                let (s_a, s_b) = (s_in as f64, s_b as f64);
                // The addends are rescaled onto a grid finer than S_out by
                // 2^(16 - headroom); a coarser grid keeps the multipliers
                // below one without touching the calibrated output range.
                let natural = choose_qparams(range.min, range.max, false)?;
                let ratio = s_a.max(s_b) / natural.scale as f64 / MULTIPLIER_LIMIT;
                let headroom = (0..=ADD_FRACTION_BITS)
                    .find(|&j| ratio < 2f64.powi(j as i32))
                    .unwrap_or(ADD_FRACTION_BITS);
                let scaled = [s_a / 2f64.powi(headroom as i32), s_b / 2f64.powi(headroom as i32)];
                let out_qp = output_qparams(range, &scaled, &mut report)?;
                let grid = out_qp.scale as f64 * 2f64.powi(headroom as i32);
                let op = QOp::Add(QAdd {
                    relu: relu(*activation),
                    multiplier_a: FixedPointMultiplier::from_real(s_a / grid)?,
                    multiplier_b: FixedPointMultiplier::from_real(s_b / grid)?,
                    headroom,
                });
                (op, out_qp)
            }
            other => {
                return Err(Error::Quant(format!(
                    "{} nodes must be removed by graph_optimize before quantization",
                    other.name()
                )))
            }
        };
        qparams[node.output] = Some(out_qp);
        nodes.push(QNode {
            op,
            inputs: node.inputs.clone(),
            output: node.output,
        });
    }

    let tensors = graph
        .tensors
        .iter()
        .zip(&qparams)
        .map(|(&shape, qp)| {
            qp.map(|qparams| QTensor { shape, qparams })
                .ok_or_else(|| Error::Quant("tensor without quantization parameters".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = QuantizedModel {
        architecture: graph.architecture.clone(),
        tensors,
        nodes,
        input: graph.input,
        output: graph.output,
    };
    model.validate()?;
    Ok((model, report))
}
