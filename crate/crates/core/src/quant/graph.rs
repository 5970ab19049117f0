//! Float inference graph used for optimization, calibration and export.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MlpWeights, ModelConfig, RemnetWeights, SavedModel};
use crate::nn::{conv1d_same, dense_forward, Activation, ConvKernel, DenseLayer};
use crate::tensor::Tensor;

pub type TensorId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub len: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(len: usize, channels: usize) -> Self {
        Shape { len, channels }
    }

    pub fn numel(&self) -> usize {
        self.len * self.channels
    }
}

/// Network family a graph was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Architecture {
    Remnet(ModelConfig),
    Mlp { input_dim: usize, hidden: Vec<usize> },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FloatOp {
    /// Convolution; the kernel carries its own activation.
    Conv(ConvKernel),
    /// Dense layer over the row-major contents of its input.
    Dense {
        layer: DenseLayer,
        activation: Activation,
    },
    Add {
        activation: Activation,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Flatten,
}

impl FloatOp {
    pub fn name(&self) -> &'static str {
        match self {
            FloatOp::Conv(_) => "conv",
            FloatOp::Dense { .. } => "dense",
            FloatOp::Add { .. } => "add",
            FloatOp::Relu => "relu",
            FloatOp::Dropout { .. } => "dropout",
            FloatOp::Flatten => "flatten",
        }
    }

    fn arity(&self) -> usize {
        if matches!(self, FloatOp::Add { .. }) {
            2
        } else {
            1
        }
    }

    fn activation(&self) -> Option<Activation> {
        match self {
            FloatOp::Conv(k) => Some(k.activation),
            FloatOp::Dense { activation, .. } | FloatOp::Add { activation } => Some(*activation),
            _ => None,
        }
    }

    fn activation_mut(&mut self) -> Option<&mut Activation> {
        match self {
            FloatOp::Conv(k) => Some(&mut k.activation),
            FloatOp::Dense { activation, .. } | FloatOp::Add { activation } => Some(activation),
            _ => None,
        }
    }

    fn output_shape(&self, inputs: &[Shape]) -> Result<Shape> {
        let x = inputs[0];
        match self {
            FloatOp::Conv(k) => {
                k.validate()?;
                if x.channels != k.in_channels {
                    return Err(Error::Shape(format!(
                        "conv expects {} channels, got {}",
                        k.in_channels, x.channels
                    )));
                }
                Ok(Shape::new(k.output_len(x.len), k.out_channels))
            }
            FloatOp::Dense { layer, .. } => {
                layer.validate()?;
                if x.numel() != layer.in_dim {
                    return Err(Error::Shape(format!(
                        "dense expects {} inputs, got {}",
                        layer.in_dim,
                        x.numel()
                    )));
                }
                Ok(Shape::new(layer.out_dim, 1))
            }
            FloatOp::Add { .. } => {
                if inputs[1] != x {
                    return Err(Error::Shape(format!(
                        "add operands differ: {x:?} vs {:?}",
                        inputs[1]
                    )));
                }
                Ok(x)
            }
            FloatOp::Relu | FloatOp::Dropout { .. } => Ok(x),
            FloatOp::Flatten => Ok(Shape::new(x.numel(), 1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatNode {
    pub op: FloatOp,
    pub inputs: Vec<TensorId>,
    pub output: TensorId,
}

/// Topologically ordered single-input, single-output dataflow graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatGraph {
    pub architecture: Architecture,
    pub tensors: Vec<Shape>,
    pub nodes: Vec<FloatNode>,
    pub input: TensorId,
    pub output: TensorId,
}

impl FloatGraph {
    /// Empty graph holding only its input tensor.
    pub fn new(architecture: Architecture, input: Shape) -> Self {
        FloatGraph {
            architecture,
            tensors: vec![input],
            nodes: Vec::new(),
            input: 0,
            output: 0,
        }
    }

    /// Appends a node and makes its result the graph output.
    pub fn push(&mut self, op: FloatOp, inputs: &[TensorId]) -> Result<TensorId> {
        if inputs.len() != op.arity() {
            return Err(Error::Shape(format!(
                "{} takes {} inputs, got {}",
                op.name(),
                op.arity(),
                inputs.len()
            )));
        }
        let shapes = inputs
            .iter()
            .map(|&t| {
                self.tensors
                    .get(t)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("unknown tensor {t}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let shape = op.output_shape(&shapes)?;
        let id = self.tensors.len();
        self.tensors.push(shape);
        self.nodes.push(FloatNode {
            op,
            inputs: inputs.to_vec(),
            output: id,
        });
        self.output = id;
        Ok(id)
    }

    /// Reference graph of a REMNet: explicit ReLU, flatten and dropout nodes.
    pub fn from_remnet(w: &RemnetWeights) -> Result<Self> {
        w.validate()?;
        let linear = |k: &ConvKernel| {
            FloatOp::Conv(ConvKernel {
                activation: Activation::None,
                ..k.clone()
            })
        };
        let mut g = FloatGraph::new(Architecture::Remnet(w.config), Shape::new(w.config.cir_len, 1));
        let stem = g.push(linear(&w.stem), &[0])?;
        let mut x = g.push(FloatOp::Relu, &[stem])?;
        for m in &w.modules {
            let b = g.push(linear(&m.block), &[x])?;
            let b = g.push(FloatOp::Relu, &[b])?;
            let h = g.push(
                FloatOp::Add {
                    activation: Activation::None,
                },
                &[b, x],
            )?;
            let r = g.push(linear(&m.reduce), &[h])?;
            let r = g.push(FloatOp::Relu, &[r])?;
            let s = g.push(linear(&m.shortcut), &[h])?;
            x = g.push(
                FloatOp::Add {
                    activation: Activation::None,
                },
                &[r, s],
            )?;
        }
        let f = g.push(FloatOp::Flatten, &[x])?;
        let d = g.push(
            FloatOp::Dropout {
                rate: w.config.dropout_rate,
            },
            &[f],
        )?;
        g.push(
            FloatOp::Dense {
                layer: w.head.clone(),
                activation: Activation::None,
            },
            &[d],
        )?;
        Ok(g)
    }

    pub fn from_mlp(w: &MlpWeights) -> Result<Self> {
        w.validate()?;
        let mut g = FloatGraph::new(
            Architecture::Mlp {
                input_dim: w.input_dim,
                hidden: w.hidden.clone(),
            },
            Shape::new(w.input_dim, 1),
        );
        let mut x = 0;
        let last = w.layers.len() - 1;
        for (i, layer) in w.layers.iter().enumerate() {
            if i == last {
                x = g.push(FloatOp::Dropout { rate: w.dropout_rate }, &[x])?;
            }
            x = g.push(
                FloatOp::Dense {
                    layer: layer.clone(),
                    activation: Activation::None,
                },
                &[x],
            )?;
            if i != last {
                x = g.push(FloatOp::Relu, &[x])?;
            }
        }
        Ok(g)
    }

    pub fn from_saved(model: &SavedModel) -> Result<Self> {
        match model {
            SavedModel::Remnet(w) => Self::from_remnet(w),
            SavedModel::Mlp(w) => Self::from_mlp(w),
        }
    }

    pub fn input_shape(&self) -> Shape {
        self.tensors[self.input]
    }

    /// Checks ids, ordering and shapes. Every tensor except the input is
    /// produced by exactly one node before it is consumed.
    pub fn validate(&self) -> Result<()> {
        let n = self.tensors.len();
        if self.input >= n || self.output >= n {
            return Err(Error::Shape("graph input/output id out of range".into()));
        }
        let mut produced = vec![false; n];
        produced[self.input] = true;
        for node in &self.nodes {
            if node.inputs.len() != node.op.arity() {
                return Err(Error::Shape(format!("{} has wrong arity", node.op.name())));
            }
            let mut shapes = Vec::with_capacity(2);
            for &t in &node.inputs {
                if t >= n || !produced[t] {
                    return Err(Error::Shape(format!(
                        "{} consumes tensor {t} before it is produced",
                        node.op.name()
                    )));
                }
                shapes.push(self.tensors[t]);
            }
            if node.output >= n || produced[node.output] {
                return Err(Error::Shape(format!(
                    "tensor {} produced more than once",
                    node.output
                )));
            }
            if node.op.output_shape(&shapes)? != self.tensors[node.output] {
                return Err(Error::Shape(format!(
                    "{} output shape disagrees with tensor {}",
                    node.op.name(),
                    node.output
                )));
            }
            produced[node.output] = true;
        }
        if !produced[self.output] {
            return Err(Error::Shape("graph output is never produced".into()));
        }
        Ok(())
    }

    /// Inference-mode evaluation returning every tensor of the graph.
    pub fn forward_all(&self, x: &[f64]) -> Result<Vec<Tensor>> {
        let shape = self.input_shape();
        if x.len() != shape.numel() {
            return Err(Error::Shape(format!(
                "graph expects {} inputs, got {}",
                shape.numel(),
                x.len()
            )));
        }
        let mut values: Vec<Option<Tensor>> = vec![None; self.tensors.len()];
        values[self.input] = Some(Tensor::from_vec(shape.len, shape.channels, x.to_vec())?);
        for node in &self.nodes {
            let arg = |i: usize| {
                values[node.inputs[i]]
                    .as_ref()
                    .ok_or_else(|| Error::Shape("tensor used before definition".into()))
            };
            let out = match &node.op {
                FloatOp::Conv(k) => conv1d_same(arg(0)?, k)?,
                FloatOp::Dense { layer, activation } => {
                    let y = dense_forward(arg(0)?.data(), layer)?;
                    activate(Tensor::from_vec(layer.out_dim, 1, y)?, *activation)
                }
                FloatOp::Add { activation } => activate(arg(0)?.add(arg(1)?)?, *activation),
                FloatOp::Relu => arg(0)?.relu(),
                FloatOp::Dropout { .. } => arg(0)?.clone(),
                FloatOp::Flatten => {
                    let t = arg(0)?;
                    Tensor::from_vec(t.len() * t.channels(), 1, t.data().to_vec())?
                }
            };
            values[node.output] = Some(out);
        }
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Shape(format!("tensor {i} is never produced"))))
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Tensor> {
        let mut all = self.forward_all(x)?;
        Ok(all.swap_remove(self.output))
    }

    /// Scalar output of a regression graph.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let y = self.forward(x)?;
        match y.data() {
            [v] => Ok(*v),
            d => Err(Error::Shape(format!("expected a scalar output, got {}", d.len()))),
        }
    }

    pub fn param_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match &n.op {
                FloatOp::Conv(k) => k.param_count(),
                FloatOp::Dense { layer, .. } => layer.param_count(),
                _ => 0,
            })
            .sum()
    }
}

fn activate(t: Tensor, activation: Activation) -> Tensor {
    match activation {
        Activation::None => t,
        Activation::Relu => t.relu(),
    }
}

/// What [`graph_optimize`] changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub dropout_removed: usize,
    pub flatten_removed: usize,
    pub relu_fused: usize,
    pub dense_folded: usize,
    pub dead_removed: usize,
}

impl OptimizeReport {
    pub fn changed(&self) -> bool {
        *self != OptimizeReport::default()
    }
}

/// Inference-time rewrites: dropout and flatten elision, ReLU fusion into
/// the producing conv/dense/add, folding of back-to-back linear dense
/// layers and dead node removal.
pub fn graph_optimize(graph: &FloatGraph) -> Result<(FloatGraph, OptimizeReport)> {
    graph.validate()?;
    let mut report = OptimizeReport::default();
    let mut nodes: Vec<Option<FloatNode>> = graph.nodes.iter().cloned().map(Some).collect();
    let mut output = graph.output;

    // Identity ops: rewire consumers to the op's input. Dropout goes first
    // so that a flatten feeding it ends up next to its dense consumer.
    for i in 0..nodes.len() {
        let Some(node) = &nodes[i] else { continue };
        if let FloatOp::Dropout { .. } = node.op {
            let (from, to) = (node.output, node.inputs[0]);
            nodes[i] = None;
            elide(&mut nodes, &mut output, from, to);
            report.dropout_removed += 1;
        }
    }
    for i in 0..nodes.len() {
        let Some(node) = &nodes[i] else { continue };
        let (from, to) = (node.output, node.inputs[0]);
        // Dense reads its input row-major, so a flatten in front of it is free.
        let removable = node.op == FloatOp::Flatten
            && from != output
            && consumers(&nodes, from)
                .iter()
                .all(|&c| matches!(nodes[c].as_ref().unwrap().op, FloatOp::Dense { .. }));
        if removable {
            nodes[i] = None;
            elide(&mut nodes, &mut output, from, to);
            report.flatten_removed += 1;
        }
    }

    // ReLU fusion: the producer takes over the ReLU's output tensor.
    for i in 0..nodes.len() {
        let Some(node) = &nodes[i] else { continue };
        if node.op != FloatOp::Relu {
            continue;
        }
        let (src, dst) = (node.inputs[0], node.output);
        let Some(p) = producer(&nodes, src) else { continue };
        let fusable = src != output
            && consumers(&nodes, src).len() == 1
            && nodes[p].as_ref().unwrap().op.activation() == Some(Activation::None);
        if !fusable {
            continue;
        }
        let prod = nodes[p].as_mut().unwrap();
        *prod.op.activation_mut().unwrap() = Activation::Relu;
        prod.output = dst;
        nodes[i] = None;
        report.relu_fused += 1;
    }

    // Linear dense followed by dense: W = W1 W2, b = b1 W2 + b2.
    for i in 0..nodes.len() {
        let Some(node) = &nodes[i] else { continue };
        let FloatOp::Dense {
            activation: Activation::None,
            ..
        } = node.op
        else {
            continue;
        };
        let mid = node.output;
        let cs = consumers(&nodes, mid);
        if mid == output || cs.len() != 1 {
            continue;
        }
        let c = cs[0];
        let FloatOp::Dense {
            layer: second,
            activation,
        } = &nodes[c].as_ref().unwrap().op
        else {
            continue;
        };
        let FloatOp::Dense { layer: first, .. } = &node.op else {
            unreachable!()
        };
        let merged = fold_dense(first, second);
        let activation = *activation;
        let input = node.inputs[0];
        let next = nodes[c].as_mut().unwrap();
        next.op = FloatOp::Dense {
            layer: merged,
            activation,
        };
        next.inputs = vec![input];
        nodes[i] = None;
        report.dense_folded += 1;
    }

    // Dead nodes: anything the output does not depend on.
    let mut live = vec![false; graph.tensors.len()];
    live[output] = true;
    for slot in nodes.iter_mut().rev() {
        let Some(node) = slot else { continue };
        if live[node.output] {
            for &t in &node.inputs {
                live[t] = true;
            }
        } else {
            *slot = None;
            report.dead_removed += 1;
        }
    }

    // Renumber tensors densely in execution order.
    let mut remap = vec![usize::MAX; graph.tensors.len()];
    let mut tensors = vec![graph.tensors[graph.input]];
    remap[graph.input] = 0;
    let mut out_nodes = Vec::new();
    for node in nodes.into_iter().flatten() {
        remap[node.output] = tensors.len();
        tensors.push(graph.tensors[node.output]);
        out_nodes.push(FloatNode {
            inputs: node.inputs.iter().map(|&t| remap[t]).collect(),
            output: remap[node.output],
            op: node.op,
        });
    }
    let optimized = FloatGraph {
        architecture: graph.architecture.clone(),
        tensors,
        nodes: out_nodes,
        input: 0,
        output: remap[output],
    };
    optimized.validate()?;
    Ok((optimized, report))
}

fn consumers(nodes: &[Option<FloatNode>], t: TensorId) -> Vec<usize> {
    nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.as_ref().is_some_and(|n| n.inputs.contains(&t)))
        .map(|(i, _)| i)
        .collect()
}

fn producer(nodes: &[Option<FloatNode>], t: TensorId) -> Option<usize> {
    nodes
        .iter()
        .position(|n| n.as_ref().is_some_and(|n| n.output == t))
}

fn elide(nodes: &mut [Option<FloatNode>], output: &mut TensorId, from: TensorId, to: TensorId) {
    for node in nodes.iter_mut().flatten() {
        for t in &mut node.inputs {
            if *t == from {
                *t = to;
            }
        }
    }
    if *output == from {
        *output = to;
    }
}

fn fold_dense(a: &DenseLayer, b: &DenseLayer) -> DenseLayer {
    let mut out = DenseLayer::zeros(a.in_dim, b.out_dim);
    for i in 0..a.in_dim {
        for k in 0..a.out_dim {
            let w = a.weights[i * a.out_dim + k];
            for j in 0..b.out_dim {
                out.weights[i * b.out_dim + j] += w * b.weights[k * b.out_dim + j];
            }
        }
    }
    for j in 0..b.out_dim {
        out.bias[j] = b.bias[j]
            + (0..a.out_dim)
                .map(|k| a.bias[k] * b.weights[k * b.out_dim + j])
                .sum::<f64>();
    }
    out
}
