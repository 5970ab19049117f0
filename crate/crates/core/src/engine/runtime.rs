use std::ops::Range;
use std::sync::Arc;

use super::image::deserialize;
use super::memory::{plan_memory, MemoryPlan};
use crate::error::{Error, Result};
use crate::quant::{dequantize, quantize_value, QuantizedModel};

/// Int8 executor over one preallocated arena. `run` and `predict` do not
/// allocate.
#[derive(Debug, Clone)]
pub struct Engine {
    model: Arc<QuantizedModel>,
    plan: MemoryPlan,
    arena: Vec<i8>,
}

fn input_view<'a>(lo: &'a [i8], hi: &'a [i8], out: &Range<usize>, r: Range<usize>) -> &'a [i8] {
    if r.end <= out.start {
        &lo[r]
    } else {
        &hi[r.start - out.end..r.end - out.end]
    }
}

impl Engine {
    pub fn new(model: impl Into<Arc<QuantizedModel>>) -> Result<Self> {
        let model = model.into();
        model.validate()?;
        let plan = plan_memory(&model);
        for node in &model.nodes {
            let out = plan.range(node.output);
            for &t in &node.inputs {
                let r = plan.range(t);
                if r.start < out.end && out.start < r.end {
                    return Err(Error::Quant("memory plan aliases a node input and output".into()));
                }
            }
        }
        let arena = vec![0i8; plan.arena_bytes];
        Ok(Engine { model, plan, arena })
    }

    pub fn from_image(bytes: &[u8]) -> Result<Self> {
        Self::new(deserialize(bytes)?)
    }

    pub fn model(&self) -> &QuantizedModel {
        &self.model
    }

    pub fn plan(&self) -> &MemoryPlan {
        &self.plan
    }

    pub fn arena_bytes(&self) -> usize {
        self.arena.len()
    }

    fn execute(&mut self) -> &[i8] {
        let model = &*self.model;
        for node in &model.nodes {
            let out = self.plan.range(node.output);
            let (lo, rest) = self.arena.split_at_mut(out.start);
            let (dst, hi) = rest.split_at_mut(out.len());
            let a = input_view(lo, hi, &out, self.plan.range(node.inputs[0]));
            let b = node
                .inputs
                .get(1)
                .map(|&t| input_view(lo, hi, &out, self.plan.range(t)));
            model.run_node(node, a, b, dst);
        }
        &self.arena[self.plan.range(model.output)]
    }

    /// Runs on an already quantized input and returns the int8 output.
    pub fn run(&mut self, q_input: &[i8]) -> Result<&[i8]> {
        let r = self.plan.range(self.model.input);
        if q_input.len() != r.len() {
            return Err(Error::Shape(format!(
                "engine expects {} inputs, got {}",
                r.len(),
                q_input.len()
            )));
        }
        self.arena[r].copy_from_slice(q_input);
        Ok(self.execute())
    }

    /// Quantizes `x` straight into the arena and returns the dequantized
    /// scalar output.
    pub fn predict(&mut self, x: &[f64]) -> Result<f64> {
        let r = self.plan.range(self.model.input);
        if x.len() != r.len() {
            return Err(Error::Shape(format!(
                "engine expects {} inputs, got {}",
                r.len(),
                x.len()
            )));
        }
        let qp = self.model.input_qparams();
        for (dst, &v) in self.arena[r].iter_mut().zip(x) {
            *dst = quantize_value(v, qp);
        }
        let out_qp = self.model.output_qparams();
        match self.execute() {
            [q] => Ok(dequantize(*q, out_qp)),
            out => Err(Error::Shape(format!(
                "expected a scalar output, got {}",
                out.len()
            ))),
        }
    }
}
