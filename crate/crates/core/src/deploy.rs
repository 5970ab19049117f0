//! Float model to int8 deployment in one step, plus the float / optimized
//! / int8 comparison used by the pipeline report.

use serde::{Deserialize, Serialize};

use crate::engine::{serialize, serialize_float, Engine};
use crate::error::Result;
use crate::model::SavedModel;
use crate::quant::{
    calibrate, graph_optimize, quantize_model, FloatGraph, OptimizeReport, QuantizeReport, QuantizedModel,
};
use crate::train::{evaluate_predictions, Metrics, PreparedSet};

#[derive(Debug, Clone)]
pub struct Deployment {
    pub reference: FloatGraph,
    pub optimized: FloatGraph,
    pub optimize_report: OptimizeReport,
    pub quantized: QuantizedModel,
    pub quantize_report: QuantizeReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSizes {
    pub float_bytes: usize,
    pub optimized_bytes: usize,
    pub int8_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub float: Metrics,
    pub optimized: Metrics,
    pub int8: Metrics,
    /// Largest per-sample |optimized - reference| prediction gap.
    pub max_optimized_gap_m: f64,
    /// Largest per-sample |int8 - reference| prediction gap.
    pub max_int8_gap_m: f64,
    /// Scale of the int8 output tensor.
    pub output_scale: f64,
}

/// Evenly strided subset of at most `count` rows.
pub fn calibration_subset(inputs: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    if inputs.len() <= count {
        return inputs.to_vec();
    }
    (0..count)
        .map(|i| inputs[i * inputs.len() / count].clone())
        .collect()
}

/// Reference graph, optimized graph and int8 model for trained weights.
pub fn deploy(model: &SavedModel, calibration: &[Vec<f64>]) -> Result<Deployment> {
    let reference = FloatGraph::from_saved(model)?;
    let (optimized, optimize_report) = graph_optimize(&reference)?;
    let ranges = calibrate(&optimized, calibration)?;
    let (quantized, quantize_report) = quantize_model(&optimized, &ranges)?;
    Ok(Deployment {
        reference,
        optimized,
        optimize_report,
        quantized,
        quantize_report,
    })
}

impl Deployment {
    pub fn image_sizes(&self) -> Result<ImageSizes> {
        Ok(ImageSizes {
            float_bytes: serialize_float(&self.reference)?.len(),
            optimized_bytes: serialize_float(&self.optimized)?.len(),
            int8_bytes: serialize(&self.quantized)?.len(),
        })
    }

    pub fn compare(&self, set: &PreparedSet) -> Result<Comparison> {
        let mut engine = Engine::new(self.quantized.clone())?;
        let (mut yf, mut yo, mut yq) = (Vec::new(), Vec::new(), Vec::new());
        for x in &set.inputs {
            yf.push(self.reference.predict(x)?);
            yo.push(self.optimized.predict(x)?);
            yq.push(engine.predict(x)?);
        }
        let gap = |a: &[f64]| a.iter().zip(&yf).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        Ok(Comparison {
            max_optimized_gap_m: gap(&yo),
            max_int8_gap_m: gap(&yq),
            output_scale: self.quantized.output_qparams().scale as f64,
            float: evaluate_predictions(yf, set)?.metrics,
            optimized: evaluate_predictions(yo, set)?.metrics,
            int8: evaluate_predictions(yq, set)?.metrics,
        })
    }
}
