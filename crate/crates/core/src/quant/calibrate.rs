use serde::{Deserialize, Serialize};

use super::graph::FloatGraph;
use super::params::MIN_SPAN;
use crate::error::{Error, Result};

/// Default number of training samples used for calibration.
pub const DEFAULT_CALIBRATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorRange {
    pub min: f64,
    pub max: f64,
}

impl TensorRange {
    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Running min/max of every tensor in a graph.
#[derive(Debug, Clone)]
pub struct RangeObserver {
    ranges: Vec<TensorRange>,
    samples: usize,
}

impl RangeObserver {
    pub fn new(graph: &FloatGraph) -> Self {
        RangeObserver {
            ranges: vec![
                TensorRange {
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                };
                graph.tensors.len()
            ],
            samples: 0,
        }
    }

    pub fn observe(&mut self, graph: &FloatGraph, x: &[f64]) -> Result<()> {
        let values = graph.forward_all(x)?;
        if values.len() != self.ranges.len() {
            return Err(Error::Shape("observer built for a different graph".into()));
        }
        for (r, t) in self.ranges.iter_mut().zip(&values) {
            for &v in t.data() {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument("non-finite activation".into()));
                }
                r.min = r.min.min(v);
                r.max = r.max.max(v);
            }
        }
        self.samples += 1;
        Ok(())
    }

    /// Raw running min/max without span widening.
    pub fn observed(&self) -> &[TensorRange] {
        &self.ranges
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Observed ranges; spans narrower than [`MIN_SPAN`] are widened.
    pub fn ranges(&self) -> Result<Vec<TensorRange>> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("calibration set is empty".into()));
        }
        Ok(self
            .ranges
            .iter()
            .map(|r| {
                if r.span() < MIN_SPAN {
                    TensorRange {
                        min: r.min,
                        max: r.min + MIN_SPAN,
                    }
                } else {
                    *r
                }
            })
            .collect())
    }
}

/// Per-tensor (min, max) over a calibration set.
pub fn calibrate(graph: &FloatGraph, inputs: &[Vec<f64>]) -> Result<Vec<TensorRange>> {
    let mut obs = RangeObserver::new(graph);
    for x in inputs {
        obs.observe(graph, x)?;
    }
    obs.ranges()
}
