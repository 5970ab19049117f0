//! Network definitions: the modified REMNet, the MLP baseline and the
//! range mitigation step.

mod config;
mod mlp;
mod remnet;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::{param_count, reduced_len, ModelConfig, REFERENCE_STEM_KERNEL};
pub use mlp::{mlp_param_count, MlpTrace, MlpWeights, REFERENCE_MLP_HIDDEN};
pub use remnet::{RemnetTrace, RemnetWeights, RrmWeights};

use crate::error::{Error, Result};
use crate::nn::{DropoutMask, Gradients, Parameters};

/// A scalar regressor that can be trained with hand-written backprop.
pub trait Regressor: Parameters + Sync {
    type Trace;

    fn input_len(&self) -> usize;

    /// Length of the feature vector the dropout mask applies to.
    fn dropout_len(&self) -> usize;

    fn dropout_rate(&self) -> f64;

    /// Inference-mode prediction (dropout is the identity).
    fn predict(&self, x: &[f64]) -> Result<f64>;

    /// Training-mode forward pass with a fixed dropout mask.
    fn forward_train(&self, x: &[f64], mask: &DropoutMask) -> Result<(f64, Self::Trace)>;

    /// Gradients of every parameter given `dy = dLoss/dŷ`.
    fn backward(&self, trace: &Self::Trace, dy: f64) -> Result<Gradients>;

    fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// Corrected range from the measured range and a predicted error.
pub fn mitigate(measured_range_m: f64, predicted_error_m: f64) -> f64 {
    measured_range_m - predicted_error_m
}

/// Float weights as persisted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum SavedModel {
    Remnet(RemnetWeights),
    Mlp(MlpWeights),
}

impl SavedModel {
    pub fn input_len(&self) -> usize {
        match self {
            SavedModel::Remnet(w) => w.input_len(),
            SavedModel::Mlp(w) => w.input_len(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            SavedModel::Remnet(w) => w.predict(x),
            SavedModel::Mlp(w) => w.predict(x),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            SavedModel::Remnet(w) => w.param_count(),
            SavedModel::Mlp(w) => w.param_count(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: SavedModel = serde_json::from_str(&text)?;
        match &model {
            SavedModel::Remnet(w) => w.validate()?,
            SavedModel::Mlp(w) => w.validate()?,
        }
        Ok(model)
    }
}
