use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stem kernel of the reference layout (7 taps, no bias: 7 * 16 = 112
/// parameters at F = 16).
pub const REFERENCE_STEM_KERNEL: usize = 7;

/// Architecture hyperparameters of the modified REMNet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// CIR samples fed to the network (K).
    pub cir_len: usize,
    /// Filters in every convolution (F).
    pub filters: usize,
    /// Number of residual reduction modules (N).
    pub modules: usize,
    /// Stem kernel size (k0).
    pub stem_kernel: usize,
    /// Kernel size inside each residual reduction module (kn).
    pub block_kernel: usize,
    pub dropout_rate: f64,
    /// Reference layout: bias-free 7-tap stem and bias-free 1x1 shortcuts
    /// (5905 parameters at K = 157).
    pub reference_layout: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cir_len: 157,
            filters: 16,
            modules: 3,
            stem_kernel: 5,
            block_kernel: 3,
            dropout_rate: 0.2,
            reference_layout: false,
        }
    }
}

impl ModelConfig {
    pub fn with_cir_len(mut self, cir_len: usize) -> Self {
        self.cir_len = cir_len;
        self
    }

    pub fn reference_layout(mut self, on: bool) -> Self {
        self.reference_layout = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.modules == 0 {
            return Err(Error::Config("at least one residual module is required".into()));
        }
        if self.filters == 0 {
            return Err(Error::Config("filters must be >= 1".into()));
        }
        if self.modules >= usize::BITS as usize || self.cir_len < (1usize << self.modules) {
            return Err(Error::Config(format!(
                "cir_len {} must be >= 2^{}",
                self.cir_len, self.modules
            )));
        }
        if self.stem_kernel == 0 || self.block_kernel == 0 {
            return Err(Error::Config("kernel sizes must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn effective_stem_kernel(&self) -> usize {
        if self.reference_layout {
            REFERENCE_STEM_KERNEL
        } else {
            self.stem_kernel
        }
    }

    pub fn stem_has_bias(&self) -> bool {
        !self.reference_layout
    }

    pub fn shortcut_has_bias(&self) -> bool {
        !self.reference_layout
    }

    /// Temporal length after each module: `ceil(K / 2)` applied `N` times.
    pub fn reduced_len(&self) -> usize {
        reduced_len(self.cir_len, self.modules)
    }

    /// Length of the flattened feature vector fed to the regression head.
    pub fn feature_len(&self) -> usize {
        self.reduced_len() * self.filters
    }
}

pub fn reduced_len(len: usize, halvings: usize) -> usize {
    (0..halvings).fold(len, |l, _| l.div_ceil(2))
}

/// Closed-form parameter total over every weight and bias tensor.
pub fn param_count(config: &ModelConfig) -> usize {
    let f = config.filters;
    let stem = config.effective_stem_kernel() * f + if config.stem_has_bias() { f } else { 0 };
    let conv = config.block_kernel * f * f + f;
    let shortcut = f * f + if config.shortcut_has_bias() { f } else { 0 };
    let head = config.feature_len() + 1;
    stem + config.modules * (2 * conv + shortcut) + head
}
