use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use remnet_core::dataset::SUPPORTED_CIR_LENS;
use remnet_core::train::TrainConfig;
use remnet_core::{ModelConfig, NormMode};
use serde::{Deserialize, Serialize};

/// Settings shared by the training commands. Every field is optional in a
/// config file; command-line flags take precedence over the file, and
/// anything left unset falls back to the defaults below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub cir_len: Option<Vec<usize>>,
    pub reference_layout: Option<bool>,
    pub dropout_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub seeds: Option<usize>,
    pub norm: Option<NormMode>,
    pub calibration_samples: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RunConfig) -> RunConfig {
        RunConfig {
            dataset: over.dataset.or(self.dataset),
            cir_len: over.cir_len.or(self.cir_len),
            reference_layout: over.reference_layout.or(self.reference_layout),
            dropout_rate: over.dropout_rate.or(self.dropout_rate),
            epochs: over.epochs.or(self.epochs),
            batch_size: over.batch_size.or(self.batch_size),
            learning_rate: over.learning_rate.or(self.learning_rate),
            seeds: over.seeds.or(self.seeds),
            norm: over.norm.or(self.norm),
            calibration_samples: over.calibration_samples.or(self.calibration_samples),
            out: over.out.or(self.out),
        }
    }

    /// Fills every unset field with its default so the persisted copy
    /// reproduces the run exactly.
    pub fn resolved(self, default_lens: &[usize]) -> Result<RunConfig> {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let resolved = RunConfig {
            dataset: self.dataset,
            cir_len: Some(self.cir_len.unwrap_or_else(|| default_lens.to_vec())),
            reference_layout: Some(self.reference_layout.unwrap_or(false)),
            dropout_rate: Some(self.dropout_rate.unwrap_or(model.dropout_rate)),
            epochs: Some(self.epochs.unwrap_or(train.epochs)),
            batch_size: Some(self.batch_size.unwrap_or(train.batch_size)),
            learning_rate: Some(self.learning_rate.unwrap_or(train.adam.learning_rate)),
            seeds: Some(self.seeds.unwrap_or(train.seeds.len())),
            norm: Some(self.norm.unwrap_or_default()),
            calibration_samples: Some(
                self.calibration_samples
                    .unwrap_or(remnet_core::quant::DEFAULT_CALIBRATION_SAMPLES),
            ),
            out: self.out,
        };
        resolved.check()?;
        Ok(resolved)
    }

    fn check(&self) -> Result<()> {
        let Some(dataset) = &self.dataset else {
            bail!("no dataset given (use --dataset or set `dataset` in the config file)");
        };
        if !dataset.exists() {
            bail!("dataset {} does not exist", dataset.display());
        }
        for &k in self.cir_lens() {
            if !SUPPORTED_CIR_LENS.contains(&k) {
                bail!("CIR length {k} is not one of {SUPPORTED_CIR_LENS:?}");
            }
        }
        if self.cir_lens().is_empty() {
            bail!("at least one CIR length is required");
        }
        if self.seeds() == 0 {
            bail!("--seeds must be at least 1");
        }
        self.model_config(self.cir_lens()[0]).validate()?;
        self.train_config().validate()?;
        Ok(())
    }

    pub fn dataset(&self) -> &Path {
        self.dataset.as_deref().expect("resolved config has a dataset")
    }

    pub fn cir_lens(&self) -> &[usize] {
        self.cir_len.as_deref().unwrap_or(&[])
    }

    pub fn seeds(&self) -> usize {
        self.seeds.unwrap_or(0)
    }

    pub fn norm(&self) -> NormMode {
        self.norm.unwrap_or_default()
    }

    pub fn calibration_samples(&self) -> usize {
        self.calibration_samples.unwrap_or(0)
    }

    pub fn model_config(&self, cir_len: usize) -> ModelConfig {
        let mut m = ModelConfig::default()
            .with_cir_len(cir_len)
            .reference_layout(self.reference_layout.unwrap_or(false));
        if let Some(d) = self.dropout_rate {
            m.dropout_rate = d;
        }
        m
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = TrainConfig::default();
        if let Some(e) = self.epochs {
            t.epochs = e;
        }
        if let Some(b) = self.batch_size {
            t.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            t.adam.learning_rate = lr;
        }
        t.seeds = (0..self.seeds() as u64).collect();
        t
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
