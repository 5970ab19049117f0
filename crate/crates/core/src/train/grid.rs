use serde::Serialize;

use super::{evaluate, train, Metrics, PreparedSet, SeedSummary, TrainConfig};
use crate::dataset::{BoxStats, CirSample, NormMode, SplitSpec};
use crate::error::Result;
use crate::model::{ModelConfig, RemnetWeights};

#[derive(Debug, Clone, Serialize)]
pub struct GridOutcome {
    pub summary: SeedSummary,
    pub runs: Vec<Metrics>,
    /// Absolute residuals pooled over all seeds.
    pub abs_residuals: BoxStats,
    #[serde(skip)]
    pub models: Vec<RemnetWeights>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub cir_len: usize,
    pub outcome: std::result::Result<GridOutcome, String>,
}

fn run_one(
    samples: &[CirSample],
    split: &SplitSpec,
    cir_len: usize,
    model: ModelConfig,
    train_config: &TrainConfig,
    norm: NormMode,
) -> Result<GridOutcome> {
    let cfg = model.with_cir_len(cir_len);
    let train_set = PreparedSet::from_samples(split.train_samples(samples), cir_len, norm)?;
    let test_set = PreparedSet::from_samples(split.test_samples(samples), cir_len, norm)?;
    let mut runs = Vec::new();
    let mut residuals = Vec::new();
    let mut models = Vec::new();
    for &seed in &train_config.seeds {
        let mut weights = RemnetWeights::build(cfg, seed)?;
        train(&mut weights, &train_set, train_config, seed)?;
        let eval = evaluate(&weights, &test_set)?;
        residuals.extend(eval.abs_residuals(&test_set));
        runs.push(eval.metrics);
        models.push(weights);
    }
    Ok(GridOutcome {
        summary: SeedSummary::from_runs(&runs)?,
        runs,
        abs_residuals: BoxStats::from_values(&residuals)?,
        models,
    })
}

/// Trains and evaluates REMNet for each CIR length. A failure for one
/// length is recorded in its row and the remaining lengths still run.
pub fn cir_grid_study(
    samples: &[CirSample],
    split: &SplitSpec,
    cir_lens: &[usize],
    model: ModelConfig,
    train_config: &TrainConfig,
    norm: NormMode,
) -> Vec<GridRow> {
    cir_lens
        .iter()
        .map(|&cir_len| GridRow {
            cir_len,
            outcome: run_one(samples, split, cir_len, model, train_config, norm).map_err(|e| e.to_string()),
        })
        .collect()
}
