use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Metrics;
use crate::dataset::{prepare, CirSample, NormMode};
use crate::error::{Error, Result};
use crate::model::Regressor;
use crate::nn::{mae_sign, AdamConfig, AdamState, DropoutMask, Gradients};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            adam: AdamConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if self.adam.learning_rate < 0.0 || !self.adam.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.adam.learning_rate
            )));
        }
        Ok(())
    }
}

/// Model inputs with their regression targets and LOS flags.
#[derive(Debug, Clone, Default)]
pub struct PreparedSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub los: Vec<bool>,
}

impl PreparedSet {
    pub fn from_samples<'a, I>(samples: I, cir_len: usize, norm: NormMode) -> Result<Self>
    where
        I: IntoIterator<Item = &'a CirSample>,
    {
        let mut set = PreparedSet::default();
        for s in samples {
            set.inputs.push(prepare(s, cir_len, norm)?);
            set.targets.push(s.range_error);
            set.los.push(s.los);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> PreparedSet {
        PreparedSet {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            los: idx.iter().map(|&i| self.los[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub seed: u64,
    /// Mean training-mode MAE per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Mean-absolute-error loss and summed gradients of one batch. `scale`
/// multiplies the loss (and therefore every gradient).
pub(crate) fn batch_gradients<M: Regressor>(
    model: &M,
    set: &PreparedSet,
    batch: &[usize],
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;
    let n = batch.len() as f64;
    for &i in batch {
        let mask = DropoutMask::sample(rng, model.dropout_len(), model.dropout_rate());
        let (y, trace) = model.forward_train(&set.inputs[i], &mask)?;
        let residual = y - set.targets[i];
        loss += residual.abs();
        let g = model.backward(&trace, scale * mae_sign(residual) / n)?;
        grads.accumulate(&g)?;
    }
    Ok((scale * loss / n, grads))
}

/// Trains in place with Adam on the MAE loss. Batches are reshuffled every
/// epoch from the run seed; the last partial batch is kept.
pub fn train<M: Regressor>(
    model: &mut M,
    set: &PreparedSet,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainHistory> {
    config.validate()?;
    if set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if let Some(x) = set.inputs.iter().find(|x| x.len() != model.input_len()) {
        return Err(Error::Shape(format!(
            "model takes {} inputs, data has {}",
            model.input_len(),
            x.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_da7a);
    let mut adam = AdamState::new(model, config.adam);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut history = TrainHistory {
        seed,
        epoch_loss: Vec::with_capacity(config.epochs),
    };
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let (loss, grads) = batch_gradients(model, set, batch, &mut rng, 1.0)?;
            if !loss.is_finite() || grads.iter_values().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, step, loss });
            }
            adam.update(model, &grads)?;
            total += loss * batch.len() as f64;
        }
        history.epoch_loss.push(total / set.len() as f64);
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub predictions: Vec<f64>,
}

impl Evaluation {
    pub fn abs_residuals(&self, set: &PreparedSet) -> Vec<f64> {
        set.targets
            .iter()
            .zip(&self.predictions)
            .map(|(t, p)| (t - p).abs())
            .collect()
    }
}

/// Metrics of externally produced predictions (e.g. the int8 engine).
pub fn evaluate_predictions(predictions: Vec<f64>, set: &PreparedSet) -> Result<Evaluation> {
    if predictions.len() != set.len() {
        return Err(Error::Shape("one prediction per sample is required".into()));
    }
    let residuals: Vec<f64> = set.targets.iter().zip(&predictions).map(|(t, p)| t - p).collect();
    Ok(Evaluation {
        metrics: Metrics::from_residuals(&residuals, &set.los)?,
        predictions,
    })
}

pub fn evaluate<M: Regressor>(model: &M, set: &PreparedSet) -> Result<Evaluation> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    evaluate_predictions(model.predict_batch(&set.inputs)?, set)
}
