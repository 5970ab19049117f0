use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::trainer::{batch_gradients, PreparedSet};
use crate::error::{Error, Result};
use crate::model::Regressor;
use crate::nn::{AdamConfig, AdamState};

/// One optimization step at a given learning rate, returning the loss
/// measured before the update.
pub trait StepObjective {
    fn step(&mut self, learning_rate: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct LrRangeOptions {
    pub steps: usize,
    /// Exponential smoothing factor applied to the loss.
    pub smoothing: f64,
    /// Stop once the smoothed loss exceeds this multiple of its minimum.
    pub divergence_factor: f64,
}

impl Default for LrRangeOptions {
    fn default() -> Self {
        LrRangeOptions {
            steps: 100,
            smoothing: 0.9,
            divergence_factor: 4.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LrCurve {
    pub learning_rates: Vec<f64>,
    pub losses: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// Learning rate where the smoothed loss falls fastest per log-step.
    pub suggested: Option<f64>,
    pub truncated: bool,
}

/// Exponential learning-rate sweep from `lr_min` to `lr_max`.
pub fn lr_range_test(
    objective: &mut dyn StepObjective,
    lr_min: f64,
    lr_max: f64,
    options: LrRangeOptions,
) -> Result<LrCurve> {
    if !(lr_min > 0.0 && lr_max > 0.0 && lr_min < lr_max) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < lr_min < lr_max, got {lr_min}, {lr_max}"
        )));
    }
    if options.steps < 2 {
        return Err(Error::InvalidArgument("range test needs at least 2 steps".into()));
    }
    if !(0.0..1.0).contains(&options.smoothing) {
        return Err(Error::InvalidArgument("smoothing must be in [0, 1)".into()));
    }
    let ratio = (lr_max / lr_min).ln();
    let mut curve = LrCurve {
        learning_rates: Vec::with_capacity(options.steps),
        losses: Vec::with_capacity(options.steps),
        smoothed: Vec::with_capacity(options.steps),
        suggested: None,
        truncated: false,
    };
    let mut avg = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..options.steps {
        let lr = lr_min * (ratio * i as f64 / (options.steps - 1) as f64).exp();
        let loss = objective.step(lr)?;
        if !loss.is_finite() {
            curve.truncated = true;
            break;
        }
        avg = options.smoothing * avg + (1.0 - options.smoothing) * loss;
        let smoothed = avg / (1.0 - options.smoothing.powi(i as i32 + 1));
        curve.learning_rates.push(lr);
        curve.losses.push(loss);
        curve.smoothed.push(smoothed);
        best = best.min(smoothed);
        if smoothed > options.divergence_factor * best {
            curve.truncated = true;
            break;
        }
    }
    curve.suggested = curve
        .smoothed
        .windows(2)
        .zip(curve.learning_rates.windows(2))
        .map(|(s, lr)| (s[1] - s[0]) / (lr[1].ln() - lr[0].ln()))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .filter(|&(_, slope)| slope < 0.0)
        .map(|(i, _)| curve.learning_rates[i]);
    Ok(curve)
}

/// Range-test objective that trains a copy of a network with Adam,
/// cycling through shuffled mini-batches.
pub struct NetworkObjective<'a, M: Regressor> {
    model: M,
    adam: AdamState,
    data: &'a PreparedSet,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl<'a, M: Regressor> NetworkObjective<'a, M> {
    pub fn new(
        model: M,
        adam: AdamConfig,
        data: &'a PreparedSet,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if data.is_empty() || batch_size == 0 {
            return Err(Error::InvalidArgument(
                "range test needs data and a batch size".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        Ok(NetworkObjective {
            adam: AdamState::new(&model, adam),
            model,
            data,
            batch_size,
            order,
            cursor: 0,
            rng,
        })
    }
}

impl<M: Regressor> StepObjective for NetworkObjective<'_, M> {
    fn step(&mut self, learning_rate: f64) -> Result<f64> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        let (loss, grads) = batch_gradients(&self.model, self.data, &batch, &mut self.rng, 1.0)?;
        if !loss.is_finite() {
            return Ok(loss);
        }
        self.adam.config.learning_rate = learning_rate;
        self.adam.update(&mut self.model, &grads)?;
        Ok(loss)
    }
}
