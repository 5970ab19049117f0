use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error statistics over a set of residuals (target minus prediction, or
/// the raw range error when nothing is predicted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae_m: f64,
    /// Population standard deviation of the residuals.
    pub sigma_m: f64,
    pub mean_m: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_los_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_nlos_m: Option<f64>,
    pub n_samples: usize,
    pub n_los: usize,
    pub n_nlos: usize,
}

impl Metrics {
    pub fn from_residuals(residuals: &[f64], los: &[bool]) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::InvalidArgument("metrics over zero samples".into()));
        }
        if residuals.len() != los.len() {
            return Err(Error::Shape("residual and LOS flag counts differ".into()));
        }
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
        let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let subset = |want: bool| {
            let (sum, count) = residuals
                .iter()
                .zip(los)
                .filter(|(_, &l)| l == want)
                .fold((0.0, 0usize), |(s, c), (r, _)| (s + r.abs(), c + 1));
            ((count > 0).then(|| sum / count as f64), count)
        };
        let (mae_los_m, n_los) = subset(true);
        let (mae_nlos_m, n_nlos) = subset(false);
        Ok(Metrics {
            mae_m: mae,
            sigma_m: var.sqrt(),
            mean_m: mean,
            mae_los_m,
            mae_nlos_m,
            n_samples: residuals.len(),
            n_los,
            n_nlos,
        })
    }
}

/// Mean and spread of a metric set over training seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seeds: usize,
    pub mae_mean_m: f64,
    pub mae_std_m: f64,
    pub sigma_mean_m: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_los_mean_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_nlos_mean_m: Option<f64>,
}

impl SeedSummary {
    pub fn from_runs(runs: &[Metrics]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::InvalidArgument("no runs to summarize".into()));
        }
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&Metrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let opt_mean = |f: &dyn Fn(&Metrics) -> Option<f64>| {
            runs.iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / n)
        };
        let mae_mean = mean(&|m| m.mae_m);
        let var = runs.iter().map(|m| (m.mae_m - mae_mean).powi(2)).sum::<f64>() / n;
        Ok(SeedSummary {
            seeds: runs.len(),
            mae_mean_m: mae_mean,
            mae_std_m: var.sqrt(),
            sigma_mean_m: mean(&|m| m.sigma_m),
            mae_los_mean_m: opt_mean(&|m| m.mae_los_m),
            mae_nlos_mean_m: opt_mean(&|m| m.mae_nlos_m),
        })
    }
}
