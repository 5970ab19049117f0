use serde::{Deserialize, Serialize};

use super::CirSample;
use crate::error::{Error, Result};
use crate::train::Metrics;

/// Error statistics of the unmitigated measurements.
pub fn summary_stats(samples: &[CirSample]) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::Dataset("summary of an empty sample set".into()));
    }
    let errors: Vec<f64> = samples.iter().map(|s| s.range_error).collect();
    let los: Vec<bool> = samples.iter().map(|s| s.los).collect();
    Metrics::from_residuals(&errors, &los)
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Five-number summary plus 1.5 IQR whiskers, for box plots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("box plot of no values".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        Ok(BoxStats {
            min: v[0],
            q1,
            median: quantile(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: *v.iter().find(|&&x| x >= lo_fence).unwrap_or(&v[0]),
            whisker_high: *v
                .iter()
                .rev()
                .find(|&&x| x <= hi_fence)
                .unwrap_or(&v[v.len() - 1]),
        })
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette coefficient of a two-cluster labelling.
pub fn silhouette_two_groups(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "silhouette needs at least two points per group".into(),
        ));
    }
    let score = |own: &[[f64; 3]], other: &[[f64; 3]]| -> f64 {
        own.iter()
            .enumerate()
            .map(|(i, p)| {
                let intra = own
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| dist(p, q))
                    .sum::<f64>()
                    / (own.len() - 1) as f64;
                let inter = other.iter().map(|q| dist(p, q)).sum::<f64>() / other.len() as f64;
                let denom = intra.max(inter);
                if denom > 0.0 {
                    (inter - intra) / denom
                } else {
                    0.0
                }
            })
            .sum()
    };
    Ok((score(a, b) + score(b, a)) / (a.len() + b.len()) as f64)
}
