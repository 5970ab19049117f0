use serde::{Deserialize, Serialize};

use super::{CirSample, CIR_WINDOW};
use crate::error::{Error, Result};

/// CIR lengths the grid study supports.
pub const SUPPORTED_CIR_LENS: [usize; 6] = [157, 128, 64, 32, 16, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Divide by the largest absolute amplitude.
    #[default]
    MaxAbs,
    /// Divide by the L2 norm of the window.
    Energy,
}

/// Normalizes a window in place. All-zero windows are left untouched.
pub fn normalize(window: &mut [f64], mode: NormMode) {
    let denom = match mode {
        NormMode::MaxAbs => window.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        NormMode::Energy => window.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    if denom > 0.0 {
        window.iter_mut().for_each(|v| *v /= denom);
    }
}

/// Model input: the aligned window normalized as a whole, then truncated
/// to its leading `cir_len` samples.
pub fn prepare(sample: &CirSample, cir_len: usize, mode: NormMode) -> Result<Vec<f64>> {
    if !SUPPORTED_CIR_LENS.contains(&cir_len) {
        return Err(Error::InvalidArgument(format!(
            "CIR length {cir_len} not in {SUPPORTED_CIR_LENS:?}"
        )));
    }
    if sample.cir.len() < CIR_WINDOW {
        return Err(Error::Dataset(format!(
            "CIR has {} samples, need {CIR_WINDOW}",
            sample.cir.len()
        )));
    }
    let mut window = sample.cir[..CIR_WINDOW].to_vec();
    normalize(&mut window, mode);
    window.truncate(cir_len);
    Ok(window)
}

pub fn prepare_all<'a, I>(samples: I, cir_len: usize, mode: NormMode) -> Result<Vec<Vec<f64>>>
where
    I: IntoIterator<Item = &'a CirSample>,
{
    samples.into_iter().map(|s| prepare(s, cir_len, mode)).collect()
}
