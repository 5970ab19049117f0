use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::runtime::Engine;
use crate::error::{Error, Result};

pub const MIN_LATENCY_RUNS: usize = 30;
const WARMUP_RUNS: usize = 3;

/// Wall-clock inference statistics. `f_m_hz` is the reciprocal of the
/// maximum inference time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub runs: usize,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub f_m_hz: f64,
}

impl LatencyStats {
    pub fn from_durations_ms(d: &[f64]) -> Result<Self> {
        if d.is_empty() || d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "latency samples must be finite and >= 0".into(),
            ));
        }
        let max_ms = d.iter().cloned().fold(0.0, f64::max);
        Ok(LatencyStats {
            runs: d.len(),
            max_ms,
            mean_ms: d.iter().sum::<f64>() / d.len() as f64,
            min_ms: d.iter().cloned().fold(f64::INFINITY, f64::min),
            f_m_hz: 1000.0 / max_ms,
        })
    }
}

/// Times `runs` inferences, cycling through `inputs` (already quantized).
pub fn measure_latency(engine: &mut Engine, inputs: &[Vec<i8>], runs: usize) -> Result<LatencyStats> {
    if runs < MIN_LATENCY_RUNS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_LATENCY_RUNS} runs are required, got {runs}"
        )));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no inputs to time".into()));
    }
    for x in inputs.iter().cycle().take(WARMUP_RUNS) {
        engine.run(x)?;
    }
    let mut times = Vec::with_capacity(runs);
    for x in inputs.iter().cycle().take(runs) {
        let t = Instant::now();
        std::hint::black_box(engine.run(std::hint::black_box(x))?);
        times.push(t.elapsed().as_secs_f64() * 1000.0);
    }
    LatencyStats::from_durations_ms(&times)
}

/// `P = V * I`; volts and milliamps give milliwatts.
pub fn power_mw(vcc_v: f64, iabs_ma: f64) -> Result<f64> {
    if !(vcc_v > 0.0 && iabs_ma > 0.0 && vcc_v.is_finite() && iabs_ma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "supply voltage and current must be positive, got {vcc_v} V, {iabs_ma} mA"
        )));
    }
    Ok(vcc_v * iabs_ma)
}

/// Energy per inference in millijoules: `E = P / f`.
pub fn energy_per_inference(power_mw: f64, f_hz: f64) -> Result<f64> {
    if !(power_mw > 0.0 && f_hz > 0.0 && power_mw.is_finite() && f_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "power and frequency must be positive, got {power_mw} mW, {f_hz} Hz"
        )));
    }
    Ok(power_mw / f_hz)
}
