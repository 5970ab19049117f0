use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QMIN: i32 = -128;
pub const QMAX: i32 = 127;

/// Smallest real span a quantized tensor may cover; degenerate ranges
/// (e.g. an all-zero tensor) are widened to this.
pub const MIN_SPAN: f64 = 1e-6;

/// Affine mapping `r = scale * (q - zero_point)` onto signed 8-bit values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f32,
    pub zero_point: i32,
}

impl QuantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Quant(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !(QMIN..=QMAX).contains(&self.zero_point) {
            return Err(Error::Quant(format!(
                "zero point {} outside the int8 range",
                self.zero_point
            )));
        }
        Ok(())
    }

    pub fn scale_f64(&self) -> f64 {
        self.scale as f64
    }

    /// Real interval representable by these parameters.
    pub fn real_range(&self) -> (f64, f64) {
        (dequantize(QMIN as i8, *self), dequantize(QMAX as i8, *self))
    }
}

/// Picks scale and zero point for a real range. The range is first
/// extended to contain 0 so that 0 is exactly representable.
///
/// * symmetric: `Z = 0`, `S = max(|min|, |max|) / 127`
/// * asymmetric: `S = (max - min) / 255`, `Z = round(-128 - min / S)`
pub fn choose_qparams(min: f64, max: f64, symmetric: bool) -> Result<QuantParams> {
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(Error::InvalidArgument(format!(
            "invalid quantization range [{min}, {max}]"
        )));
    }
    let (mut lo, mut hi) = (min.min(0.0), max.max(0.0));
    if symmetric {
        let bound = lo.abs().max(hi.abs()).max(MIN_SPAN);
        return Ok(QuantParams {
            scale: (bound / 127.0) as f32,
            zero_point: 0,
        });
    }
    if hi - lo < MIN_SPAN {
        if lo < 0.0 {
            lo = hi - MIN_SPAN;
        } else {
            hi = lo + MIN_SPAN;
        }
    }
    let scale = ((hi - lo) / 255.0) as f32;
    let zero_point = (QMIN as f64 - lo / scale as f64).round() as i32;
    Ok(QuantParams {
        scale,
        zero_point: zero_point.clamp(QMIN, QMAX),
    })
}

/// `q = clamp(round(r / S) + Z)`, rounding half away from zero.
pub fn quantize_value(r: f64, qp: QuantParams) -> i8 {
    let q = (r / qp.scale as f64).round() + qp.zero_point as f64;
    q.clamp(QMIN as f64, QMAX as f64) as i8
}

pub fn dequantize(q: i8, qp: QuantParams) -> f64 {
    qp.scale as f64 * (q as i32 - qp.zero_point) as f64
}

pub fn quantize_slice(values: &[f64], qp: QuantParams) -> Vec<i8> {
    values.iter().map(|&r| quantize_value(r, qp)).collect()
}
