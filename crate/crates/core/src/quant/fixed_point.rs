use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer form of a real multiplier `M = m0 * 2^-31 * 2^-shift` with the
/// mantissa `m0 * 2^-31` in `[0.5, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointMultiplier {
    pub m0: i32,
    pub shift: u32,
}

pub const MAX_SHIFT: u32 = 31;

impl FixedPointMultiplier {
    /// Decomposes `0 < m < 1`. Multipliers below `2^-32` round every int32
    /// input to zero and are stored as `m0 = 0`.
    pub fn from_real(m: f64) -> Result<Self> {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fixed-point multiplier must lie in (0, 1), got {m}"
            )));
        }
        let mut exp = m.log2().floor() as i32 + 1;
        let mut mant = m / 2f64.powi(exp);
        // Guard against log2 rounding at exact powers of two.
        while mant >= 1.0 {
            mant /= 2.0;
            exp += 1;
        }
        while mant < 0.5 {
            mant *= 2.0;
            exp -= 1;
        }
        let mut shift = -exp;
        let mut m0 = (mant * (1u64 << 31) as f64).round() as i64;
        if m0 == 1i64 << 31 {
            m0 /= 2;
            shift -= 1;
        }
        if shift < 0 {
            return Ok(FixedPointMultiplier {
                m0: i32::MAX,
                shift: 0,
            });
        }
        if shift as u32 > MAX_SHIFT {
            return Ok(FixedPointMultiplier { m0: 0, shift: 0 });
        }
        Ok(FixedPointMultiplier {
            m0: m0 as i32,
            shift: shift as u32,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.shift > MAX_SHIFT || self.m0 < 0 || (self.m0 != 0 && self.m0 < 1 << 30) {
            return Err(Error::Quant(format!(
                "multiplier (m0 = {}, shift = {}) is not normalized",
                self.m0, self.shift
            )));
        }
        Ok(())
    }

    pub fn to_real(&self) -> f64 {
        self.m0 as f64 / (1u64 << 31) as f64 / 2f64.powi(self.shift as i32)
    }

    /// `x * M` via a rounding doubling high multiply followed by a
    /// rounding right shift. Both steps round half away from zero.
    #[inline]
    pub fn apply(&self, x: i32) -> i32 {
        rounding_divide_by_pot(saturating_rounding_doubling_high_mul(x, self.m0), self.shift)
    }
}

/// High 32 bits of `2 * a * b`, rounded half away from zero.
#[inline]
pub fn saturating_rounding_doubling_high_mul(a: i32, b: i32) -> i32 {
    if a == i32::MIN && b == i32::MIN {
        return i32::MAX;
    }
    let ab = a as i64 * b as i64;
    let nudge: i64 = if ab >= 0 { 1 << 30 } else { -(1 << 30) };
    ((ab + nudge) / (1i64 << 31)) as i32
}

/// `x / 2^exponent`, rounded half away from zero.
#[inline]
pub fn rounding_divide_by_pot(x: i32, exponent: u32) -> i32 {
    debug_assert!(exponent <= MAX_SHIFT);
    let x = x as i64;
    let mask = (1i64 << exponent) - 1;
    let remainder = x & mask;
    let threshold = (mask >> 1) + i64::from(x < 0);
    ((x >> exponent) + i64::from(remainder > threshold)) as i32
}
