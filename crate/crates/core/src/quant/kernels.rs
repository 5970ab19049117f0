//! Integer-only kernels. Inputs are int8 with an asymmetric zero point,
//! weights are symmetric int8, accumulators are int32.

use super::fixed_point::{rounding_divide_by_pot, FixedPointMultiplier};
use super::params::{QMAX, QMIN};
use crate::nn::same_padding;

#[inline]
fn saturate(v: i32) -> i8 {
    v.clamp(QMIN, QMAX) as i8
}

/// Scales an int32 accumulator to the output grid, saturates and applies
/// the fused ReLU as `max(q, Z_out)`.
#[inline]
pub fn requantize(acc: i32, m: FixedPointMultiplier, zp_out: i32, relu: bool) -> i8 {
    let q = saturate(m.apply(acc).saturating_add(zp_out));
    if relu {
        q.max(zp_out as i8)
    } else {
        q
    }
}

/// Layer parameters shared by the conv and dense kernels.
#[derive(Debug, Clone, Copy)]
pub struct LinearArgs<'a> {
    pub weights: &'a [i8],
    pub bias: Option<&'a [i32]>,
    pub zp_in: i32,
    pub zp_out: i32,
    pub multiplier: FixedPointMultiplier,
    pub relu: bool,
}

/// Geometry of a "same"-padded 1-D convolution.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub in_len: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn out_len(&self) -> usize {
        self.in_len.div_ceil(self.stride)
    }
}

/// Padded taps contribute nothing, i.e. they read as the input zero point.
pub fn conv(input: &[i8], g: &ConvGeometry, a: &LinearArgs, output: &mut [i8]) {
    let (cin, cout) = (g.in_channels, g.out_channels);
    let out_len = g.out_len();
    debug_assert_eq!(input.len(), g.in_len * cin);
    debug_assert_eq!(output.len(), out_len * cout);
    let (pad_left, _) = same_padding(g.in_len, g.kernel_size, g.stride);
    for o in 0..out_len {
        let start = (o * g.stride) as isize - pad_left as isize;
        let t0 = (-start).max(0) as usize;
        let t1 = g.kernel_size.min((g.in_len as isize - start).max(0) as usize);
        for c in 0..cout {
            let mut acc = a.bias.map_or(0, |b| b[c]);
            for tap in t0..t1 {
                let pos = (start + tap as isize) as usize;
                let x = &input[pos * cin..(pos + 1) * cin];
                let w = &a.weights[tap * cin * cout..(tap + 1) * cin * cout];
                for (i, &xv) in x.iter().enumerate() {
                    acc += w[i * cout + c] as i32 * (xv as i32 - a.zp_in);
                }
            }
            output[o * cout + c] = requantize(acc, a.multiplier, a.zp_out, a.relu);
        }
    }
}

/// Weights laid out `[in][out]`.
pub fn dense(input: &[i8], a: &LinearArgs, output: &mut [i8]) {
    let out_dim = output.len();
    debug_assert_eq!(a.weights.len(), input.len() * out_dim);
    for (j, out) in output.iter_mut().enumerate() {
        let mut acc = a.bias.map_or(0, |b| b[j]);
        for (i, &xv) in input.iter().enumerate() {
            acc += a.weights[i * out_dim + j] as i32 * (xv as i32 - a.zp_in);
        }
        *out = requantize(acc, a.multiplier, a.zp_out, a.relu);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AddArgs {
    pub zp_a: i32,
    pub zp_b: i32,
    pub zp_out: i32,
    pub multiplier_a: FixedPointMultiplier,
    pub multiplier_b: FixedPointMultiplier,
    /// Bits taken from the sum's fractional part so that both multipliers
    /// stay below one; the sum is in units of `S_out / 2^(16 - headroom)`.
    pub headroom: u32,
    pub relu: bool,
}

/// Extra fractional bits carried by the rescaled addends.
pub const ADD_FRACTION_BITS: u32 = 16;

/// Both addends are shifted left by [`ADD_FRACTION_BITS`], rescaled onto
/// the common grid `S_out / 2^(16 - headroom)`, summed in int32 and
/// rounded once before the output zero point is added.
pub fn add(a: &[i8], b: &[i8], args: &AddArgs, output: &mut [i8]) {
    debug_assert!(a.len() == b.len() && a.len() == output.len());
    for ((out, &x), &y) in output.iter_mut().zip(a).zip(b) {
        let xa = args
            .multiplier_a
            .apply((x as i32 - args.zp_a) << ADD_FRACTION_BITS);
        let yb = args
            .multiplier_b
            .apply((y as i32 - args.zp_b) << ADD_FRACTION_BITS);
        let s = rounding_divide_by_pot(xa + yb, ADD_FRACTION_BITS - args.headroom) + args.zp_out;
        let q = saturate(s);
        *out = if args.relu { q.max(args.zp_out as i8) } else { q };
    }
}
