//! Graph optimization and post-training int8 quantization.

mod calibrate;
mod fixed_point;
mod graph;
pub mod kernels;
mod model;
mod params;

pub use calibrate::{calibrate, RangeObserver, TensorRange, DEFAULT_CALIBRATION_SAMPLES};
pub use fixed_point::{
    rounding_divide_by_pot, saturating_rounding_doubling_high_mul, FixedPointMultiplier, MAX_SHIFT,
};
pub use graph::{
    graph_optimize, Architecture, FloatGraph, FloatNode, FloatOp, OptimizeReport, Shape, TensorId,
};
pub use model::{quantize_model, QAdd, QConv, QDense, QNode, QOp, QTensor, QuantizeReport, QuantizedModel};
pub use params::{
    choose_qparams, dequantize, quantize_slice, quantize_value, QuantParams, MIN_SPAN, QMAX, QMIN,
};
