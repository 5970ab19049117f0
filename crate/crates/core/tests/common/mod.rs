#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remnet_core::model::{ModelConfig, RemnetWeights};
use remnet_core::nn::Parameters;
use remnet_core::quant::{
    calibrate, graph_optimize, quantize_model, Architecture, FixedPointMultiplier, FloatGraph, QConv, QDense,
    QNode, QOp, QTensor, QuantParams, QuantizedModel, Shape,
};

pub fn uniform_inputs(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// REMNet with jittered weights and biases so no bias is trivially zero.
pub fn jittered_remnet(config: ModelConfig, seed: u64) -> RemnetWeights {
    let mut w = RemnetWeights::build(config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    for p in w.param_slices_mut() {
        for v in p.iter_mut() {
            *v += rng.random_range(-0.03..0.03);
        }
    }
    w
}

pub struct Pipeline {
    pub reference: FloatGraph,
    pub optimized: FloatGraph,
    pub quantized: QuantizedModel,
}

pub fn pipeline(w: &RemnetWeights, calibration: &[Vec<f64>]) -> Pipeline {
    let reference = FloatGraph::from_remnet(w).unwrap();
    let (optimized, _) = graph_optimize(&reference).unwrap();
    let ranges = calibrate(&optimized, calibration).unwrap();
    let (quantized, _) = quantize_model(&optimized, &ranges).unwrap();
    Pipeline {
        reference,
        optimized,
        quantized,
    }
}

pub fn remnet_pipeline(cir_len: usize, seed: u64) -> Pipeline {
    let w = jittered_remnet(
        ModelConfig::default()
            .with_cir_len(cir_len)
            .reference_layout(true),
        seed,
    );
    pipeline(&w, &uniform_inputs(32, cir_len, seed + 1))
}

/// Small hand-written int8 model: stride-2 conv with ReLU, then dense.
pub fn toy_model() -> QuantizedModel {
    let qp_in = QuantParams {
        scale: 0.0078125,
        zero_point: -3,
    };
    let qp_mid = QuantParams {
        scale: 0.015625,
        zero_point: -128,
    };
    let qp_out = QuantParams {
        scale: 0.03125,
        zero_point: 10,
    };
    let (w1_scale, w2_scale) = (0.0625f32, 0.125f32);
    let m = |a: f32, b: f32, c: f32| FixedPointMultiplier::from_real(a as f64 * b as f64 / c as f64).unwrap();
    QuantizedModel {
        architecture: Architecture::Custom,
        tensors: vec![
            QTensor {
                shape: Shape::new(5, 1),
                qparams: qp_in,
            },
            QTensor {
                shape: Shape::new(3, 2),
                qparams: qp_mid,
            },
            QTensor {
                shape: Shape::new(1, 1),
                qparams: qp_out,
            },
        ],
        nodes: vec![
            QNode {
                op: QOp::Conv(QConv {
                    kernel_size: 3,
                    in_channels: 1,
                    out_channels: 2,
                    stride: 2,
                    relu: true,
                    weights: vec![12, -7, 31, 5, -127, 64],
                    weight_scale: w1_scale,
                    bias: Some(vec![40, -300]),
                    multiplier: m(qp_in.scale, w1_scale, qp_mid.scale),
                }),
                inputs: vec![0],
                output: 1,
            },
            QNode {
                op: QOp::Dense(QDense {
                    in_dim: 6,
                    out_dim: 1,
                    relu: false,
                    weights: vec![17, -90, 3, 127, -45, 8],
                    weight_scale: w2_scale,
                    bias: vec![-1234],
                    multiplier: m(qp_mid.scale, w2_scale, qp_out.scale),
                }),
                inputs: vec![1],
                output: 2,
            },
        ],
        input: 0,
        output: 2,
    }
}
