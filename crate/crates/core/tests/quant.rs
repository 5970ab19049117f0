mod calibrate {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use remnet_core::model::{ModelConfig, RemnetWeights};
    use remnet_core::quant::graph_optimize;
    use remnet_core::quant::*;

    fn fused(seed: u64) -> FloatGraph {
        let cfg = ModelConfig::default().with_cir_len(32);
        let w = RemnetWeights::build(cfg, seed).unwrap();
        graph_optimize(&FloatGraph::from_remnet(&w).unwrap()).unwrap().0
    }

    fn inputs(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..32).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn empty_set_rejected() {
        assert!(calibrate(&fused(1), &[]).is_err());
    }

    #[test]
    fn zero_inputs_give_minimal_span() {
        let g = fused(1);
        let ranges = calibrate(&g, &vec![vec![0.0; 32]; 4]).unwrap();
        // Zero biases and zero input: every activation is exactly zero.
        for r in ranges {
            assert_eq!(r.min, 0.0);
            assert_eq!(r.max, MIN_SPAN);
        }
    }

    #[test]
    fn matches_brute_force() {
        let g = fused(2);
        let xs = inputs(10, 3);
        let ranges = calibrate(&g, &xs).unwrap();
        let mut lo = vec![f64::INFINITY; g.tensors.len()];
        let mut hi = vec![f64::NEG_INFINITY; g.tensors.len()];
        for x in &xs {
            for (i, t) in g.forward_all(x).unwrap().iter().enumerate() {
                for &v in t.data() {
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
            }
        }
        for (i, r) in ranges.iter().enumerate() {
            assert_eq!((r.min, r.max), (lo[i], hi[i]), "tensor {i}");
        }
    }

    #[test]
    fn ranges_grow_monotonically() {
        let g = fused(4);
        let mut obs = RangeObserver::new(&g);
        let mut prev: Option<Vec<TensorRange>> = None;
        for x in inputs(12, 5) {
            obs.observe(&g, &x).unwrap();
            let cur = obs.observed().to_vec();
            if let Some(p) = &prev {
                for (a, b) in p.iter().zip(&cur) {
                    assert!(b.min <= a.min && b.max >= a.max);
                }
            }
            prev = Some(cur);
        }
    }
}

mod fixed_point {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use remnet_core::quant::*;

    #[test]
    fn powers_of_two() {
        assert_eq!(
            FixedPointMultiplier::from_real(0.5).unwrap(),
            FixedPointMultiplier {
                m0: 1 << 30,
                shift: 0
            }
        );
        assert_eq!(
            FixedPointMultiplier::from_real(0.25).unwrap(),
            FixedPointMultiplier {
                m0: 1 << 30,
                shift: 1
            }
        );
    }

    #[test]
    fn rejects_out_of_range() {
        for m in [0.0, -0.5, 1.0, 1.5, f64::NAN] {
            assert!(FixedPointMultiplier::from_real(m).is_err());
        }
    }

    #[test]
    fn reconstruction_error_is_tiny() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let m: f64 = 2f64.powf(rng.random_range(-30.0..-1e-6));
            let f = FixedPointMultiplier::from_real(m).unwrap();
            f.validate().unwrap();
            assert!(((f.to_real() - m) / m).abs() <= 2f64.powi(-31), "{m}");
        }
    }

    /// Exact rational reference: round-half-away(n / d) in 128-bit.
    fn div_round_away(n: i128, d: i128) -> i128 {
        let q = n / d;
        let r = n % d;
        if 2 * r.abs() >= d {
            q + n.signum()
        } else {
            q
        }
    }

    #[test]
    fn matches_wide_precision_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = FixedPointMultiplier::from_real(0.3).unwrap();
        for _ in 0..10_000 {
            let x: i32 = rng.random();
            let got = f.apply(x);
            // Same two-stage recipe, computed with 128-bit exact arithmetic.
            let high = if x == i32::MIN && f.m0 == i32::MIN {
                i32::MAX as i128
            } else {
                div_round_away(2 * x as i128 * f.m0 as i128, 1i128 << 32)
            };
            let expected = div_round_away(high, 1i128 << f.shift);
            assert_eq!(got as i128, expected, "x = {x}");
            // And within one count of the exact real product.
            let exact = (x as f64 * 0.3).round();
            assert!((got as f64 - exact).abs() <= 1.0, "x = {x}");
        }
    }

    #[test]
    fn rounding_shift_ties_away_from_zero() {
        assert_eq!(rounding_divide_by_pot(5, 1), 3);
        assert_eq!(rounding_divide_by_pot(-5, 1), -3);
        assert_eq!(rounding_divide_by_pot(4, 1), 2);
        assert_eq!(rounding_divide_by_pot(-7, 2), -2);
        assert_eq!(rounding_divide_by_pot(i32::MAX, 31), 1);
        assert_eq!(rounding_divide_by_pot(i32::MIN, 31), -1);
    }

    #[test]
    fn high_mul_ties_away_from_zero() {
        // a * b = +-2^30 and +-3 * 2^30 are exact halves of 2^31.
        assert_eq!(saturating_rounding_doubling_high_mul(1 << 15, 1 << 15), 1);
        assert_eq!(saturating_rounding_doubling_high_mul(-(1 << 15), 1 << 15), -1);
        assert_eq!(saturating_rounding_doubling_high_mul(3 << 15, 1 << 15), 2);
        assert_eq!(saturating_rounding_doubling_high_mul(-(3 << 15), 1 << 15), -2);
        assert_eq!(saturating_rounding_doubling_high_mul(-(1 << 14), 1 << 15), 0);
    }
}

mod graph {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use remnet_core::model::MlpWeights;
    use remnet_core::model::ModelConfig;
    use remnet_core::model::Regressor;
    use remnet_core::model::RemnetWeights;
    use remnet_core::nn::Activation;
    use remnet_core::nn::ConvKernel;
    use remnet_core::nn::DenseLayer;
    use remnet_core::quant::*;

    fn random_inputs(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn randomize_biases(w: &mut RemnetWeights, seed: u64) {
        use remnet_core::nn::Parameters;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in w.param_slices_mut() {
            for v in p.iter_mut() {
                *v += rng.random_range(-0.05..0.05);
            }
        }
    }

    #[test]
    fn reference_graph_matches_model() {
        let mut w = RemnetWeights::build(ModelConfig::default(), 3).unwrap();
        randomize_biases(&mut w, 4);
        let g = FloatGraph::from_remnet(&w).unwrap();
        assert_eq!(g.param_count(), remnet_core::nn::Parameters::param_count(&w));
        for x in random_inputs(5, 157, 1) {
            assert_eq!(g.predict(&x).unwrap(), w.predict(&x).unwrap());
        }
    }

    #[test]
    fn optimize_remnet() {
        let mut w = RemnetWeights::build(ModelConfig::default(), 5).unwrap();
        randomize_biases(&mut w, 6);
        let g = FloatGraph::from_remnet(&w).unwrap();
        let (opt, report) = graph_optimize(&g).unwrap();
        assert_eq!(report.dropout_removed, 1);
        assert_eq!(report.flatten_removed, 1);
        assert_eq!(report.relu_fused, 1 + 2 * 3);
        assert!(opt
            .nodes
            .iter()
            .all(|n| !matches!(n.op, FloatOp::Relu | FloatOp::Dropout { .. } | FloatOp::Flatten)));
        assert!(opt.nodes.len() < g.nodes.len());
        for x in random_inputs(20, 157, 2) {
            let d = (opt.predict(&x).unwrap() - g.predict(&x).unwrap()).abs();
            assert!(d < 1e-5, "{d}");
        }
    }

    #[test]
    fn optimize_mlp() {
        let w = MlpWeights::build(20, &[8, 4], 0.2, 1).unwrap();
        let g = FloatGraph::from_mlp(&w).unwrap();
        let (opt, report) = graph_optimize(&g).unwrap();
        assert_eq!(report.relu_fused, 2);
        assert_eq!(report.dropout_removed, 1);
        assert_eq!(opt.nodes.len(), 3);
        for x in random_inputs(10, 20, 3) {
            assert!((opt.predict(&x).unwrap() - w.predict(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_graph_without_relu_or_dropout_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = FloatGraph::new(Architecture::Custom, Shape::new(12, 1));
        let c = g
            .push(
                FloatOp::Conv(ConvKernel::he_init(&mut rng, 3, 1, 4, 2, Activation::None, true).unwrap()),
                &[0],
            )
            .unwrap();
        g.push(
            FloatOp::Dense {
                layer: DenseLayer::he_init(&mut rng, 24, 1),
                activation: Activation::None,
            },
            &[c],
        )
        .unwrap();
        let (opt, report) = graph_optimize(&g).unwrap();
        assert!(!report.changed());
        assert_eq!(opt, g);
    }

    #[test]
    fn folds_linear_dense_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut g = FloatGraph::new(Architecture::Custom, Shape::new(6, 1));
        let mut a = DenseLayer::he_init(&mut rng, 6, 5);
        a.bias = vec![0.1, -0.2, 0.3, 0.0, 0.05];
        let mut b = DenseLayer::he_init(&mut rng, 5, 2);
        b.bias = vec![0.4, -0.1];
        let t = g
            .push(
                FloatOp::Dense {
                    layer: a,
                    activation: Activation::None,
                },
                &[0],
            )
            .unwrap();
        g.push(
            FloatOp::Dense {
                layer: b,
                activation: Activation::Relu,
            },
            &[t],
        )
        .unwrap();
        let (opt, report) = graph_optimize(&g).unwrap();
        assert_eq!(report.dense_folded, 1);
        assert_eq!(opt.nodes.len(), 1);
        for x in random_inputs(10, 6, 11) {
            let (ya, yb) = (g.forward(&x).unwrap(), opt.forward(&x).unwrap());
            for (p, q) in ya.data().iter().zip(yb.data()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn removes_dead_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut g = FloatGraph::new(Architecture::Custom, Shape::new(8, 1));
        let conv = |rng: &mut ChaCha8Rng| {
            FloatOp::Conv(ConvKernel::he_init(rng, 3, 1, 2, 1, Activation::None, true).unwrap())
        };
        let live = g.push(conv(&mut rng), &[0]).unwrap();
        g.push(conv(&mut rng), &[0]).unwrap();
        g.output = live;
        let (opt, report) = graph_optimize(&g).unwrap();
        assert_eq!(report.dead_removed, 1);
        assert_eq!(opt.nodes.len(), 1);
        assert_eq!(opt.tensors.len(), 2);
    }

    #[test]
    fn push_rejects_bad_shapes() {
        let mut g = FloatGraph::new(Architecture::Custom, Shape::new(8, 2));
        assert!(g
            .push(
                FloatOp::Dense {
                    layer: DenseLayer::zeros(15, 1),
                    activation: Activation::None
                },
                &[0]
            )
            .is_err());
        assert!(g
            .push(
                FloatOp::Add {
                    activation: Activation::None
                },
                &[0]
            )
            .is_err());
        assert!(g.push(FloatOp::Relu, &[3]).is_err());
    }
}

mod model {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use remnet_core::model::{ModelConfig, RemnetWeights};
    use remnet_core::nn::Activation;
    use remnet_core::nn::{ConvKernel, DenseLayer, Parameters};
    use remnet_core::quant::*;
    use remnet_core::quant::{calibrate, graph_optimize};

    fn inputs(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn quantized_remnet(cir_len: usize, seed: u64) -> (FloatGraph, QuantizedModel) {
        let mut w = RemnetWeights::build(ModelConfig::default().with_cir_len(cir_len), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for p in w.param_slices_mut() {
            for v in p.iter_mut() {
                *v += rng.random_range(-0.02..0.02);
            }
        }
        let (g, _) = graph_optimize(&FloatGraph::from_remnet(&w).unwrap()).unwrap();
        let ranges = calibrate(&g, &inputs(64, cir_len, seed + 1)).unwrap();
        let (q, _) = quantize_model(&g, &ranges).unwrap();
        (g, q)
    }

    #[test]
    fn identity_pointwise_conv() {
        let qp = QuantParams {
            scale: 0.02,
            zero_point: -5,
        };
        let model = QuantizedModel {
            architecture: Architecture::Custom,
            tensors: vec![
                QTensor {
                    shape: Shape::new(10, 1),
                    qparams: qp,
                },
                QTensor {
                    shape: Shape::new(10, 1),
                    qparams: qp,
                },
            ],
            nodes: vec![QNode {
                op: QOp::Conv(QConv {
                    kernel_size: 1,
                    in_channels: 1,
                    out_channels: 1,
                    stride: 1,
                    relu: false,
                    weights: vec![127],
                    weight_scale: 1.0 / 127.0,
                    bias: None,
                    multiplier: FixedPointMultiplier::from_real(
                        0.02f32 as f64 * (1.0f32 / 127.0) as f64 / 0.02f32 as f64,
                    )
                    .unwrap(),
                }),
                inputs: vec![0],
                output: 1,
            }],
            input: 0,
            output: 1,
        };
        model.validate().unwrap();
        let x: Vec<i8> = vec![-128, -100, -5, 0, 1, 7, 50, 99, 126, 127];
        assert_eq!(model.int_forward(&x).unwrap().0, x);
    }

    #[test]
    fn zero_weight_layer() {
        let mut g = FloatGraph::new(Architecture::Custom, Shape::new(4, 1));
        g.push(
            FloatOp::Dense {
                layer: DenseLayer::zeros(4, 2),
                activation: Activation::None,
            },
            &[0],
        )
        .unwrap();
        let ranges = calibrate(&g, &inputs(5, 4, 1)).unwrap();
        let (q, report) = quantize_model(&g, &ranges).unwrap();
        let QOp::Dense(d) = &q.nodes[0].op else { panic!() };
        assert!(d.weights.iter().all(|&w| w == 0));
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn dequantized_weights_within_half_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = ConvKernel::he_init(&mut rng, 3, 2, 4, 1, Activation::Relu, true).unwrap();
        let mut g = FloatGraph::new(Architecture::Custom, Shape::new(8, 2));
        g.push(FloatOp::Conv(k.clone()), &[0]).unwrap();
        let ranges = calibrate(&g, &inputs(5, 16, 2)).unwrap();
        let (q, _) = quantize_model(&g, &ranges).unwrap();
        let QOp::Conv(c) = &q.nodes[0].op else { panic!() };
        let s = c.weight_scale as f64;
        for (&wq, &w) in c.weights.iter().zip(&k.weights) {
            assert!((wq as f64 * s - w).abs() <= s / 2.0 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn remnet_int8_tracks_float() {
        let (g, q) = quantized_remnet(64, 7);
        // Untrained weights fed with uniform noise: errors compound over the
        // layers, so only a loose fraction of the output span is asserted.
        let (lo, hi) = q.output_qparams().real_range();
        for x in inputs(50, 64, 8) {
            let d = (q.predict(&x).unwrap() - g.predict(&x).unwrap()).abs();
            assert!(d <= 0.05 * (hi - lo), "diff {d}, span {}", hi - lo);
        }
    }

    #[test]
    fn deterministic() {
        let (_, q) = quantized_remnet(32, 9);
        let x = q.quantize_input(&inputs(1, 32, 10)[0]).unwrap();
        assert_eq!(q.int_forward(&x).unwrap(), q.int_forward(&x).unwrap());
    }

    #[test]
    fn validate_rejects_inconsistent_models() {
        let (_, q) = quantized_remnet(32, 11);
        let mut bad = q.clone();
        if let QOp::Conv(c) = &mut bad.nodes[0].op {
            c.multiplier.m0 += 1;
        }
        assert!(bad.validate().is_err());

        let mut bad = q.clone();
        bad.nodes.swap(0, 1);
        assert!(bad.validate().is_err());

        let mut bad = q.clone();
        if let QOp::Conv(c) = &mut bad.nodes[0].op {
            c.weights.pop();
        }
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unoptimized_graph_rejected() {
        let w = RemnetWeights::build(ModelConfig::default().with_cir_len(16), 1).unwrap();
        let g = FloatGraph::from_remnet(&w).unwrap();
        let ranges = calibrate(&g, &inputs(3, 16, 1)).unwrap();
        assert!(quantize_model(&g, &ranges).is_err());
    }
}

mod params {
    use proptest::prelude::*;
    use remnet_core::quant::*;

    #[test]
    fn symmetric_unit_range() {
        let qp = choose_qparams(-1.0, 1.0, true).unwrap();
        assert_eq!(qp.zero_point, 0);
        assert_eq!(qp.scale, (1.0f64 / 127.0) as f32);
    }

    #[test]
    fn asymmetric_example() {
        let qp = choose_qparams(0.0, 2.55, false).unwrap();
        assert!((qp.scale - 0.01).abs() < 1e-9);
        assert_eq!(qp.zero_point, -128);
    }

    #[test]
    fn zero_maps_exactly() {
        for (lo, hi) in [(-0.3, 1.7), (-5.0, -1.0), (0.2, 0.9), (-2.0, 2.0)] {
            let qp = choose_qparams(lo, hi, false).unwrap();
            assert_eq!(dequantize(quantize_value(0.0, qp), qp), 0.0);
        }
    }

    #[test]
    fn degenerate_range_gets_minimal_span() {
        let qp = choose_qparams(0.0, 0.0, false).unwrap();
        assert!(qp.scale > 0.0);
        let qs = choose_qparams(0.0, 0.0, true).unwrap();
        assert!(qs.scale > 0.0);
        assert_eq!(quantize_value(0.0, qs), 0);
    }

    #[test]
    fn quantize_examples() {
        let qp = QuantParams {
            scale: 0.05,
            zero_point: 3,
        };
        assert_eq!(quantize_value(0.0, qp), 3);
        assert_eq!(quantize_value(1e6, qp), 127);
        assert_eq!(quantize_value(-1e6, qp), -128);
        // Ties round away from zero: 0.025 / 0.05 = 0.5 -> 1.
        let half = QuantParams {
            scale: 0.5,
            zero_point: 0,
        };
        assert_eq!(quantize_value(0.25, half), 1);
        assert_eq!(quantize_value(-0.25, half), -1);
    }

    #[test]
    fn rejects_inverted_range() {
        assert!(choose_qparams(1.0, 0.0, false).is_err());
        assert!(choose_qparams(f64::NAN, 0.0, false).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_half_step(
            lo in -10.0f64..0.0,
            span in 1e-3f64..20.0,
            symmetric in any::<bool>(),
            t in -0.5f64..1.5,
        ) {
            let qp = choose_qparams(lo, lo + span, symmetric).unwrap();
            let r = lo + t * span;
            let (rmin, rmax) = qp.real_range();
            let clamped = r.clamp(rmin, rmax);
            let err = (dequantize(quantize_value(r, qp), qp) - clamped).abs();
            prop_assert!(err <= qp.scale as f64 / 2.0 * (1.0 + 1e-9), "err {} S {}", err, qp.scale);
        }
    }
}
