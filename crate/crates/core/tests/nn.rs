mod adam {
    use remnet_core::nn::*;

    struct Flat(Vec<f64>);

    impl Parameters for Flat {
        fn param_slices(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Flat(vec![1.0, -2.0, 0.5]);
        let g = Gradients(vec![vec![0.3, -4.0, 1e-3]]);
        let mut adam = AdamState::new(
            &p,
            AdamConfig {
                learning_rate: 0.01,
                ..Default::default()
            },
        );
        adam.update(&mut p, &g).unwrap();
        let deltas = [1.0 - p.0[0], -2.0 - p.0[1], 0.5 - p.0[2]];
        for (d, gi) in deltas.iter().zip(&g.0[0]) {
            let expected = 0.01 * gi.abs() / (gi.abs() + 1e-8) * gi.signum();
            assert!((d - expected).abs() < 1e-9, "{d} vs {expected}");
        }
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Flat(vec![1.0, 2.0]);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        for _ in 0..5 {
            adam.update(&mut p, &Gradients(vec![vec![0.0, 0.0]])).unwrap();
        }
        assert_eq!(p.0, vec![1.0, 2.0]);
    }

    #[test]
    fn three_step_scalar_trace() {
        // Scalar reference written out longhand.
        let (lr, b1, b2, eps) = (0.1f64, 0.9f64, 0.999f64, 1e-8f64);
        let mut x = 0.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut trace = Vec::new();
        for t in 1..=3 {
            let g = 1.0;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
            trace.push(x);
        }

        let mut p = Flat(vec![0.0]);
        let mut adam = AdamState::new(
            &p,
            AdamConfig {
                learning_rate: lr,
                ..Default::default()
            },
        );
        for expected in trace {
            adam.update(&mut p, &Gradients(vec![vec![1.0]])).unwrap();
            assert!((p.0[0] - expected).abs() < 1e-12);
        }
        // Constant unit gradient: each step is ~lr.
        assert!((p.0[0] + 0.3).abs() < 1e-6);
    }
}

mod conv {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use remnet_core::nn::*;
    use remnet_core::{Error, Tensor};

    fn random_tensor(rng: &mut ChaCha8Rng, len: usize, ch: usize) -> Tensor {
        let data = (0..len * ch).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(len, ch, data).unwrap()
    }

    #[test]
    fn stride_two_chain_lengths() {
        let k = ConvKernel::zeros(3, 1, 1, 2, Activation::None, true).unwrap();
        let lens: Vec<usize> = std::iter::successors(Some(157), |&l| Some(k.output_len(l)))
            .skip(1)
            .take(3)
            .collect();
        assert_eq!(lens, vec![79, 40, 20]);
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut k = ConvKernel::zeros(1, 1, 1, 1, Activation::None, true).unwrap();
        k.weights[0] = 1.0;
        let x = Tensor::from_signal(&[0.5, -2.0, 3.25, 0.0]);
        assert_eq!(conv1d_same(&x, &k).unwrap(), x);
    }

    #[test]
    fn matches_sliding_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (k, stride, cin, cout) in [(3, 1, 1, 1), (3, 1, 2, 3), (4, 1, 2, 2), (3, 2, 3, 2)] {
            let mut kernel =
                ConvKernel::he_init(&mut rng, k, cin, cout, stride, Activation::None, true).unwrap();
            kernel.bias = Some((0..cout).map(|_| rng.random_range(-1.0..1.0)).collect());
            let len = 5;
            let x = random_tensor(&mut rng, len, cin);
            let y = conv1d_same(&x, &kernel).unwrap();

            // Explicit padded signal, then plain dot products per window.
            let (pl, pr) = same_padding(len, k, stride);
            let padded_len = len + pl + pr;
            let padded = |p: usize, i: usize| -> f64 {
                if p < pl || p >= pl + len {
                    0.0
                } else {
                    x.at(p - pl, i)
                }
            };
            let out_len = len.div_ceil(stride);
            assert_eq!(y.len(), out_len);
            assert!((out_len - 1) * stride + k <= padded_len);
            for o in 0..out_len {
                for c in 0..cout {
                    let mut dot = kernel.bias.as_ref().unwrap()[c];
                    for t in 0..k {
                        for i in 0..cin {
                            dot += padded(o * stride + t, i) * kernel.weights[(t * cin + i) * cout + c];
                        }
                    }
                    assert!((y.at(o, c) - dot).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn padding_puts_extra_on_right() {
        assert_eq!(same_padding(5, 3, 1), (1, 1));
        assert_eq!(same_padding(5, 4, 1), (1, 2));
        assert_eq!(same_padding(40, 3, 2), (0, 1));
        assert_eq!(same_padding(157, 3, 2), (1, 1));
        assert_eq!(same_padding(157, 1, 2), (0, 0));
    }

    #[test]
    fn rejects_channel_mismatch() {
        let k = ConvKernel::zeros(3, 2, 4, 1, Activation::None, false).unwrap();
        let x = Tensor::from_signal(&[1.0, 2.0, 3.0]);
        assert!(matches!(conv1d_same(&x, &k), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_bad_stride() {
        assert!(ConvKernel::zeros(3, 1, 1, 3, Activation::None, false).is_err());
        assert!(ConvKernel::zeros(0, 1, 1, 1, Activation::None, false).is_err());
    }

    #[test]
    fn relu_outputs_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = ConvKernel::he_init(&mut rng, 3, 2, 4, 2, Activation::Relu, true).unwrap();
        let x = random_tensor(&mut rng, 17, 2);
        let y = conv1d_same(&x, &k).unwrap();
        assert!(y.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut kernel = ConvKernel::he_init(&mut rng, 3, 2, 3, 2, Activation::None, true).unwrap();
        let x = random_tensor(&mut rng, 7, 2);
        let upstream = random_tensor(&mut rng, 4, 3);
        let loss = |x: &Tensor, k: &ConvKernel| -> f64 {
            let y = conv1d_pre_activation(x, k).unwrap();
            y.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum()
        };
        let (dx, dw, db) = conv1d_backward(&x, &kernel, &upstream).unwrap();
        let h = 1e-5;
        for j in 0..kernel.weights.len() {
            let orig = kernel.weights[j];
            kernel.weights[j] = orig + h;
            let lp = loss(&x, &kernel);
            kernel.weights[j] = orig - h;
            let lm = loss(&x, &kernel);
            kernel.weights[j] = orig;
            assert!(((lp - lm) / (2.0 * h) - dw[j]).abs() < 1e-8);
        }
        for c in 0..3 {
            let orig = kernel.bias.as_ref().unwrap()[c];
            kernel.bias.as_mut().unwrap()[c] = orig + h;
            let lp = loss(&x, &kernel);
            kernel.bias.as_mut().unwrap()[c] = orig - h;
            let lm = loss(&x, &kernel);
            kernel.bias.as_mut().unwrap()[c] = orig;
            assert!(((lp - lm) / (2.0 * h) - db.as_ref().unwrap()[c]).abs() < 1e-8);
        }
        let mut xp = x.clone();
        for j in 0..x.data().len() {
            let orig = xp.data()[j];
            xp.data_mut()[j] = orig + h;
            let lp = loss(&xp, &kernel);
            xp.data_mut()[j] = orig - h;
            let lm = loss(&xp, &kernel);
            xp.data_mut()[j] = orig;
            assert!(((lp - lm) / (2.0 * h) - dx.data()[j]).abs() < 1e-8);
        }
    }
}

mod dense {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use remnet_core::nn::*;

    #[test]
    fn identity_weights_pass_through() {
        let mut layer = DenseLayer::zeros(4, 4);
        for i in 0..4 {
            layer.weights[i * 4 + i] = 1.0;
        }
        let x = [0.1, -2.0, 3.0, 0.0];
        assert_eq!(dense_forward(&x, &layer).unwrap(), x.to_vec());
    }

    #[test]
    fn zero_input_gives_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layer = DenseLayer::he_init(&mut rng, 6, 3);
        layer.bias = vec![0.5, -1.0, 2.0];
        assert_eq!(dense_forward(&[0.0; 6], &layer).unwrap(), layer.bias);
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut layer = DenseLayer::he_init(&mut rng, 8, 1);
        layer.bias = vec![rng.random_range(-1.0..1.0)];
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let expected = layer.bias[0] + x.iter().zip(&layer.weights).map(|(a, b)| a * b).sum::<f64>();
        let y = dense_forward(&x, &layer).unwrap();
        assert!((y[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_length_mismatch() {
        let layer = DenseLayer::zeros(3, 1);
        assert!(dense_forward(&[1.0, 2.0], &layer).is_err());
    }
}

mod module {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use remnet_core::nn::*;

    #[test]
    fn he_uniform_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = he_uniform(&mut rng, 24, 1000);
        let limit = (6.0f64 / 24.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn dropout_mask_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask = DropoutMask::sample(&mut rng, 10_000, 0.2);
        assert!(mask.0.iter().all(|&m| m == 0.0 || (m - 1.25).abs() < 1e-12));
        let dropped = mask.0.iter().filter(|&&m| m == 0.0).count() as f64 / 10_000.0;
        assert!((dropped - 0.2).abs() < 0.02);
        assert_eq!(DropoutMask::sample(&mut rng, 5, 0.0), DropoutMask::identity(5));
    }

    #[test]
    fn mae_sign_at_kink_is_zero() {
        assert_eq!(mae_sign(0.0), 0.0);
        assert_eq!(mae_sign(-0.0), 0.0);
        assert_eq!(mae_sign(1e-300), 1.0);
        assert_eq!(mae_sign(-3.0), -1.0);
    }
}
