mod grid {
    use remnet_core::dataset::split;
    use remnet_core::dataset::synth::{generate, SynthConfig};
    use remnet_core::model::ModelConfig;
    use remnet_core::train::*;
    use remnet_core::NormMode;

    #[test]
    fn single_length_grid_and_bad_length() {
        let samples = generate(&SynthConfig::campaign(0.002, 3));
        let sp = split(&samples).unwrap();
        let config = TrainConfig {
            epochs: 1,
            seeds: vec![0],
            ..Default::default()
        };
        let rows = cir_grid_study(
            &samples,
            &sp,
            &[16, 100],
            ModelConfig::default(),
            &config,
            NormMode::MaxAbs,
        );
        assert_eq!(rows.len(), 2);
        let ok = rows[0].outcome.as_ref().unwrap();
        assert_eq!(ok.runs.len(), 1);
        let b = ok.abs_residuals;
        assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
        assert!(rows[1].outcome.is_err());
    }
}

mod lr_range {
    use remnet_core::model::MlpWeights;
    use remnet_core::nn::AdamConfig;
    use remnet_core::train::*;
    use remnet_core::Result;

    /// Gradient descent on `0.5 * a * |w|^2`.
    struct Quadratic {
        curvature: f64,
        w: Vec<f64>,
    }

    impl StepObjective for Quadratic {
        fn step(&mut self, lr: f64) -> Result<f64> {
            let loss = 0.5 * self.curvature * self.w.iter().map(|v| v * v).sum::<f64>();
            for v in &mut self.w {
                *v -= lr * self.curvature * *v;
            }
            Ok(loss)
        }
    }

    #[test]
    fn quadratic_suggestion_near_optimal_step() {
        for curvature in [0.5, 4.0, 40.0] {
            let mut q = Quadratic {
                curvature,
                w: vec![3.0, -2.0, 5.0],
            };
            let curve = lr_range_test(&mut q, 1e-5, 10.0, LrRangeOptions::default()).unwrap();
            let best = 1.0 / curvature;
            let s = curve.suggested.unwrap();
            assert!(
                s > best / 10.0 && s < best * 10.0,
                "a = {curvature}: {s} vs {best}"
            );
        }
    }

    #[test]
    fn one_batch_sweep_has_step_count_points() {
        let data = PreparedSet {
            inputs: vec![vec![0.5, -0.5]; 4],
            targets: vec![0.1; 4],
            los: vec![true; 4],
        };
        let model = MlpWeights::build(2, &[3], 0.0, 1).unwrap();
        let mut obj = NetworkObjective::new(model, AdamConfig::default(), &data, 4, 0).unwrap();
        let curve = lr_range_test(
            &mut obj,
            1e-6,
            1e-4,
            LrRangeOptions {
                steps: 12,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(curve.learning_rates.len(), 12);
        assert_eq!(curve.losses.len(), 12);
        assert!(!curve.truncated);
    }

    #[test]
    fn divergence_truncates() {
        let mut q = Quadratic {
            curvature: 1.0,
            w: vec![1.0],
        };
        let curve = lr_range_test(&mut q, 1e-3, 1e3, LrRangeOptions::default()).unwrap();
        assert!(curve.truncated);
        assert!(curve.losses.len() < 100);
    }

    #[test]
    fn equal_bounds_rejected() {
        let mut q = Quadratic {
            curvature: 1.0,
            w: vec![1.0],
        };
        assert!(lr_range_test(&mut q, 1e-3, 1e-3, LrRangeOptions::default()).is_err());
        assert!(lr_range_test(&mut q, 0.0, 1e-3, LrRangeOptions::default()).is_err());
    }
}

mod metrics {
    use proptest::prelude::*;
    use remnet_core::train::*;

    #[test]
    fn perfect_predictions() {
        let m = Metrics::from_residuals(&[0.0; 5], &[true, false, true, false, true]).unwrap();
        assert_eq!(m.mae_m, 0.0);
        assert_eq!(m.mae_los_m, Some(0.0));
        assert_eq!((m.n_los, m.n_nlos), (3, 2));
    }

    #[test]
    fn absent_subset_is_none_not_zero() {
        let m = Metrics::from_residuals(&[0.2, -0.4], &[true, true]).unwrap();
        assert_eq!(m.mae_nlos_m, None);
        let json = serde_json::to_value(&m).unwrap();
        assert!(json.get("mae_nlos_m").is_none());
        assert!((m.mae_los_m.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn seed_summary_spread() {
        let runs: Vec<Metrics> = [0.07, 0.08, 0.09]
            .iter()
            .map(|&e| Metrics::from_residuals(&[e, -e], &[true, false]).unwrap())
            .collect();
        let s = SeedSummary::from_runs(&runs).unwrap();
        assert!((s.mae_mean_m - 0.08).abs() < 1e-12);
        assert!((s.mae_std_m - (2.0f64 / 3.0).sqrt() * 0.01).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mae_invariant_under_shuffle(
            mut pairs in proptest::collection::vec((-1.0f64..1.0, any::<bool>()), 1..64),
            seed in any::<u64>(),
        ) {
            let (r, l): (Vec<f64>, Vec<bool>) = pairs.iter().copied().unzip();
            let a = Metrics::from_residuals(&r, &l).unwrap();
            // Fisher-Yates with a tiny LCG keeps the test self-contained.
            let mut state = seed | 1;
            for i in (1..pairs.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                pairs.swap(i, (state >> 33) as usize % (i + 1));
            }
            let (r, l): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
            let b = Metrics::from_residuals(&r, &l).unwrap();
            prop_assert!((a.mae_m - b.mae_m).abs() < 1e-12);
            prop_assert!(a.mae_m >= 0.0 && a.sigma_m >= 0.0);
        }
    }
}

mod trainer {
    use remnet_core::model::{MlpWeights, ModelConfig, RemnetWeights};
    use remnet_core::nn::AdamConfig;
    use remnet_core::nn::Parameters;
    use remnet_core::train::*;
    use remnet_core::Error;

    fn linear_problem() -> PreparedSet {
        // y = 0.5 x0 - 0.25 x1 + 0.1
        let inputs: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()])
            .collect();
        let targets = inputs.iter().map(|x| 0.5 * x[0] - 0.25 * x[1] + 0.1).collect();
        PreparedSet {
            inputs,
            targets,
            los: vec![true; 10],
        }
    }

    #[test]
    fn loss_mostly_decreases_on_linear_problem() {
        let set = linear_problem();
        let mut model = MlpWeights::build(2, &[], 0.0, 3).unwrap();
        let config = TrainConfig {
            batch_size: 10,
            adam: AdamConfig {
                learning_rate: 0.01,
                ..Default::default()
            },
            ..Default::default()
        };
        let h = train(&mut model, &set, &config, 1).unwrap();
        assert_eq!(h.epoch_loss.len(), 30);
        let decreasing = h.epoch_loss.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(decreasing as f64 >= 0.8 * 29.0, "{:?}", h.epoch_loss);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let set = PreparedSet {
            inputs: (0..5).map(|i| vec![i as f64 * 0.1; 16]).collect(),
            targets: vec![0.1, 0.2, 0.0, -0.1, 0.3],
            los: vec![true; 5],
        };
        let cfg = ModelConfig::default().with_cir_len(16);
        let mut model = RemnetWeights::build(cfg, 2).unwrap();
        let before = model.clone();
        let config = TrainConfig {
            epochs: 3,
            batch_size: 2,
            adam: AdamConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        train(&mut model, &set, &config, 0).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn same_seed_same_weights() {
        let set = PreparedSet {
            inputs: (0..12)
                .map(|i| (0..16).map(|j| ((i * j) % 7) as f64 / 7.0).collect())
                .collect(),
            targets: (0..12).map(|i| i as f64 * 0.01).collect(),
            los: vec![false; 12],
        };
        let cfg = ModelConfig::default().with_cir_len(16);
        let config = TrainConfig {
            epochs: 2,
            batch_size: 5,
            ..Default::default()
        };
        let run = || {
            let mut m = RemnetWeights::build(cfg, 7).unwrap();
            train(&mut m, &set, &config, 7).unwrap();
            m.param_slices()
                .iter()
                .flat_map(|p| p.iter().map(|v| v.to_bits()))
                .fold(0u64, |h, b| h.rotate_left(5) ^ b)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_empty_and_mismatched_data() {
        let mut model = MlpWeights::build(3, &[], 0.0, 0).unwrap();
        let config = TrainConfig::default();
        assert!(train(&mut model, &PreparedSet::default(), &config, 0).is_err());
        let bad = PreparedSet {
            inputs: vec![vec![0.0; 4]],
            targets: vec![0.0],
            los: vec![true],
        };
        assert!(train(&mut model, &bad, &config, 0).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let set = PreparedSet {
            inputs: vec![vec![f64::MAX, f64::MAX]],
            targets: vec![0.0],
            los: vec![true],
        };
        let mut model = MlpWeights::build(2, &[], 0.0, 1).unwrap();
        let err = train(&mut model, &set, &TrainConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn zero_model_reports_raw_error() {
        let set = PreparedSet {
            inputs: vec![vec![1.0, 2.0]; 4],
            targets: vec![0.1, -0.3, 0.2, 0.0],
            los: vec![true, false, true, false],
        };
        let model = MlpWeights::build(2, &[], 0.0, 1)
            .map(|mut m| {
                m.layers[0].weights = vec![0.0, 0.0];
                m
            })
            .unwrap();
        let e = evaluate(&model, &set).unwrap();
        assert!((e.metrics.mae_m - 0.15).abs() < 1e-12);
    }
}
