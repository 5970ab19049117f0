use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use remnet_bench::{remnet, synthetic_sets};
use remnet_core::train::{train, PreparedSet};
use remnet_core::TrainConfig;

/// One epoch over a 32-sample set is exactly one Adam step on one batch.
fn training_step(c: &mut Criterion) {
    let (set, _) = synthetic_sets(157);
    let batch: Vec<usize> = (0..32).collect();
    let batch_set: PreparedSet = set.subset(&batch);
    let config = TrainConfig {
        epochs: 1,
        seeds: vec![0],
        ..Default::default()
    };
    c.bench_function("train_step_batch32_k157", |b| {
        b.iter_batched(
            || remnet(157),
            |mut w| train(&mut w, &batch_set, &config, 0).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, training_step);
criterion_main!(benches);
