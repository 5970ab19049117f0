//! Shared fixtures for the benchmarks: synthetic data and deployed models.

use remnet_core::dataset::split;
use remnet_core::dataset::synth::{generate, SynthConfig};
use remnet_core::deploy::{calibration_subset, deploy, Deployment};
use remnet_core::train::PreparedSet;
use remnet_core::{ModelConfig, NormMode, RemnetWeights, SavedModel};

/// Training and test sets from a small synthetic campaign.
pub fn synthetic_sets(cir_len: usize) -> (PreparedSet, PreparedSet) {
    let samples = generate(&SynthConfig::campaign(0.01, 1));
    let sp = split(&samples).expect("synthetic campaign has both splits");
    let prepared = |idx: &[usize]| {
        PreparedSet::from_samples(idx.iter().map(|&i| &samples[i]), cir_len, NormMode::MaxAbs)
            .expect("synthetic samples are valid")
    };
    (prepared(&sp.train), prepared(&sp.test))
}

pub fn remnet(cir_len: usize) -> RemnetWeights {
    RemnetWeights::build(
        ModelConfig::default()
            .with_cir_len(cir_len)
            .reference_layout(true),
        0,
    )
    .expect("valid config")
}

pub fn deployed(cir_len: usize) -> (Deployment, PreparedSet) {
    let (train, test) = synthetic_sets(cir_len);
    let d = deploy(
        &SavedModel::Remnet(remnet(cir_len)),
        &calibration_subset(&train.inputs, 200),
    )
    .expect("deployment succeeds");
    (d, test)
}
