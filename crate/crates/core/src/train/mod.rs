//! Training loop, evaluation, the CIR-length grid study and the
//! learning-rate range test.

mod grid;
mod lr_range;
mod metrics;
mod trainer;

pub use grid::{cir_grid_study, GridOutcome, GridRow};
pub use lr_range::{lr_range_test, LrCurve, LrRangeOptions, NetworkObjective, StepObjective};
pub use metrics::{Metrics, SeedSummary};
pub use trainer::{
    evaluate, evaluate_predictions, train, Evaluation, PreparedSet, TrainConfig, TrainHistory,
};
