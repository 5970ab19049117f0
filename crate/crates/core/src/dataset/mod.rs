//! Measurement records, the indoor split, model-input preparation and
//! exploratory statistics.

mod convert;
mod io;
mod pca;
mod prepare;
mod split;
mod stats;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use convert::{align_window, convert_records, ConvertOptions, Rejections, FIRST_PATH_LEAD};
pub use io::{
    ingest, ingest_reader, write_canonical, write_canonical_to, IngestOptions, IngestReport, RowRejection,
};
pub use pca::{pca3, Pca3};
pub use prepare::{normalize, prepare, prepare_all, NormMode, SUPPORTED_CIR_LENS};
pub use split::{split, SplitSpec};
pub use stats::{quantile, silhouette_two_groups, summary_stats, BoxStats};

use crate::error::{Error, Result};

/// Samples in an aligned CIR window.
pub const CIR_WINDOW: usize = 157;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    BigRoom,
    MediumRoom,
    SmallRoom,
    Outdoor,
    ThroughWall,
}

impl Environment {
    pub const ALL: [Environment; 5] = [
        Environment::BigRoom,
        Environment::MediumRoom,
        Environment::SmallRoom,
        Environment::Outdoor,
        Environment::ThroughWall,
    ];

    pub fn is_indoor_room(self) -> bool {
        matches!(
            self,
            Environment::BigRoom | Environment::MediumRoom | Environment::SmallRoom
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Environment::BigRoom => "big_room",
            Environment::MediumRoom => "medium_room",
            Environment::SmallRoom => "small_room",
            Environment::Outdoor => "outdoor",
            Environment::ThroughWall => "through_wall",
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        Ok(match key.as_str() {
            "big_room" | "big" | "large_room" | "large" => Environment::BigRoom,
            "medium_room" | "medium" => Environment::MediumRoom,
            "small_room" | "small" => Environment::SmallRoom,
            "outdoor" | "outdoors" => Environment::Outdoor,
            "through_wall" | "through_the_wall" | "wall" => Environment::ThroughWall,
            _ => return Err(Error::Dataset(format!("unknown environment label {s:?}"))),
        })
    }
}

/// One UWB measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirSample {
    pub cir: Vec<f64>,
    pub measured_range: f64,
    pub true_range: f64,
    /// `measured_range - true_range`, the regression target.
    pub range_error: f64,
    pub environment: Environment,
    pub material: String,
    pub los: bool,
}

impl CirSample {
    pub fn new(
        cir: Vec<f64>,
        measured_range: f64,
        true_range: f64,
        environment: Environment,
        material: impl Into<String>,
        los: bool,
    ) -> Result<Self> {
        if cir.len() < CIR_WINDOW {
            return Err(Error::Dataset(format!(
                "CIR has {} samples, need at least {CIR_WINDOW}",
                cir.len()
            )));
        }
        if let Some(i) = cir.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("CIR value {i} is not finite")));
        }
        if !measured_range.is_finite() || !true_range.is_finite() {
            return Err(Error::Dataset("range values must be finite".into()));
        }
        Ok(CirSample {
            cir,
            measured_range,
            true_range,
            range_error: measured_range - true_range,
            environment,
            material: material.into(),
            los,
        })
    }
}
