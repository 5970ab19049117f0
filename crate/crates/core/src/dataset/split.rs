use super::{CirSample, Environment};
use crate::error::{Error, Result};

/// Indices into the sample collection. Medium-room samples form the test
/// set, the other indoor rooms the training set; outdoor and through-wall
/// samples belong to neither. LOS and NLOS stay mixed in both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn train_samples<'a>(&'a self, samples: &'a [CirSample]) -> impl Iterator<Item = &'a CirSample> + 'a {
        self.train.iter().map(move |&i| &samples[i])
    }

    pub fn test_samples<'a>(&'a self, samples: &'a [CirSample]) -> impl Iterator<Item = &'a CirSample> + 'a {
        self.test.iter().map(move |&i| &samples[i])
    }
}

pub fn split(samples: &[CirSample]) -> Result<SplitSpec> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match s.environment {
            Environment::MediumRoom => test.push(i),
            Environment::BigRoom | Environment::SmallRoom => train.push(i),
            Environment::Outdoor | Environment::ThroughWall => {}
        }
    }
    if test.is_empty() {
        return Err(Error::Dataset(
            "no medium-room samples: test split is empty".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::Dataset(
            "no big/small-room samples: training split is empty".into(),
        ));
    }
    Ok(SplitSpec { train, test })
}
