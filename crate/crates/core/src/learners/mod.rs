//! Base score algorithms: a map from a labeled dataset to a [`ScoreModel`].
//!
//! Probability estimators emit `2·p̂_k − 1` so every library member
//! produces scores in `[−1, 1]`; the affine ERM learner emits its clamped
//! raw scores.

mod gaussian;
mod knn;
mod softmax;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gaussian::{fit_gaussian_generative, GaussianGenerativeModel, VARIANCE_FLOOR};
pub use knn::{fit_knn, KnnModel, DEFAULT_NEIGHBORS};
pub use softmax::{fit_softmax, softmax_nll, SoftmaxModel};

use crate::data::LabeledDataset;
use crate::erm::{fit_erm, ErmConfig};
use crate::error::{Error, Result};
use crate::score::{ProbabilityEstimator, ScoreModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScoreAlgorithm {
    Softmax,
    Knn { neighbors: usize },
    GaussianGenerative,
    ErmAffine(ErmConfig),
}

impl ScoreAlgorithm {
    pub fn knn() -> Self {
        Self::Knn { neighbors: DEFAULT_NEIGHBORS }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Softmax => "softmax",
            Self::Knn { .. } => "knn",
            Self::GaussianGenerative => "gaussian",
            Self::ErmAffine(_) => "erm",
        }
    }

    pub fn fit(&self, data: &LabeledDataset) -> Result<ScoreModel> {
        Ok(match self {
            Self::Softmax => ScoreModel::from_probabilities(ProbabilityEstimator::Softmax(fit_softmax(data)?)),
            Self::Knn { neighbors } => ScoreModel::from_probabilities(ProbabilityEstimator::Knn(fit_knn(data, *neighbors)?)),
            Self::GaussianGenerative => {
                ScoreModel::from_probabilities(ProbabilityEstimator::GaussianGenerative(fit_gaussian_generative(data)?))
            }
            Self::ErmAffine(config) => ScoreModel::Affine(fit_erm(data, config)?),
        })
    }
}

impl fmt::Display for ScoreAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Knn { neighbors } => write!(f, "knn(k={neighbors})"),
            Self::ErmAffine(c) => write!(f, "erm({})", c.loss),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ScoreAlgorithm {
    type Err = Error;

    /// `softmax`, `knn`, `gaussian` or `erm`, with default hyperparameters.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(Self::Softmax),
            "knn" => Ok(Self::knn()),
            "gaussian" => Ok(Self::GaussianGenerative),
            "erm" => Ok(Self::ErmAffine(ErmConfig::default())),
            other => Err(Error::InvalidArgument(format!("unknown learner `{other}`"))),
        }
    }
}

/// Parses a comma-separated learner list.
pub fn parse_library(list: &str) -> Result<Vec<ScoreAlgorithm>> {
    let algorithms: Vec<ScoreAlgorithm> =
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?;
    if algorithms.is_empty() {
        return Err(Error::InvalidArgument("empty learner list".into()));
    }
    Ok(algorithms)
}
