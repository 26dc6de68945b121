//! Score functions `x ↦ (f_1(x), …, f_K(x))`.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::erm::AffineScoreModel;
use crate::error::{Error, Result};
use crate::learners::{GaussianGenerativeModel, KnnModel, SoftmaxModel};
use crate::superlearner::AggregatedScoreModel;
use crate::synthetic::GaussianMixtureModel;

const BATCH_CHUNK: usize = 1024;

/// Anything that maps a feature vector to K scores.
pub trait Scorer {
    fn classes(&self) -> usize;
    fn dim(&self) -> usize;
    /// Writes the K scores of `x` into `out`. Callers guarantee the lengths.
    fn score_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]);
}

/// Class-probability estimators wrapped as scores `2·p̂_k − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProbabilityEstimator {
    Softmax(SoftmaxModel),
    Knn(KnnModel),
    GaussianGenerative(GaussianGenerativeModel),
    /// Exact posterior of a synthetic mixture.
    TruePosterior(GaussianMixtureModel),
}

impl ProbabilityEstimator {
    pub fn classes(&self) -> usize {
        match self {
            Self::Softmax(m) => m.classes(),
            Self::Knn(m) => m.classes(),
            Self::GaussianGenerative(m) => m.classes(),
            Self::TruePosterior(m) => m.classes(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Softmax(m) => m.dim(),
            Self::Knn(m) => m.dim(),
            Self::GaussianGenerative(m) => m.dim(),
            Self::TruePosterior(m) => m.dim(),
        }
    }

    pub fn probabilities_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        match self {
            Self::Softmax(m) => m.probabilities_into(x, out),
            Self::Knn(m) => m.probabilities_into(x, out),
            Self::GaussianGenerative(m) => m.probabilities_into(x, out),
            Self::TruePosterior(m) => m.posterior_into(x, out),
        }
    }
}

/// Probability estimate `p̂` exposed as scores `2·p̂_k − 1 ∈ [−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityScoreModel {
    pub estimator: ProbabilityEstimator,
}

impl ProbabilityScoreModel {
    pub fn new(estimator: ProbabilityEstimator) -> Self {
        Self { estimator }
    }

    /// Maps a score back to the probability it encodes.
    pub fn inverse_transform(score: f64) -> f64 {
        0.5 * (score + 1.0)
    }
}

impl Scorer for ProbabilityScoreModel {
    fn classes(&self) -> usize {
        self.estimator.classes()
    }

    fn dim(&self) -> usize {
        self.estimator.dim()
    }

    fn score_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        self.estimator.probabilities_into(x, out);
        for s in out.iter_mut() {
            *s = (2.0 * *s - 1.0).clamp(-1.0, 1.0);
        }
    }
}

/// Every score model the crate can fit, persist and calibrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScoreModel {
    Affine(AffineScoreModel),
    Probability(ProbabilityScoreModel),
    Aggregated(AggregatedScoreModel),
}

impl Scorer for ScoreModel {
    fn classes(&self) -> usize {
        match self {
            Self::Affine(m) => m.classes(),
            Self::Probability(m) => m.classes(),
            Self::Aggregated(m) => m.classes(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Affine(m) => m.dim(),
            Self::Probability(m) => m.dim(),
            Self::Aggregated(m) => m.dim(),
        }
    }

    fn score_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        match self {
            Self::Affine(m) => m.score_into(x, out),
            Self::Probability(m) => m.score_into(x, out),
            Self::Aggregated(m) => m.score_into(x, out),
        }
    }
}

impl ScoreModel {
    pub fn from_probabilities(estimator: ProbabilityEstimator) -> Self {
        Self::Probability(ProbabilityScoreModel::new(estimator))
    }

    /// Scores of one row, checking its length.
    pub fn score(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut out = vec![0.0; self.classes()];
        self.score_into(x, &mut out);
        Ok(out)
    }

    /// Scores of every row. Rows are independent, so parallel evaluation
    /// gives the same bits as a sequential loop.
    pub fn score_matrix(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: features.ncols() });
        }
        Ok(score_rows(self, features))
    }
}

/// Parallel row-wise scoring for any [`Scorer`].
pub fn score_rows<S: Scorer + Sync + ?Sized>(model: &S, features: ArrayView2<'_, f64>) -> Array2<f64> {
    let k = model.classes();
    let mut out = Array2::zeros((features.nrows(), k));
    out.axis_chunks_iter_mut(Axis(0), BATCH_CHUNK)
        .into_par_iter()
        .zip(features.axis_chunks_iter(Axis(0), BATCH_CHUNK).into_par_iter())
        .for_each(|(mut out_chunk, in_chunk)| {
            let mut buf = vec![0.0; k];
            for (mut o, x) in out_chunk.rows_mut().into_iter().zip(in_chunk.rows()) {
                model.score_into(x, &mut buf);
                o.assign(&ArrayView1::from(&buf[..]));
            }
        });
    out
}
