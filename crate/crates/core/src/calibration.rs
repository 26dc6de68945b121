//! The empirical tail-sum function Ĝ and its generalized inverse.
//!
//! Given N unlabeled rows scored by a K-class model, Ĝ pools all `N·K`
//! scores:
//!
//! ```text
//! Ĝ(t) = (1/N) · #{(i, k) : f_k(X_i) ≥ t}
//! ```
//!
//! Ĝ is a non-increasing, left-continuous step function with range
//! `[0, K]`. A label `k` enters the set for `x` when `Ĝ(f_k(x)) ≤ β`, and
//! the average size of such sets is `β` up to `O(K/√N)`.
//!
//! The same structure built from true posterior vectors stands in for the
//! population function G.

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use rayon::slice::ParallelSliceMut;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{hash_unit, RandomSeed};

/// N×K score matrix computed on calibration rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePool {
    scores: Array2<f64>,
}

impl ScorePool {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        if scores.nrows() == 0 || scores.ncols() == 0 {
            return Err(Error::InvalidArgument("score pool needs at least one row and one column".into()));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore);
        }
        Ok(Self { scores })
    }

    pub fn rows(&self) -> usize {
        self.scores.nrows()
    }

    pub fn classes(&self) -> usize {
        self.scores.ncols()
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }
}

/// Sorted pooled scores supporting O(log NK) evaluation of Ĝ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmpiricalGDoc", into = "EmpiricalGDoc")]
pub struct EmpiricalG {
    /// Descending.
    sorted: Vec<f64>,
    rows: usize,
    classes: usize,
}

#[derive(Serialize, Deserialize)]
struct EmpiricalGDoc {
    rows: usize,
    classes: usize,
    sorted_pool: Vec<f64>,
}

impl From<EmpiricalG> for EmpiricalGDoc {
    fn from(g: EmpiricalG) -> Self {
        Self { rows: g.rows, classes: g.classes, sorted_pool: g.sorted }
    }
}

impl TryFrom<EmpiricalGDoc> for EmpiricalG {
    type Error = String;

    fn try_from(doc: EmpiricalGDoc) -> std::result::Result<Self, String> {
        if doc.rows == 0 || doc.classes == 0 || doc.sorted_pool.len() != doc.rows * doc.classes {
            return Err("pool length does not match rows x classes".into());
        }
        if doc.sorted_pool.iter().any(|v| !v.is_finite()) {
            return Err("non-finite pooled score".into());
        }
        if doc.sorted_pool.windows(2).any(|w| w[0] < w[1]) {
            return Err("pooled scores are not sorted in descending order".into());
        }
        Ok(Self { sorted: doc.sorted_pool, rows: doc.rows, classes: doc.classes })
    }
}

/// Builds Ĝ from a validated pool.
pub fn build_empirical_g(pool: &ScorePool) -> EmpiricalG {
    let flat: Vec<f64> = pool.scores.iter().copied().collect();
    EmpiricalG::from_flat(flat, pool.rows(), pool.classes()).expect("pool already validated")
}

impl EmpiricalG {
    /// Builds Ĝ from `rows * classes` pooled scores in any order.
    pub fn from_flat(mut scores: Vec<f64>, rows: usize, classes: usize) -> Result<Self> {
        if rows == 0 || classes == 0 {
            return Err(Error::InvalidArgument("empty pool".into()));
        }
        if scores.len() != rows * classes {
            return Err(Error::DimensionMismatch { expected: rows * classes, got: scores.len() });
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore);
        }
        scores.par_sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(Self { sorted: scores, rows, classes })
    }

    /// Number of pooled rows N.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn sorted_pool(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{pooled scores ≥ t}`.
    fn count_at_least(&self, t: f64) -> usize {
        self.sorted.partition_point(|&s| s >= t)
    }

    /// Ĝ(t) = (1/N)·#{pooled scores ≥ t}.
    pub fn value(&self, t: f64) -> f64 {
        self.count_at_least(t) as f64 / self.rows as f64
    }

    pub fn check_beta(&self, beta: f64) -> Result<()> {
        if beta > 0.0 && beta < self.classes as f64 {
            Ok(())
        } else {
            Err(Error::BetaOutOfRange { beta, classes: self.classes })
        }
    }

    /// Largest count `m` with `m / N ≤ β`.
    fn max_count(&self, beta: f64) -> usize {
        let n = self.rows as f64;
        let mut m = (beta * n).floor().max(0.0) as usize;
        while (m + 1) as f64 / n <= beta {
            m += 1;
        }
        while m > 0 && m as f64 / n > beta {
            m -= 1;
        }
        m
    }

    /// inf{t : Ĝ(t) ≤ β}. Since `Ĝ(t) ≤ β` holds exactly for `t` above the
    /// `(m+1)`-th largest pooled score, that score is the infimum.
    pub fn inverse(&self, beta: f64) -> Result<f64> {
        self.check_beta(beta)?;
        Ok(self.sorted[self.max_count(beta)])
    }

    /// `Ĝ(score) ≤ β`: the set-membership rule.
    pub fn includes(&self, score: f64, beta: f64) -> bool {
        self.value(score) <= beta
    }

    /// Average set size the membership rule yields on the pool itself.
    pub fn pool_information(&self, beta: f64) -> Result<f64> {
        let threshold = self.inverse(beta)?;
        let count = self.sorted.partition_point(|&s| s > threshold);
        Ok(count as f64 / self.rows as f64)
    }
}

pub fn g_value(g: &EmpiricalG, t: f64) -> f64 {
    g.value(t)
}

pub fn g_inverse(g: &EmpiricalG, beta: f64) -> Result<f64> {
    g.inverse(beta)
}

pub fn pool_information(g: &EmpiricalG, beta: f64) -> Result<f64> {
    g.pool_information(beta)
}

/// Threshold-form membership `score ≥ Ĝ⁻¹(β)`. Differs from
/// [`EmpiricalG::includes`] only for scores tied with the threshold;
/// exposed for diagnostics.
pub fn threshold_membership(g: &EmpiricalG, score: f64, beta: f64) -> Result<bool> {
    Ok(score >= g.inverse(beta)?)
}

/// `count` draws of `Z`: a uniformly random pooled row and a uniformly
/// random column per draw.
pub fn randomized_pool_draw(pool: &ScorePool, count: usize, seed: RandomSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..pool.rows());
            let k = rng.random_range(0..pool.classes());
            pool.scores[[i, k]]
        })
        .collect()
}

/// Opt-in tie breaking. Adds a perturbation in `[-magnitude, magnitude)`
/// derived from a hash of the seed, the row's features and the class, so a
/// query row identical to a pool row receives the identical perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub seed: u64,
    pub magnitude: f64,
}

impl Jitter {
    pub const DEFAULT_MAGNITUDE: f64 = 1e-9;

    pub fn new(seed: u64) -> Self {
        Self { seed, magnitude: Self::DEFAULT_MAGNITUDE }
    }

    pub fn apply(&self, features: ArrayView1<'_, f64>, scores: &mut [f64]) {
        let x: Vec<f64> = features.iter().copied().collect();
        for (k, s) in scores.iter_mut().enumerate() {
            *s += self.magnitude * hash_unit(self.seed, &x, k);
        }
    }
}
