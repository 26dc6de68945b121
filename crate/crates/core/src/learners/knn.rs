use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Stored training set; `p̂_k(x)` is the share of label `k` among the `k`
/// nearest rows (Euclidean). Equal distances go to the earlier row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    features: Array2<f64>,
    labels: Vec<usize>,
    classes: usize,
    neighbors: usize,
}

pub const DEFAULT_NEIGHBORS: usize = 11;

impl KnnModel {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn nearest(&self, x: ArrayView1<'_, f64>) -> Vec<usize> {
        let mut keyed: Vec<(f64, usize)> = self
            .features
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.neighbors;
        if k < keyed.len() {
            keyed.select_nth_unstable_by(k - 1, cmp);
            keyed.truncate(k);
        }
        keyed.sort_unstable_by(cmp);
        keyed.into_iter().map(|(_, i)| i).collect()
    }

    pub fn probabilities_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        out.fill(0.0);
        let share = 1.0 / self.neighbors as f64;
        for i in self.nearest(x) {
            out[self.labels[i] - 1] += share;
        }
    }
}

pub fn fit_knn(data: &LabeledDataset, neighbors: usize) -> Result<KnnModel> {
    if neighbors == 0 || neighbors > data.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {neighbors} outside 1..={} for k-NN",
            data.len()
        )));
    }
    Ok(KnnModel {
        features: data.features().clone(),
        labels: data.labels().to_vec(),
        classes: data.classes(),
        neighbors,
    })
}
