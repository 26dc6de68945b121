use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::learners::softmax::softmax_in_place;

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Class-conditional Gaussians with per-class means and one shared
/// diagonal covariance; posterior by Bayes with empirical priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianGenerativeModel {
    /// K×d.
    pub means: Array2<f64>,
    pub variances: Array1<f64>,
    pub log_priors: Array1<f64>,
}

impl GaussianGenerativeModel {
    pub fn classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn probabilities_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let quad: f64 = x
                .iter()
                .zip(self.means.row(k))
                .zip(&self.variances)
                .map(|((xi, mi), v)| (xi - mi) * (xi - mi) / v)
                .sum();
            *o = self.log_priors[k] - 0.5 * quad;
        }
        softmax_in_place(out);
    }
}

pub fn fit_gaussian_generative(data: &LabeledDataset) -> Result<GaussianGenerativeModel> {
    let (k, d, n) = (data.classes(), data.dim(), data.len());
    let counts = data.class_counts();
    if let Some(label) = counts.iter().position(|&c| c < 2) {
        return Err(Error::InvalidDataset(format!(
            "gaussian generative learner needs >= 2 rows of label {}, found {}",
            label + 1,
            counts[label]
        )));
    }
    let mut means = Array2::<f64>::zeros((k, d));
    for (x, &y) in data.features().rows().into_iter().zip(data.labels()) {
        means.row_mut(y - 1).scaled_add(1.0, &x);
    }
    for (mut row, &c) in means.rows_mut().into_iter().zip(&counts) {
        row /= c as f64;
    }
    let mut variances = Array1::<f64>::zeros(d);
    for (x, &y) in data.features().rows().into_iter().zip(data.labels()) {
        for ((v, xi), mi) in variances.iter_mut().zip(x).zip(means.row(y - 1)) {
            *v += (xi - mi) * (xi - mi);
        }
    }
    variances.mapv_inplace(|v| (v / (n - k) as f64).max(VARIANCE_FLOOR));
    let log_priors = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
    Ok(GaussianGenerativeModel { means, variances, log_priors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn boundary_at_midpoint_for_equal_priors() {
        let x = array![[0.0], [1.0], [2.0], [4.0], [5.0], [6.0]];
        let data = LabeledDataset::new(x, vec![1, 1, 1, 2, 2, 2], 2).unwrap();
        let m = fit_gaussian_generative(&data).unwrap();
        let mut p = [0.0; 2];
        m.probabilities_into(array![3.0].view(), &mut p);
        assert!((p[0] - 0.5).abs() < 1e-12);
        m.probabilities_into(array![2.9].view(), &mut p);
        assert!(p[0] > 0.5);
    }

    #[test]
    fn constant_feature_hits_the_floor() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 5.0], [1.0, 6.0]];
        let data = LabeledDataset::new(x, vec![1, 1, 2, 2], 2).unwrap();
        let m = fit_gaussian_generative(&data).unwrap();
        assert_eq!(m.variances[0], VARIANCE_FLOOR);
        let mut p = [0.0; 2];
        m.probabilities_into(array![7.0, 3.0].view(), &mut p);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_classes() {
        let data = LabeledDataset::new(array![[0.0], [1.0], [2.0]], vec![1, 1, 2], 2).unwrap();
        assert!(fit_gaussian_generative(&data).is_err());
        let data = LabeledDataset::new(array![[0.0], [1.0], [2.0]], vec![1, 1, 1], 2).unwrap();
        assert!(fit_gaussian_generative(&data).is_err());
    }
}
