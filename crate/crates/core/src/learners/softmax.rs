use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 1_000;
const RELATIVE_TOLERANCE: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const CHUNK: usize = 512;

/// Multinomial logistic regression, `p̂ = softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    /// K×d.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl SoftmaxModel {
    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn probabilities_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.weights.row(k).dot(&x) + self.biases[k];
        }
        softmax_in_place(out);
    }
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in v.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in v.iter_mut() {
        *o /= total;
    }
}

/// `log Σ exp(v) − v[y]`.
fn row_nll(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[y]
}

/// Mean negative log-likelihood of the softmax model.
pub fn softmax_nll(model: &SoftmaxModel, data: &LabeledDataset) -> f64 {
    let k = model.classes();
    let rows: Vec<usize> = (0..data.len()).collect();
    let partials: Vec<f64> = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut logits = vec![0.0; k];
            chunk
                .iter()
                .map(|&i| {
                    let x = data.row(i);
                    for (c, l) in logits.iter_mut().enumerate() {
                        *l = model.weights.row(c).dot(&x) + model.biases[c];
                    }
                    row_nll(&logits, data.labels()[i] - 1)
                })
                .sum::<f64>()
        })
        .collect();
    partials.iter().sum::<f64>() / data.len() as f64
}

fn nll_gradient(model: &SoftmaxModel, data: &LabeledDataset) -> (Array2<f64>, Array1<f64>) {
    let (k, d) = (model.classes(), model.dim());
    let rows: Vec<usize> = (0..data.len()).collect();
    let partials: Vec<(Array2<f64>, Array1<f64>)> = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut gw = Array2::zeros((k, d));
            let mut gb = Array1::zeros(k);
            let mut p = vec![0.0; k];
            for &i in chunk {
                let x = data.row(i);
                model.probabilities_into(x, &mut p);
                p[data.labels()[i] - 1] -= 1.0;
                for c in 0..k {
                    gw.row_mut(c).scaled_add(p[c], &x);
                    gb[c] += p[c];
                }
            }
            (gw, gb)
        })
        .collect();
    let n = data.len() as f64;
    let (mut gw, mut gb) = (Array2::zeros((k, d)), Array1::zeros(k));
    for (w, b) in &partials {
        gw += w;
        gb += b;
    }
    (gw / n, gb / n)
}

/// Full-batch gradient descent on the mean negative log-likelihood from
/// zero, halving line search, stopping at relative decrease below 1e-8.
pub fn fit_softmax(data: &LabeledDataset) -> Result<SoftmaxModel> {
    if data.len() < data.classes() {
        return Err(Error::InvalidDataset(format!("softmax needs n >= K = {}", data.classes())));
    }
    let (k, d) = (data.classes(), data.dim());
    let mut model = SoftmaxModel { weights: Array2::zeros((k, d)), biases: Array1::zeros(k) };
    let mut nll = softmax_nll(&model, data);
    let mut step: f64 = 1.0;
    for iteration in 1..=MAX_ITERATIONS {
        let (gw, gb) = nll_gradient(&model, data);
        let sq_norm = gw.iter().chain(gb.iter()).map(|g| g * g).sum::<f64>();
        if sq_norm == 0.0 {
            break;
        }
        step = (2.0 * step).min(1e3);
        let mut accepted = None;
        while step > 1e-20 {
            let candidate = SoftmaxModel { weights: &model.weights - &(step * &gw), biases: &model.biases - &(step * &gb) };
            let cand_nll = softmax_nll(&candidate, data);
            if !cand_nll.is_finite() {
                return Err(Error::NonFiniteRisk { iteration });
            }
            if cand_nll <= nll - ARMIJO * step * sq_norm {
                accepted = Some((candidate, cand_nll));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, cand_nll)) = accepted else { break };
        let relative = (nll - cand_nll) / nll.abs().max(f64::MIN_POSITIVE);
        model = candidate;
        nll = cand_nll;
        if relative < RELATIVE_TOLERANCE {
            break;
        }
    }
    Ok(model)
}
