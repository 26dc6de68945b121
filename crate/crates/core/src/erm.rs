//! Empirical surrogate risk and its minimization over clamped affine scores.
//!
//! ```text
//! R̂_φ(f) = (1/n) Σ_i Σ_k φ(Z^i_k f_k(X_i)),   Z^i_k = 2·1{Y_i = k} − 1
//! ```
//!
//! The score class is `f_k(x) = clamp(w_k·x + b_k, −B, B)` with every
//! parameter kept in `[−B, B]`. Fitting is projected full-batch gradient
//! descent from zero with a halving Armijo line search.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::score::Scorer;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
/// Rows per parallel partial sum; partial sums are added in chunk order.
const REDUCE_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineScoreModel {
    /// K×d.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub clamp_bound: f64,
}

impl AffineScoreModel {
    pub fn zeros(classes: usize, dim: usize, clamp_bound: f64) -> Self {
        Self { weights: Array2::zeros((classes, dim)), biases: Array1::zeros(classes), clamp_bound }
    }

    fn raw(&self, k: usize, x: ArrayView1<'_, f64>) -> f64 {
        let w = self.weights.row(k);
        match (w.as_slice(), x.as_slice()) {
            (Some(w), Some(x)) => affine(w, x, self.biases[k]),
            _ => w.iter().zip(x).fold(self.biases[k], |acc, (a, b)| acc + a * b),
        }
    }

    /// Clamps every parameter into `[−B, B]`.
    pub fn project(&mut self) {
        let b = self.clamp_bound;
        self.weights.mapv_inplace(|w| w.clamp(-b, b));
        self.biases.mapv_inplace(|w| w.clamp(-b, b));
    }
}

impl Scorer for AffineScoreModel {
    fn classes(&self) -> usize {
        self.weights.nrows()
    }

    fn dim(&self) -> usize {
        self.weights.ncols()
    }

    fn score_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let b = self.clamp_bound;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.raw(k, x).clamp(-b, b);
        }
    }
}

/// Gradient of the empirical risk, same shapes as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmConfig {
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    pub initial_step: f64,
    pub loss: Loss,
    pub clamp_bound: f64,
}

impl Default for ErmConfig {
    fn default() -> Self {
        Self { max_iterations: 10_000, relative_tolerance: 1e-8, initial_step: 1.0, loss: Loss::Logistic, clamp_bound: 5.0 }
    }
}

impl ErmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::InvalidArgument("relative_tolerance must be > 0".into()));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::InvalidArgument("initial_step must be a positive real".into()));
        }
        if !(self.clamp_bound > 0.0) || !self.clamp_bound.is_finite() {
            return Err(Error::InvalidArgument("clamp_bound must be a positive real".into()));
        }
        Ok(())
    }
}

fn check_dims<S: Scorer + ?Sized>(model: &S, data: &LabeledDataset) -> Result<()> {
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: data.dim() });
    }
    if model.classes() != data.classes() {
        return Err(Error::DimensionMismatch { expected: model.classes(), got: data.classes() });
    }
    Ok(())
}

fn margin_sign(label: usize, k: usize) -> f64 {
    if label == k + 1 {
        1.0
    } else {
        -1.0
    }
}

/// R̂_φ of any score model on `data`.
pub fn empirical_phi_risk<S: Scorer + Sync + ?Sized>(model: &S, data: &LabeledDataset, loss: Loss) -> Result<f64> {
    check_dims(model, data)?;
    let k = model.classes();
    let partials: Vec<f64> = (0..data.len())
        .collect::<Vec<_>>()
        .par_chunks(REDUCE_CHUNK)
        .map(|rows| {
            let mut buf = vec![0.0; k];
            let mut total = 0.0;
            for &i in rows {
                model.score_into(data.row(i), &mut buf);
                let y = data.labels()[i];
                total += buf.iter().enumerate().map(|(c, &s)| loss.value(margin_sign(y, c) * s)).sum::<f64>();
            }
            total
        })
        .collect();
    Ok(partials.iter().sum::<f64>() / data.len() as f64)
}

/// Analytic gradient of R̂_φ for the affine class. The clamp acts as the
/// identity strictly inside `(−B, B)` and has zero derivative elsewhere.
pub fn phi_risk_gradient(model: &AffineScoreModel, data: &LabeledDataset, loss: Loss) -> Result<AffineGradient> {
    check_dims(model, data)?;
    Ok(risk_and_gradient(model, data, loss).1)
}

/// `w·x + b`, accumulated left to right.
fn affine(w: &[f64], x: &[f64], b: f64) -> f64 {
    w.iter().zip(x).fold(b, |acc, (a, c)| acc + a * c)
}

/// Risk and gradient in one pass over the rows.
fn risk_and_gradient(model: &AffineScoreModel, data: &LabeledDataset, loss: Loss) -> (f64, AffineGradient) {
    let (k, d) = (model.classes(), model.dim());
    let b = model.clamp_bound;
    let weights = model.weights.as_standard_layout();
    let w = weights.as_slice().expect("standard layout");
    let features = data.features().as_standard_layout();
    let x_all = features.as_slice().expect("standard layout");
    let labels = data.labels();
    let partials: Vec<(f64, Vec<f64>)> = (0..data.len())
        .collect::<Vec<_>>()
        .par_chunks(REDUCE_CHUNK)
        .map(|rows| {
            // weights row-major, then biases
            let mut g = vec![0.0; k * d + k];
            let mut total = 0.0;
            for &i in rows {
                let x = &x_all[i * d..(i + 1) * d];
                let y = labels[i];
                for c in 0..k {
                    let raw = affine(&w[c * d..(c + 1) * d], x, model.biases[c]);
                    let z = margin_sign(y, c);
                    if raw <= -b || raw >= b {
                        total += loss.value(z * raw.clamp(-b, b));
                        continue;
                    }
                    let (value, slope) = loss.value_and_derivative(z * raw);
                    total += value;
                    let coef = slope * z;
                    for (gj, xj) in g[c * d..(c + 1) * d].iter_mut().zip(x) {
                        *gj += coef * xj;
                    }
                    g[k * d + c] += coef;
                }
            }
            (total, g)
        })
        .collect();
    let n = data.len() as f64;
    let mut risk = 0.0;
    let mut flat = vec![0.0; k * d + k];
    for (r, g) in &partials {
        risk += r;
        for (a, b) in flat.iter_mut().zip(g) {
            *a += b;
        }
    }
    let biases = Array1::from_iter(flat[k * d..].iter().map(|v| v / n));
    flat.truncate(k * d);
    let weights = Array2::from_shape_vec((k, d), flat.into_iter().map(|v| v / n).collect()).expect("k*d entries");
    (risk / n, AffineGradient { weights, biases })
}

/// Zeroes the components of `gradient` that would push a parameter sitting
/// on the `[−B, B]` box further outward.
pub fn project_gradient(model: &AffineScoreModel, gradient: &mut AffineGradient) {
    let b = model.clamp_bound;
    let outward = |p: f64, g: f64| (p >= b && g < 0.0) || (p <= -b && g > 0.0);
    for (g, &p) in gradient.weights.iter_mut().zip(model.weights.iter()) {
        if outward(p, *g) {
            *g = 0.0;
        }
    }
    for (g, &p) in gradient.biases.iter_mut().zip(model.biases.iter()) {
        if outward(p, *g) {
            *g = 0.0;
        }
    }
}

/// Fitted model with its risk trajectory (entry 0 is the zero model).
#[derive(Debug, Clone)]
pub struct ErmFit {
    pub model: AffineScoreModel,
    pub risk_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ErmFit {
    pub fn final_risk(&self) -> f64 {
        *self.risk_history.last().expect("history holds the initial risk")
    }
}

pub fn fit_erm(data: &LabeledDataset, config: &ErmConfig) -> Result<AffineScoreModel> {
    fit_erm_traced(data, config).map(|fit| fit.model)
}

/// Projected gradient descent. Each iteration starts its line search at
/// twice the previously accepted step (capped at `initial_step`) and halves
/// until `R(θ') ≤ R(θ) − c·⟨∇R(θ), θ − θ'⟩`.
pub fn fit_erm_traced(data: &LabeledDataset, config: &ErmConfig) -> Result<ErmFit> {
    config.validate()?;
    if data.len() < data.classes() {
        return Err(Error::InvalidDataset(format!(
            "need at least K = {} rows, got {}",
            data.classes(),
            data.len()
        )));
    }
    let loss = config.loss;
    let mut model = AffineScoreModel::zeros(data.classes(), data.dim(), config.clamp_bound);
    check_dims(&model, data)?;
    let (mut risk, mut grad) = risk_and_gradient(&model, data, loss);
    if !risk.is_finite() {
        return Err(Error::NonFiniteRisk { iteration: 0 });
    }
    let mut history = vec![risk];
    // the first trial from zero stays within 1/L; later trials use the
    // Barzilai-Borwein step of the last accepted move
    let mut trial = config.initial_step.min(smoothness_step(data, loss, config.clamp_bound));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut step = trial;
        let accepted = loop {
            let mut candidate = model.clone();
            candidate.weights.scaled_add(-step, &grad.weights);
            candidate.biases.scaled_add(-step, &grad.biases);
            candidate.project();
            let decrease: f64 = (&model.weights - &candidate.weights).iter().zip(grad.weights.iter()).map(|(a, b)| a * b).sum::<f64>()
                + (&model.biases - &candidate.biases).dot(&grad.biases);
            let (candidate_risk, candidate_grad) = risk_and_gradient(&candidate, data, loss);
            if !candidate_risk.is_finite() {
                return Err(Error::NonFiniteRisk { iteration: iterations });
            }
            if candidate_risk <= risk - ARMIJO * decrease {
                break Some((candidate, candidate_risk, candidate_grad));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((candidate, candidate_risk, candidate_grad)) = accepted else {
            converged = true;
            break;
        };
        let relative = (risk - candidate_risk) / risk.abs().max(f64::MIN_POSITIVE);
        trial = barzilai_borwein(&model, &candidate, &grad, &candidate_grad).unwrap_or(2.0 * step).min(config.initial_step);
        model = candidate;
        risk = candidate_risk;
        grad = candidate_grad;
        history.push(risk);
        if relative < config.relative_tolerance {
            converged = true;
            break;
        }
    }
    Ok(ErmFit { model, risk_history: history, iterations, converged })
}

/// `1/L` for `L = sup φ'' · mean ‖(x, 1)‖²`, a bound on the curvature of
/// every per-class block of R̂_φ.
fn smoothness_step(data: &LabeledDataset, loss: Loss, bound: f64) -> f64 {
    let mean_norm = data.features().rows().into_iter().map(|x| 1.0 + x.dot(&x)).sum::<f64>() / data.len() as f64;
    1.0 / (loss.curvature_bound(bound) * mean_norm)
}

/// `s·s / s·y` for the parameter move `s` and gradient change `y`; `None`
/// when the curvature along `s` is not positive.
fn barzilai_borwein(
    from: &AffineScoreModel,
    to: &AffineScoreModel,
    from_grad: &AffineGradient,
    to_grad: &AffineGradient,
) -> Option<f64> {
    let s: Vec<f64> = flatten_parameters(to).iter().zip(flatten_parameters(from)).map(|(a, b)| a - b).collect();
    let y: Vec<f64> = to_grad.flatten().iter().zip(from_grad.flatten()).map(|(a, b)| a - b).collect();
    let ss: f64 = s.iter().map(|v| v * v).sum();
    let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
    let step = ss / sy;
    (sy > 0.0 && step.is_finite()).then_some(step)
}

/// Flattens the parameters as `[weights row-major, biases]`.
pub fn flatten_parameters(model: &AffineScoreModel) -> Vec<f64> {
    model.weights.iter().chain(model.biases.iter()).copied().collect()
}

/// Inverse of [`flatten_parameters`].
pub fn with_parameters(template: &AffineScoreModel, params: &[f64]) -> AffineScoreModel {
    let (k, d) = (template.classes(), template.dim());
    assert_eq!(params.len(), k * d + k);
    AffineScoreModel {
        weights: Array2::from_shape_vec((k, d), params[..k * d].to_vec()).expect("shape"),
        biases: Array1::from(params[k * d..].to_vec()),
        clamp_bound: template.clamp_bound,
    }
}

impl AffineGradient {
    pub fn flatten(&self) -> Vec<f64> {
        self.weights.iter().chain(self.biases.iter()).copied().collect()
    }
}
