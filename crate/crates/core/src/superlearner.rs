//! V-fold cross-validated aggregation of score algorithms.
//!
//! Each algorithm `m` is trained on the complement of fold `v` and scored on
//! fold `v`. For simplex weights `w`, the combined score is `Σ_m w_m f^m`
//! and its cross-validated risk is
//!
//! ```text
//! R̂ⁿ_φ(w) = (1/V) Σ_v (1/|B_v|) Σ_{i∈B_v} Σ_k φ(Z^i_k Σ_m w_m f^m_{k,−v}(X_i))
//! ```
//!
//! which is convex in `w`. The aggregate minimizes it over the simplex.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{vfold_partition, FoldPartition, LabeledDataset};
use crate::error::{Error, Result};
use crate::learners::ScoreAlgorithm;
use crate::losses::Loss;
use crate::rng::RandomSeed;
use crate::score::{ScoreModel, Scorer};

pub const DEFAULT_FOLDS: usize = 5;
const EG_MAX_ITERATIONS: usize = 5_000;
const EG_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Held-out scores of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldScores {
    /// Training rows in the fold, ascending.
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
    /// One `|B_v| × K` matrix per algorithm.
    pub scores: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct CvRiskTable {
    classes: usize,
    folds: Vec<FoldScores>,
    /// `fold_models[v][m]`: algorithm `m` trained without fold `v`.
    fold_models: Vec<Vec<ScoreModel>>,
}

impl CvRiskTable {
    /// Builds a table from precomputed held-out scores.
    pub fn from_scores(classes: usize, folds: Vec<FoldScores>) -> Result<Self> {
        let m = folds.first().map(|f| f.scores.len()).unwrap_or(0);
        if folds.len() < 2 || m == 0 {
            return Err(Error::InvalidArgument("table needs >= 2 folds and >= 1 algorithm".into()));
        }
        for f in &folds {
            if f.scores.len() != m || f.labels.is_empty() || f.labels.len() != f.rows.len() {
                return Err(Error::InvalidArgument("inconsistent fold shapes".into()));
            }
            if f.scores.iter().any(|s| s.nrows() != f.labels.len() || s.ncols() != classes) {
                return Err(Error::InvalidArgument("inconsistent score matrix shapes".into()));
            }
            if f.labels.iter().any(|&l| l == 0 || l > classes) {
                return Err(Error::InvalidArgument("fold label out of range".into()));
            }
        }
        Ok(Self { classes, folds, fold_models: Vec::new() })
    }

    pub fn folds(&self) -> &[FoldScores] {
        &self.folds
    }

    pub fn algorithms(&self) -> usize {
        self.folds[0].scores.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn fold_models(&self) -> &[Vec<ScoreModel>] {
        &self.fold_models
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.folds.iter().map(|f| f.rows.len()).collect()
    }
}

/// Trains every algorithm on every fold complement and scores the fold.
pub fn build_cv_table(
    data: &LabeledDataset,
    algorithms: &[ScoreAlgorithm],
    partition: &FoldPartition,
) -> Result<CvRiskTable> {
    if algorithms.is_empty() {
        return Err(Error::InvalidArgument("empty algorithm library".into()));
    }
    if partition.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: partition.len() });
    }
    let v_count = partition.folds();
    let jobs: Vec<(usize, usize)> = (0..v_count).flat_map(|v| (0..algorithms.len()).map(move |m| (v, m))).collect();
    let fitted: Vec<Result<(ScoreModel, Array2<f64>)>> = jobs
        .par_iter()
        .map(|&(v, m)| {
            let train = data.subset(&partition.complement(v));
            let held = data.subset(&partition.fold(v));
            let model = algorithms[m].fit(&train).map_err(|e| match e {
                Error::InvalidDataset(msg) => {
                    Error::InvalidDataset(format!("fold {} complement, {}: {msg}", v + 1, algorithms[m]))
                }
                other => other,
            })?;
            let scores = model.score_matrix(held.features().view())?;
            Ok((model, scores))
        })
        .collect();
    let mut fitted = fitted.into_iter();
    let mut folds = Vec::with_capacity(v_count);
    let mut fold_models = Vec::with_capacity(v_count);
    for v in 0..v_count {
        let rows = partition.fold(v);
        let labels = rows.iter().map(|&i| data.labels()[i]).collect();
        let mut scores = Vec::with_capacity(algorithms.len());
        let mut models = Vec::with_capacity(algorithms.len());
        for _ in algorithms {
            let (model, s) = fitted.next().expect("one result per job")?;
            models.push(model);
            scores.push(s);
        }
        folds.push(FoldScores { rows, labels, scores });
        fold_models.push(models);
    }
    let mut table = CvRiskTable::from_scores(data.classes(), folds)?;
    table.fold_models = fold_models;
    Ok(table)
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

pub const SIMPLEX_TOLERANCE: f64 = 1e-10;

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weights {weights:?} are not nonnegative reals")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn vertex(m: usize, count: usize) -> Self {
        let mut w = vec![0.0; count];
        w[m] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        SimplexWeights::new(v).map_err(|e| e.to_string())
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

fn margin(label: usize, k: usize) -> f64 {
    if label == k + 1 {
        1.0
    } else {
        -1.0
    }
}

fn check_weights(table: &CvRiskTable, weights: &[f64]) -> Result<()> {
    if weights.len() != table.algorithms() {
        return Err(Error::DimensionMismatch { expected: table.algorithms(), got: weights.len() });
    }
    Ok(())
}

/// Risk and gradient in weight space for arbitrary (not necessarily simplex) `w`.
fn risk_and_gradient(table: &CvRiskTable, w: &[f64], loss: Loss, with_gradient: bool) -> (f64, Vec<f64>) {
    let m_count = w.len();
    let k = table.classes;
    let per_fold: Vec<(f64, Vec<f64>)> = table
        .folds
        .par_iter()
        .map(|fold| {
            let mut risk = 0.0;
            let mut grad = vec![0.0; m_count];
            for (i, &y) in fold.labels.iter().enumerate() {
                for c in 0..k {
                    let z = margin(y, c);
                    let f: f64 = fold.scores.iter().zip(w).map(|(s, wm)| wm * s[[i, c]]).sum();
                    risk += loss.value(z * f);
                    if with_gradient {
                        let d = loss.derivative(z * f) * z;
                        for (g, s) in grad.iter_mut().zip(&fold.scores) {
                            *g += d * s[[i, c]];
                        }
                    }
                }
            }
            let size = fold.labels.len() as f64;
            grad.iter_mut().for_each(|g| *g /= size);
            (risk / size, grad)
        })
        .collect();
    let v = per_fold.len() as f64;
    let mut risk = 0.0;
    let mut grad = vec![0.0; m_count];
    for (r, g) in &per_fold {
        risk += r;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g /= v);
    (risk / v, grad)
}

/// Cross-validated surrogate risk of the `weights` combination.
pub fn cv_phi_risk(table: &CvRiskTable, weights: &SimplexWeights, loss: Loss) -> Result<f64> {
    check_weights(table, weights.as_slice())?;
    Ok(risk_and_gradient(table, weights.as_slice(), loss, false).0)
}

/// Gradient of [`cv_phi_risk`] with respect to the weights.
pub fn cv_phi_risk_gradient(table: &CvRiskTable, weights: &SimplexWeights, loss: Loss) -> Result<Vec<f64>> {
    check_weights(table, weights.as_slice())?;
    Ok(risk_and_gradient(table, weights.as_slice(), loss, true).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Exponentiated-gradient descent on the simplex.
    Continuous,
    /// Exhaustive search over `{i / resolution}` lattice points of the simplex.
    Grid { resolution: usize },
}

/// Number of lattice points visited by grid mode.
pub fn grid_size(algorithms: usize, resolution: usize) -> u128 {
    // C(resolution + M − 1, M − 1)
    let (n, r) = ((resolution + algorithms - 1) as u128, (algorithms - 1) as u128);
    (0..r).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn for_each_composition(total: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(remaining: usize, slot: usize, current: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == current.len() {
            current[slot] = remaining;
            f(current);
            return;
        }
        for i in (0..=remaining).rev() {
            current[slot] = i;
            rec(remaining - i, slot + 1, current, f);
        }
    }
    let mut current = vec![0; parts];
    rec(total, 0, &mut current, f);
}

/// Minimizes the cross-validated risk over the simplex. The result never
/// has higher risk than the best single vertex.
pub fn fit_superlearner_weights(table: &CvRiskTable, loss: Loss, mode: WeightMode) -> Result<SimplexWeights> {
    let m = table.algorithms();
    let eval = |w: &[f64]| -> Result<f64> {
        let r = risk_and_gradient(table, w, loss, false).0;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::NonFiniteRisk { iteration: 0 })
        }
    };
    let (mut best_w, mut best_r) = match mode {
        WeightMode::Continuous => exponentiated_gradient(table, loss)?,
        WeightMode::Grid { resolution } => {
            if resolution == 0 {
                return Err(Error::InvalidArgument("grid resolution must be >= 1".into()));
            }
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut failure = None;
            for_each_composition(resolution, m, &mut |counts| {
                let w: Vec<f64> = counts.iter().map(|&c| c as f64 / resolution as f64).collect();
                match eval(&w) {
                    Ok(r) if best.as_ref().is_none_or(|(_, br)| r < *br) => best = Some((w, r)),
                    Ok(_) => {}
                    Err(e) => failure = Some(e),
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            best.expect("lattice is non-empty")
        }
    };
    for vertex in 0..m {
        let w = SimplexWeights::vertex(vertex, m);
        let r = eval(w.as_slice())?;
        if r < best_r {
            best_w = w.0;
            best_r = r;
        }
    }
    let total: f64 = best_w.iter().sum();
    best_w.iter_mut().for_each(|w| *w /= total);
    SimplexWeights::new(best_w)
}

fn exponentiated_gradient(table: &CvRiskTable, loss: Loss) -> Result<(Vec<f64>, f64)> {
    let m = table.algorithms();
    let mut w = vec![1.0 / m as f64; m];
    let (mut risk, mut grad) = risk_and_gradient(table, &w, loss, true);
    if !risk.is_finite() {
        return Err(Error::NonFiniteRisk { iteration: 0 });
    }
    let mut step: f64 = 1.0;
    for iteration in 1..=EG_MAX_ITERATIONS {
        step = (2.0 * step).min(1e6);
        let g_min = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let accepted = loop {
            let mut cand: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi * (-step * (gi - g_min)).exp()).collect();
            let total: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|c| *c /= total);
            let (r, g) = risk_and_gradient(table, &cand, loss, true);
            if !r.is_finite() {
                return Err(Error::NonFiniteRisk { iteration });
            }
            if r <= risk {
                break Some((cand, r, g));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((cand, r, g)) = accepted else { break };
        let relative = (risk - r) / risk.abs().max(f64::MIN_POSITIVE);
        w = cand;
        risk = r;
        grad = g;
        if relative < EG_RELATIVE_TOLERANCE {
            break;
        }
    }
    Ok((w, risk))
}

/// How the final base models are obtained after weight selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitPolicy {
    /// Refit every algorithm on the full training set.
    #[default]
    FullData,
    /// Average the V fold-complement models of each algorithm.
    FoldAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedScoreModel {
    pub base_models: Vec<ScoreModel>,
    pub weights: SimplexWeights,
}

impl AggregatedScoreModel {
    pub fn new(base_models: Vec<ScoreModel>, weights: SimplexWeights) -> Result<Self> {
        let first = base_models.first().ok_or_else(|| Error::InvalidArgument("no base models".into()))?;
        if weights.len() != base_models.len() {
            return Err(Error::DimensionMismatch { expected: base_models.len(), got: weights.len() });
        }
        if base_models.iter().any(|b| b.classes() != first.classes() || b.dim() != first.dim()) {
            return Err(Error::InvalidArgument("base models disagree on shape".into()));
        }
        Ok(Self { base_models, weights })
    }
}

impl Scorer for AggregatedScoreModel {
    fn classes(&self) -> usize {
        self.base_models[0].classes()
    }

    fn dim(&self) -> usize {
        self.base_models[0].dim()
    }

    fn score_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for (model, &w) in self.base_models.iter().zip(self.weights.as_slice()) {
            if w == 0.0 {
                continue;
            }
            model.score_into(x, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperLearnerConfig {
    pub folds: usize,
    pub loss: Loss,
    pub mode: WeightMode,
    pub refit: RefitPolicy,
}

impl Default for SuperLearnerConfig {
    fn default() -> Self {
        Self { folds: DEFAULT_FOLDS, loss: Loss::Boosting, mode: WeightMode::Continuous, refit: RefitPolicy::FullData }
    }
}

/// Aggregate plus the cross-validation diagnostics that produced it.
#[derive(Debug, Clone)]
pub struct SuperLearnerFit {
    pub model: AggregatedScoreModel,
    pub weights: SimplexWeights,
    pub cv_risk: f64,
    /// Cross-validated risk of each algorithm alone.
    pub vertex_cv_risks: Vec<f64>,
    pub table: CvRiskTable,
}

pub fn fit_aggregated_model(
    data: &LabeledDataset,
    algorithms: &[ScoreAlgorithm],
    config: &SuperLearnerConfig,
    seed: RandomSeed,
) -> Result<SuperLearnerFit> {
    let partition = vfold_partition(data.len(), config.folds, seed)?;
    let table = build_cv_table(data, algorithms, &partition)?;
    let weights = fit_superlearner_weights(&table, config.loss, config.mode)?;
    let cv_risk = cv_phi_risk(&table, &weights, config.loss)?;
    let m = algorithms.len();
    let vertex_cv_risks =
        (0..m).map(|v| cv_phi_risk(&table, &SimplexWeights::vertex(v, m), config.loss)).collect::<Result<_>>()?;
    let model = match config.refit {
        RefitPolicy::FullData => {
            let base = algorithms.par_iter().map(|a| a.fit(data)).collect::<Result<Vec<_>>>()?;
            AggregatedScoreModel::new(base, weights.clone())?
        }
        RefitPolicy::FoldAverage => {
            let v = config.folds as f64;
            let mut base = Vec::with_capacity(m * config.folds);
            let mut w = Vec::with_capacity(m * config.folds);
            for models in table.fold_models() {
                for (model, &wm) in models.iter().zip(weights.as_slice()) {
                    base.push(model.clone());
                    w.push(wm / v);
                }
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            AggregatedScoreModel::new(base, SimplexWeights::new(w)?)?
        }
    };
    Ok(SuperLearnerFit { model, weights, cv_risk, vertex_cv_risks, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn random_table(seed: u64, m: usize) -> CvRiskTable {
        let mut rng = RandomSeed(seed).rng();
        let folds = (0..3)
            .map(|v| {
                let n = 20 + v;
                FoldScores {
                    rows: (0..n).collect(),
                    labels: (0..n).map(|_| rng.random_range(1..=3)).collect(),
                    scores: (0..m).map(|_| Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0))).collect(),
                }
            })
            .collect();
        CvRiskTable::from_scores(3, folds).unwrap()
    }

    #[test]
    fn simplex_validation() {
        assert!(SimplexWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexWeights::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexWeights::new(vec![]).is_err());
        assert!(serde_json::from_str::<SimplexWeights>("[0.2,0.2]").is_err());
        assert_eq!(grid_size(3, 100), 5151);
        let mut count = 0;
        for_each_composition(4, 3, &mut |c| {
            assert_eq!(c.iter().sum::<usize>(), 4);
            count += 1;
        });
        assert_eq!(count as u128, grid_size(3, 4));
    }

    #[test]
    fn hand_computed_single_fold_risk() {
        let fold = |labels: Vec<usize>, s: Array2<f64>| FoldScores { rows: (0..labels.len()).collect(), labels, scores: vec![s] };
        let table = CvRiskTable::from_scores(
            2,
            vec![fold(vec![1], array![[0.5, -0.5]]), fold(vec![2, 1], array![[0.0, 1.0], [1.0, 1.0]])],
        )
        .unwrap();
        // fold 1: φ(0.5) + φ(0.5); fold 2: [φ(0) + φ(1)] and [φ(1) + φ(−1)], averaged
        let phi = |x: f64| (-x).exp();
        let expected = 0.5 * (2.0 * phi(0.5) + 0.5 * (phi(0.0) + phi(1.0) + phi(1.0) + phi(-1.0)));
        let r = cv_phi_risk(&table, &SimplexWeights::uniform(1), Loss::Boosting).unwrap();
        assert!((r - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_columns_are_weight_invariant() {
        let mut table = random_table(1, 1);
        for f in &mut table.folds {
            let s = f.scores[0].clone();
            f.scores.push(s);
        }
        let vertex = cv_phi_risk(&table, &SimplexWeights::vertex(0, 2), Loss::Logistic).unwrap();
        for w in [0.1, 0.5, 0.77] {
            let r = cv_phi_risk(&table, &SimplexWeights::new(vec![w, 1.0 - w]).unwrap(), Loss::Logistic).unwrap();
            assert!((r - vertex).abs() < 1e-12);
        }
        let fitted = fit_superlearner_weights(&table, Loss::Logistic, WeightMode::Continuous).unwrap();
        let r = cv_phi_risk(&table, &fitted, Loss::Logistic).unwrap();
        assert!((r - vertex).abs() <= 1e-10);
    }

    #[test]
    fn convex_in_weights() {
        let table = random_table(2, 3);
        let mut rng = RandomSeed(3).rng();
        let mut draw = || {
            let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-3).collect();
            let t: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / t).collect::<Vec<_>>()
        };
        for loss in Loss::ALL {
            for _ in 0..100 {
                let (a, b) = (draw(), draw());
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                let r = |w: Vec<f64>| cv_phi_risk(&table, &SimplexWeights::new(w).unwrap(), loss).unwrap();
                assert!(r(mid) <= 0.5 * (r(a.clone()) + r(b.clone())) + 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let table = random_table(4, 3);
        let w = SimplexWeights::new(vec![0.2, 0.3, 0.5]).unwrap();
        let g = cv_phi_risk_gradient(&table, &w, Loss::Boosting).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut up = w.as_slice().to_vec();
            let mut down = up.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (risk_and_gradient(&table, &up, Loss::Boosting, false).0
                - risk_and_gradient(&table, &down, Loss::Boosting, false).0)
                / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()));
        }
    }

    #[test]
    fn continuous_matches_grid_for_two_algorithms() {
        for seed in 0..5 {
            let table = random_table(10 + seed, 2);
            for loss in Loss::ALL {
                let cont = fit_superlearner_weights(&table, loss, WeightMode::Continuous).unwrap();
                let grid = fit_superlearner_weights(&table, loss, WeightMode::Grid { resolution: 100 }).unwrap();
                let rc = cv_phi_risk(&table, &cont, loss).unwrap();
                let rg = cv_phi_risk(&table, &grid, loss).unwrap();
                assert!((rc - rg).abs() < 1e-4, "{loss}: {rc} vs {rg}");
                assert!(rc <= rg + 1e-12);
                let vmin = (0..2)
                    .map(|m| cv_phi_risk(&table, &SimplexWeights::vertex(m, 2), loss).unwrap())
                    .fold(f64::INFINITY, f64::min);
                assert!(rc <= vmin + 1e-8);
            }
        }
    }

    #[test]
    fn dominant_column_takes_the_weight() {
        // column 0 is a perfect margin score, the others are noise
        let mut rng = RandomSeed(5).rng();
        let folds = (0..4)
            .map(|_| {
                let n = 50;
                let labels: Vec<usize> = (0..n).map(|_| rng.random_range(1..=3)).collect();
                let exact = Array2::from_shape_fn((n, 3), |(i, k)| if labels[i] == k + 1 { 1.0 } else { -1.0 });
                let mut scores = vec![exact];
                for _ in 0..2 {
                    scores.push(Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0)));
                }
                FoldScores { rows: (0..n).collect(), labels, scores }
            })
            .collect();
        let table = CvRiskTable::from_scores(3, folds).unwrap();
        let cont = fit_superlearner_weights(&table, Loss::Boosting, WeightMode::Continuous).unwrap();
        let grid = fit_superlearner_weights(&table, Loss::Boosting, WeightMode::Grid { resolution: 50 }).unwrap();
        assert!(cont.as_slice()[0] >= 0.99, "{cont:?}");
        assert!(grid.as_slice()[0] >= 0.99, "{grid:?}");
    }

    #[test]
    fn shape_errors() {
        let table = random_table(6, 2);
        assert!(cv_phi_risk(&table, &SimplexWeights::uniform(3), Loss::Boosting).is_err());
        assert!(fit_superlearner_weights(&table, Loss::Boosting, WeightMode::Grid { resolution: 0 }).is_err());
        assert!(CvRiskTable::from_scores(3, vec![]).is_err());
    }
}
