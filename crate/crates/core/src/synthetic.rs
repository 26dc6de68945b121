//! Gaussian-mixture models with known class posteriors.
//!
//! Labels are uniform on `1..=K` and `X | Y = k ~ N(μ_k, I)`, so
//! `p_k(x) ∝ exp(−‖x − μ_k‖² / 2)`. The population function
//! `G(t) = Σ_k P(p_k(X) ≥ t)` has no closed form; it is represented by an
//! [`EmpiricalG`] over a large Monte Carlo pool of posterior vectors.
//!
//! The oracle set at level β is `{k : G(p_k(x)) ≤ β}`; the `max` baseline
//! keeps the β labels with largest `p_k(x)`.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::EmpiricalG;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::labelset::LabelSet;
use crate::rng::RandomSeed;
use crate::score::{score_rows, Scorer};

/// Rows generated per derived random stream.
pub const SAMPLE_CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureModel {
    /// K×d.
    means: Array2<f64>,
}

impl GaussianMixtureModel {
    pub fn new(means: Array2<f64>) -> Result<Self> {
        if means.nrows() < 2 || means.ncols() == 0 {
            return Err(Error::InvalidArgument("mixture needs K >= 2 means of dimension >= 1".into()));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mixture mean".into()));
        }
        Ok(Self { means })
    }

    /// Means drawn i.i.d. uniform on `[0, 4]^dim`.
    pub fn remark1(classes: usize, dim: usize, seed: RandomSeed) -> Result<Self> {
        let mut rng = seed.rng();
        let means = Array2::from_shape_simple_fn((classes, dim), || rng.random_range(0.0..=4.0));
        Self::new(means)
    }

    pub fn classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn posterior_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (o, mu) in out.iter_mut().zip(self.means.rows()) {
            let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            *o = -0.5 * sq;
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    pub fn posterior(&self, x: ArrayView1<'_, f64>) -> Result<PosteriorVector> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut p = vec![0.0; self.classes()];
        self.posterior_into(x, &mut p);
        Ok(PosteriorVector(p))
    }

    /// Posterior vectors of every row.
    pub fn posterior_matrix(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        score_rows(&PosteriorScorer(self), features)
    }
}

struct PosteriorScorer<'a>(&'a GaussianMixtureModel);

impl Scorer for PosteriorScorer<'_> {
    fn classes(&self) -> usize {
        self.0.classes()
    }

    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn score_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        self.0.posterior_into(x, out)
    }
}

/// Class probabilities `p_k(x)`, indexed by `label - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector(pub Vec<f64>);

impl PosteriorVector {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// Draws `count` labeled rows. Rows are produced in chunks of
/// [`SAMPLE_CHUNK`], chunk `c` using the stream `seed.derive(c)`.
pub fn sample_mixture(model: &GaussianMixtureModel, count: usize, seed: RandomSeed) -> Result<LabeledDataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let (k, d) = (model.classes(), model.dim());
    let mut features = Array2::zeros((count, d));
    let mut labels = vec![0usize; count];
    features
        .axis_chunks_iter_mut(Axis(0), SAMPLE_CHUNK)
        .into_par_iter()
        .zip(labels.par_chunks_mut(SAMPLE_CHUNK))
        .enumerate()
        .for_each(|(c, (mut rows, labs))| {
            let mut rng = seed.derive(c as u64).rng();
            for (mut row, lab) in rows.rows_mut().into_iter().zip(labs.iter_mut()) {
                let class = rng.random_range(0..k);
                *lab = class + 1;
                for (x, mu) in row.iter_mut().zip(model.means.row(class)) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x = mu + z;
                }
            }
        });
    LabeledDataset::new(features, labels, k)
}

/// Monte Carlo stand-in for the population G: the pooled posterior vectors
/// of `pool_size` fresh draws.
pub fn true_g(model: &GaussianMixtureModel, pool_size: usize, seed: RandomSeed) -> Result<EmpiricalG> {
    let sample = sample_mixture(model, pool_size, seed)?;
    let post = model.posterior_matrix(sample.features().view());
    let (flat, _) = post.into_raw_vec_and_offset();
    EmpiricalG::from_flat(flat, pool_size, model.classes())
}

/// `{k : G(p_k) ≤ β}`.
pub fn oracle_beta_set(g_true: &EmpiricalG, beta: f64, p: &[f64]) -> Result<LabelSet> {
    g_true.check_beta(beta)?;
    if p.len() != g_true.classes() {
        return Err(Error::DimensionMismatch { expected: g_true.classes(), got: p.len() });
    }
    Ok(LabelSet::from_sorted_indices((0..p.len()).filter(|&k| g_true.includes(p[k], beta))))
}

/// The `size` labels with the largest probabilities; ties go to the
/// smaller label.
pub fn max_set(p: &[f64], size: usize) -> Result<LabelSet> {
    if size == 0 || size > p.len() {
        return Err(Error::InvalidArgument(format!("set size {size} outside 1..={}", p.len())));
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    order.truncate(size);
    order.sort_unstable();
    Ok(LabelSet::from_sorted_indices(order))
}

/// Empirical risk `P(Y ∉ Γ(X))` and information `E|Γ(X)|` with their
/// Monte Carlo standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskInformation {
    pub risk: f64,
    pub information: f64,
    pub risk_std_error: f64,
    pub information_std_error: f64,
    /// Fraction of rows with an empty set.
    pub empty_fraction: f64,
}

impl RiskInformation {
    /// From per-row sets and labels. Panics on length mismatch or no rows.
    pub fn from_sets(sets: &[LabelSet], labels: &[usize]) -> Self {
        assert_eq!(sets.len(), labels.len());
        assert!(!sets.is_empty());
        let misses: Vec<f64> = sets.iter().zip(labels).map(|(s, &y)| f64::from(!s.contains(y))).collect();
        let sizes: Vec<f64> = sets.iter().map(|s| s.len() as f64).collect();
        let (risk, risk_std_error) = mean_and_std_error(&misses);
        let (information, information_std_error) = mean_and_std_error(&sizes);
        let empty_fraction = sets.iter().filter(|s| s.is_empty()).count() as f64 / sets.len() as f64;
        Self { risk, information, risk_std_error, information_std_error, empty_fraction }
    }
}

pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Applies `rule` to every test row and reports risk and information.
pub fn estimate_risk_and_information<F>(rule: F, test: &LabeledDataset) -> RiskInformation
where
    F: Fn(ArrayView1<'_, f64>) -> LabelSet + Sync,
{
    let sets: Vec<LabelSet> = (0..test.len()).into_par_iter().map(|i| rule(test.row(i))).collect();
    RiskInformation::from_sets(&sets, test.labels())
}

/// `P(Y ∉ Γ(X)) + t · E|Γ(X)|` on the test rows.
pub fn lt_risk<F>(rule: F, test: &LabeledDataset, t: f64) -> Result<f64>
where
    F: Fn(ArrayView1<'_, f64>) -> LabelSet + Sync,
{
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("trade-off weight {t} must be >= 0")));
    }
    let ri = estimate_risk_and_information(rule, test);
    Ok(ri.risk + t * ri.information)
}

/// Risk computed from known posteriors, `E[1 − Σ_{k∈Γ(X)} p_k(X)]`: an
/// unbiased, lower-variance estimate of `P(Y ∉ Γ(X))`. Returns the mean
/// and its standard error.
pub fn conditional_risk(sets: &[LabelSet], posteriors: ArrayView2<'_, f64>) -> (f64, f64) {
    let per_row: Vec<f64> = sets
        .iter()
        .zip(posteriors.rows())
        .map(|(s, p)| 1.0 - s.labels().iter().map(|&l| p[l - 1]).sum::<f64>())
        .collect();
    mean_and_std_error(&per_row)
}

/// Both sides of the excess-risk identity for a per-class threshold rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `R(Γ) − R(Γ*)`.
    pub lhs: f64,
    /// `E[Σ_{k ∈ Γ* Δ Γ} |p_k(X) − G⁻¹(β)|]`.
    pub rhs: f64,
    /// Standard error of `lhs`.
    pub lhs_std_error: f64,
    /// `G⁻¹(β)`.
    pub g_level: f64,
    /// Scalar shift added to every threshold.
    pub shift: f64,
    pub candidate_information: f64,
    pub oracle_information: f64,
}

/// Targets within which the candidate's information is normalized to β.
pub const INFORMATION_MATCH: f64 = 1e-3;

/// Normalizes the candidate rule `{k : p_k(x) ≥ threshold_k + c}` to
/// information β by bisection on the scalar `c`, then evaluates both sides
/// of the identity on one Monte Carlo draw of `mc_size` rows. `G` comes from
/// the same draw, and risks use the posterior form of [`conditional_risk`].
pub fn excess_risk_identity_check(
    model: &GaussianMixtureModel,
    beta: f64,
    per_class_thresholds: &[f64],
    mc_size: usize,
    seed: RandomSeed,
) -> Result<IdentityCheck> {
    let k = model.classes();
    if per_class_thresholds.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: per_class_thresholds.len() });
    }
    if per_class_thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("non-finite threshold".into()));
    }
    let sample = sample_mixture(model, mc_size, seed)?;
    let post = model.posterior_matrix(sample.features().view());
    let g = EmpiricalG::from_flat(post.iter().copied().collect(), mc_size, k)?;
    let g_level = g.inverse(beta)?;

    let information = |shift: f64| -> f64 {
        let count: usize = post
            .axis_chunks_iter(Axis(0), SAMPLE_CHUNK)
            .into_par_iter()
            .map(|chunk| {
                chunk
                    .rows()
                    .into_iter()
                    .map(|p| p.iter().zip(per_class_thresholds).filter(|(pk, th)| **pk >= **th + shift).count())
                    .sum::<usize>()
            })
            .sum();
        count as f64 / mc_size as f64
    };

    let max_th = per_class_thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_th = per_class_thresholds.iter().copied().fold(f64::INFINITY, f64::min);
    // every label enters at `lo`, none at `hi`
    let (mut lo, mut hi) = (-1.0 - max_th, 1.0 + 1e-12 - min_th);
    let mut shift = 0.0;
    let mut info = information(shift);
    let mut iterations = 0;
    while (info - beta).abs() > INFORMATION_MATCH {
        if iterations == 200 {
            return Err(Error::NoConvergence(format!(
                "information {info} did not reach {beta} within {INFORMATION_MATCH}"
            )));
        }
        if info > beta {
            lo = shift;
        } else {
            hi = shift;
        }
        shift = 0.5 * (lo + hi);
        info = information(shift);
        iterations += 1;
    }

    let mut lhs_terms = Vec::with_capacity(mc_size);
    let mut rhs_total = 0.0;
    let mut oracle_size = 0usize;
    for p in post.rows() {
        let mut diff = 0.0;
        let mut sym = 0.0;
        for (&pk, &th) in p.iter().zip(per_class_thresholds) {
            let in_oracle = g.includes(pk, beta);
            let in_candidate = pk >= th + shift;
            oracle_size += usize::from(in_oracle);
            if in_oracle != in_candidate {
                sym += (pk - g_level).abs();
                // risk(Γ) − risk(Γ*) = Σ_{Γ*∖Γ} p_k − Σ_{Γ∖Γ*} p_k
                diff += if in_oracle { pk } else { -pk };
            }
        }
        lhs_terms.push(diff);
        rhs_total += sym;
    }
    let (lhs, lhs_std_error) = mean_and_std_error(&lhs_terms);
    Ok(IdentityCheck {
        lhs,
        rhs: rhs_total / mc_size as f64,
        lhs_std_error,
        g_level,
        shift,
        candidate_information: info,
        oracle_information: oracle_size as f64 / mc_size as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn two_class() -> GaussianMixtureModel {
        GaussianMixtureModel::new(array![[0.0], [2.0]]).unwrap()
    }

    #[test]
    fn posterior_examples() {
        let m = two_class();
        let p = m.posterior(array![1.0].view()).unwrap();
        assert_abs_diff_eq!(p.probs()[0], 0.5, epsilon = 1e-15);
        let p = m.posterior(array![0.0].view()).unwrap();
        // density ratio φ(0; 0) / (φ(0; 0) + φ(0; 2)) with unit variance
        let (a, b) = ((-0.0f64).exp(), (-2.0f64).exp());
        assert_abs_diff_eq!(p.probs()[0], a / (a + b), epsilon = 1e-15);
        assert_abs_diff_eq!(p.probs()[0], 1.0 / (1.0 + (-2.0f64).exp()), epsilon = 1e-15);
        assert!(m.posterior(array![0.0, 1.0].view()).is_err());

        let sym = GaussianMixtureModel::new(array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let p = sym.posterior(array![0.0, 0.0].view()).unwrap();
        for &pk in p.probs() {
            assert_abs_diff_eq!(pk, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn posterior_normalized_and_far_queries_finite() {
        let m = GaussianMixtureModel::remark1(10, 10, RandomSeed(3)).unwrap();
        let data = sample_mixture(&m, 10_000, RandomSeed(4)).unwrap();
        let post = m.posterior_matrix(data.features().view());
        for row in post.rows() {
            assert!((row.sum() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        let far = m.posterior(Array2::from_elem((1, 10), 1e4).row(0)).unwrap();
        assert!((far.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_frequencies_and_determinism() {
        let m = two_class();
        let a = sample_mixture(&m, 10_000, RandomSeed(1)).unwrap();
        let freq = a.class_counts()[0] as f64 / 10_000.0;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
        assert_eq!(a, sample_mixture(&m, 10_000, RandomSeed(1)).unwrap());
        assert_ne!(a, sample_mixture(&m, 10_000, RandomSeed(2)).unwrap());
        assert!(sample_mixture(&m, 0, RandomSeed(1)).is_err());
        // class-conditional means
        let mut sums = [0.0; 2];
        for (x, &y) in a.features().column(0).iter().zip(a.labels()) {
            sums[y - 1] += x;
        }
        let counts = a.class_counts();
        assert!((sums[0] / counts[0] as f64).abs() < 0.05);
        assert!((sums[1] / counts[1] as f64 - 2.0).abs() < 0.05);
    }

    #[test]
    fn remark1_means_in_box() {
        let m = GaussianMixtureModel::remark1(10, 10, RandomSeed(0)).unwrap();
        assert_eq!((m.classes(), m.dim()), (10, 10));
        assert!(m.means().iter().all(|&v| (0.0..=4.0).contains(&v)));
        assert!(GaussianMixtureModel::remark1(1, 3, RandomSeed(0)).is_err());
    }

    #[test]
    fn max_set_examples() {
        assert_eq!(max_set(&[0.6, 0.3, 0.1], 2).unwrap().labels(), &[1, 2]);
        assert_eq!(max_set(&[0.4, 0.4, 0.2], 1).unwrap().labels(), &[1]);
        assert_eq!(max_set(&[0.1, 0.2, 0.7], 1).unwrap().labels(), &[3]);
        assert!(max_set(&[0.5, 0.5], 0).is_err());
        assert!(max_set(&[0.5, 0.5], 3).is_err());
    }

    #[test]
    fn oracle_sets_nested_and_full_near_k() {
        let m = GaussianMixtureModel::remark1(5, 3, RandomSeed(8)).unwrap();
        let g = true_g(&m, 50_000, RandomSeed(9)).unwrap();
        let test = sample_mixture(&m, 500, RandomSeed(10)).unwrap();
        for x in test.features().rows() {
            let p = m.posterior(x).unwrap();
            let s1 = oracle_beta_set(&g, 1.0, p.probs()).unwrap();
            let s2 = oracle_beta_set(&g, 2.0, p.probs()).unwrap();
            assert!(s1.is_subset(&s2));
            let lowest = g.sorted_pool().last().copied().unwrap();
            if p.probs().iter().all(|&pk| pk > lowest) {
                assert_eq!(oracle_beta_set(&g, 5.0 - 1e-9, p.probs()).unwrap().len(), 5);
            }
        }
        assert!(oracle_beta_set(&g, 5.0, &[0.2; 5]).is_err());
        assert!(oracle_beta_set(&g, 1.0, &[0.2; 4]).is_err());
    }

    #[test]
    fn risk_information_extremes() {
        let m = two_class();
        let test = sample_mixture(&m, 200, RandomSeed(0)).unwrap();
        let all = estimate_risk_and_information(|_| LabelSet::full(2), &test);
        assert_eq!((all.risk, all.information), (0.0, 2.0));
        let none = estimate_risk_and_information(|_| LabelSet::empty(), &test);
        assert_eq!((none.risk, none.information, none.empty_fraction), (1.0, 0.0, 1.0));
        let r0 = lt_risk(|_| LabelSet::from_labels([1]), &test, 0.0).unwrap();
        let ri = estimate_risk_and_information(|_| LabelSet::from_labels([1]), &test);
        assert_eq!(r0, ri.risk);
        assert_eq!(lt_risk(|_| LabelSet::full(2), &test, 1.0).unwrap(), 2.0);
        assert!(lt_risk(|_| LabelSet::full(2), &test, -1.0).is_err());
    }

    #[test]
    fn identity_is_zero_for_the_oracle_thresholds() {
        let m = GaussianMixtureModel::remark1(3, 2, RandomSeed(5)).unwrap();
        let probe = excess_risk_identity_check(&m, 1.0, &[0.5; 3], 20_000, RandomSeed(6)).unwrap();
        let g = probe.g_level;
        let check = excess_risk_identity_check(&m, 1.0, &[g; 3], 20_000, RandomSeed(6)).unwrap();
        assert_eq!(check.shift, 0.0);
        assert!(check.lhs.abs() < 1e-4 && check.rhs.abs() < 1e-4, "{check:?}");
    }
}
