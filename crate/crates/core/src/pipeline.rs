//! End-to-end assembly: calibrated predictors, evaluation reports, the
//! Gaussian-mixture benchmark and the consistency sweep.

use std::fmt::Write as _;

use ndarray::{ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{EmpiricalG, Jitter};
use crate::data::{LabeledDataset, UnlabeledDataset};
use crate::erm::ErmConfig;
use crate::error::{Error, Result};
use crate::labelset::LabelSet;
use crate::learners::ScoreAlgorithm;
use crate::rng::RandomSeed;
use crate::score::{ScoreModel, Scorer};
use crate::superlearner::{fit_aggregated_model, SuperLearnerConfig};
use crate::synthetic::{
    max_set, mean_and_std_error, oracle_beta_set, sample_mixture, true_g, GaussianMixtureModel,
    RiskInformation,
};

/// A score model, the Ĝ calibrated from its scores on unlabeled rows, and
/// the target information β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSetPredictor {
    pub score_model: ScoreModel,
    pub calibrator: EmpiricalG,
    pub beta: f64,
    #[serde(default)]
    pub jitter: Option<Jitter>,
}

impl ConfidenceSetPredictor {
    /// Scores every unlabeled row and builds Ĝ from the pooled scores.
    pub fn calibrate(score_model: ScoreModel, unlabeled: &UnlabeledDataset, beta: f64, jitter: Option<Jitter>) -> Result<Self> {
        let classes = score_model.classes();
        if !(beta > 0.0 && beta < classes as f64) {
            return Err(Error::BetaOutOfRange { beta, classes });
        }
        let scores = scores_with_jitter(&score_model, unlabeled.features().view(), jitter)?;
        let (flat, _) = scores.into_raw_vec_and_offset();
        let calibrator = EmpiricalG::from_flat(flat, unlabeled.len(), classes)?;
        Ok(Self { score_model, calibrator, beta, jitter })
    }

    pub fn classes(&self) -> usize {
        self.score_model.classes()
    }

    /// Same model and calibrator at another level.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        self.calibrator.check_beta(beta)?;
        Ok(Self { beta, ..self.clone() })
    }

    pub fn set_from_scores(&self, scores: &[f64], beta: f64) -> LabelSet {
        LabelSet::from_sorted_indices((0..scores.len()).filter(|&k| self.calibrator.includes(scores[k], beta)))
    }

    /// `{k : Ĝ(f_k(x)) ≤ β}`.
    pub fn predict_set(&self, x: ArrayView1<'_, f64>) -> Result<LabelSet> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("query has non-finite features".into()));
        }
        let mut scores = self.score_model.score(x)?;
        if let Some(j) = self.jitter {
            j.apply(x, &mut scores);
        }
        Ok(self.set_from_scores(&scores, self.beta))
    }

    /// Sets for every row, at each level in `betas`.
    pub fn predict_sets_at(&self, features: ArrayView2<'_, f64>, betas: &[f64]) -> Result<Vec<Vec<LabelSet>>> {
        for &b in betas {
            self.calibrator.check_beta(b)?;
        }
        let scores = scores_with_jitter(&self.score_model, features, self.jitter)?;
        Ok(betas
            .iter()
            .map(|&b| {
                scores
                    .axis_iter(Axis(0))
                    .into_par_iter()
                    .map(|row| self.set_from_scores(row.as_slice().expect("standard layout"), b))
                    .collect()
            })
            .collect())
    }

    pub fn predict_sets(&self, features: ArrayView2<'_, f64>) -> Result<Vec<LabelSet>> {
        Ok(self.predict_sets_at(features, &[self.beta])?.pop().expect("one level"))
    }

    /// Risk and information on `test` at the stored β, plus one row per
    /// extra level in `sweep`.
    pub fn evaluate(&self, test: &LabeledDataset, sweep: &[f64]) -> Result<EvaluationReport> {
        if test.is_empty() {
            return Err(Error::InvalidDataset("empty test set".into()));
        }
        let mut betas = vec![self.beta];
        betas.extend_from_slice(sweep);
        let sets = self.predict_sets_at(test.features().view(), &betas)?;
        let mut rows: Vec<BetaRow> =
            betas.iter().zip(&sets).map(|(&beta, s)| BetaRow::new(beta, RiskInformation::from_sets(s, test.labels()))).collect();
        let main = rows.remove(0);
        Ok(EvaluationReport {
            beta_target: self.beta,
            risk: main.risk,
            information: main.information,
            risk_std_error: main.risk_std_error,
            information_std_error: main.information_std_error,
            empty_fraction: main.empty_fraction,
            n_test: test.len(),
            per_beta_rows: rows,
        })
    }
}

fn scores_with_jitter(model: &ScoreModel, features: ArrayView2<'_, f64>, jitter: Option<Jitter>) -> Result<ndarray::Array2<f64>> {
    let mut scores = model.score_matrix(features)?;
    if let Some(j) = jitter {
        scores.axis_iter_mut(Axis(0)).into_par_iter().zip(features.axis_iter(Axis(0))).for_each(|(mut s, x)| {
            j.apply(x, s.as_slice_mut().expect("standard layout"));
        });
    }
    Ok(scores)
}

/// Free-function form of [`ConfidenceSetPredictor::calibrate`].
pub fn calibrate(score_model: ScoreModel, unlabeled: &UnlabeledDataset, beta: f64) -> Result<ConfidenceSetPredictor> {
    ConfidenceSetPredictor::calibrate(score_model, unlabeled, beta, None)
}

pub fn predict_set(predictor: &ConfidenceSetPredictor, x: ArrayView1<'_, f64>) -> Result<LabelSet> {
    predictor.predict_set(x)
}

pub fn evaluate(predictor: &ConfidenceSetPredictor, test: &LabeledDataset) -> Result<EvaluationReport> {
    predictor.evaluate(test, &[])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub beta: f64,
    pub risk: f64,
    pub information: f64,
    pub risk_std_error: f64,
    pub information_std_error: f64,
    pub empty_fraction: f64,
}

impl BetaRow {
    pub fn new(beta: f64, ri: RiskInformation) -> Self {
        Self {
            beta,
            risk: ri.risk,
            information: ri.information,
            risk_std_error: ri.risk_std_error,
            information_std_error: ri.information_std_error,
            empty_fraction: ri.empty_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub risk: f64,
    pub information: f64,
    pub risk_std_error: f64,
    pub information_std_error: f64,
    pub empty_fraction: f64,
    pub beta_target: f64,
    pub n_test: usize,
    pub per_beta_rows: Vec<BetaRow>,
}

impl EvaluationReport {
    pub fn main_row(&self) -> BetaRow {
        BetaRow {
            beta: self.beta_target,
            risk: self.risk,
            information: self.information,
            risk_std_error: self.risk_std_error,
            information_std_error: self.information_std_error,
            empty_fraction: self.empty_fraction,
        }
    }

    pub fn table(&self, method: &str) -> ReportTable {
        let mut table = ReportTable::default();
        table.push(method, self.main_row());
        for row in &self.per_beta_rows {
            table.push(method, *row);
        }
        table
    }
}

/// Method × β rows of risk and information.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<(String, BetaRow)>,
}

impl ReportTable {
    pub fn push(&mut self, method: &str, row: BetaRow) {
        self.rows.push((method.to_string(), row));
    }

    pub fn get(&self, method: &str) -> Option<&BetaRow> {
        self.rows.iter().find(|(m, _)| m == method).map(|(_, r)| r)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,beta,risk,risk_se,information,information_se,empty_fraction\n");
        for (m, r) in &self.rows {
            let _ = writeln!(
                out,
                "{m},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.beta, r.risk, r.risk_std_error, r.information, r.information_std_error, r.empty_fraction
            );
        }
        out
    }

    /// Aligned text: `risk (se)` and `information (se)` per method and β.
    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|(m, r)| {
                [
                    m.clone(),
                    format!("{}", r.beta),
                    format!("{:.3} ({:.3})", r.risk, r.risk_std_error),
                    format!("{:.2} ({:.2})", r.information, r.information_std_error),
                    format!("{:.3}", r.empty_fraction),
                ]
            })
            .collect();
        let header = ["method", "beta", "risk", "information", "empty"].map(String::from);
        let mut widths = header.clone().map(|h| h.len());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&cells) {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

/// Settings of the Gaussian-mixture benchmark; defaults are the
/// ten-class, ten-dimensional design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Remark1Config {
    pub classes: usize,
    pub dim: usize,
    pub beta: f64,
    /// Rows used to estimate the true G.
    pub pool_size: usize,
    pub test_size: usize,
    pub train_size: usize,
    pub calibration_size: usize,
    /// Evaluates the learned rules, not only oracle and `max`.
    pub include_learned: bool,
    pub erm: ErmConfig,
    pub library: Vec<ScoreAlgorithm>,
    pub superlearner: SuperLearnerConfig,
}

impl Default for Remark1Config {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 10,
            beta: 2.0,
            pool_size: 1_000_000,
            test_size: 100_000,
            train_size: 2_000,
            calibration_size: 1_000,
            include_learned: true,
            erm: ErmConfig::default(),
            library: vec![ScoreAlgorithm::Softmax, ScoreAlgorithm::knn(), ScoreAlgorithm::GaussianGenerative],
            superlearner: SuperLearnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Remark1Report {
    pub table: ReportTable,
    pub g_level: f64,
    /// `(ℛ(max) − ℛ(oracle)) / se` on the shared test rows.
    pub max_minus_oracle_z: f64,
}

impl Remark1Report {
    pub fn to_csv(&self) -> String {
        self.table.to_csv()
    }

    pub fn to_text(&self) -> String {
        let mut out = self.table.to_text();
        let _ = writeln!(out, "G^-1(beta) = {:.6}", self.g_level);
        let _ = writeln!(out, "max - oracle risk: {:.1} standard errors", self.max_minus_oracle_z);
        out
    }
}

/// Draws the mixture, estimates the true G and compares the oracle set,
/// the `max` set, the ERM-calibrated set and the superlearner set at β on
/// one fresh test sample.
pub fn run_remark1_benchmark(config: &Remark1Config, seed: RandomSeed) -> Result<Remark1Report> {
    let size = config.beta.round();
    if (config.beta - size).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("max baseline needs an integer beta, got {}", config.beta)));
    }
    let mixture = GaussianMixtureModel::remark1(config.classes, config.dim, seed.derive(0))?;
    let g_true = true_g(&mixture, config.pool_size, seed.derive(1))?;
    let g_level = g_true.inverse(config.beta)?;
    let test = sample_mixture(&mixture, config.test_size, seed.derive(2))?;
    let post = mixture.posterior_matrix(test.features().view());

    let oracle: Vec<LabelSet> = post
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|p| oracle_beta_set(&g_true, config.beta, p.as_slice().expect("standard layout")))
        .collect::<Result<_>>()?;
    let max: Vec<LabelSet> = post
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|p| max_set(p.as_slice().expect("standard layout"), size as usize))
        .collect::<Result<_>>()?;
    let mut table = ReportTable::default();
    table.push("oracle", BetaRow::new(config.beta, RiskInformation::from_sets(&oracle, test.labels())));
    table.push("max", BetaRow::new(config.beta, RiskInformation::from_sets(&max, test.labels())));
    let diffs: Vec<f64> = oracle
        .iter()
        .zip(&max)
        .zip(test.labels())
        .map(|((o, m), &y)| f64::from(!m.contains(y)) - f64::from(!o.contains(y)))
        .collect();
    let (mean_diff, se_diff) = mean_and_std_error(&diffs);
    let max_minus_oracle_z = if se_diff > 0.0 { mean_diff / se_diff } else { f64::INFINITY * mean_diff.signum() };

    if config.include_learned {
        let train = sample_mixture(&mixture, config.train_size, seed.derive(3))?;
        let calib = sample_mixture(&mixture, config.calibration_size, seed.derive(4))?.unlabeled();
        let erm = ScoreAlgorithm::ErmAffine(config.erm.clone()).fit(&train)?;
        let empirical = ConfidenceSetPredictor::calibrate(erm, &calib, config.beta, None)?;
        table.push("empirical", empirical.evaluate(&test, &[])?.main_row());
        let fit = fit_aggregated_model(&train, &config.library, &config.superlearner, seed.derive(5))?;
        let sl = ConfidenceSetPredictor::calibrate(ScoreModel::Aggregated(fit.model), &calib, config.beta, None)?;
        table.push("superlearner", sl.evaluate(&test, &[])?.main_row());
    }
    Ok(Remark1Report { table, g_level, max_minus_oracle_z })
}

/// Settings of [`consistency_sweep`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub classes: usize,
    pub dim: usize,
    pub beta: f64,
    pub replicates: usize,
    pub pool_size: usize,
    pub test_size: usize,
    pub algorithm: ScoreAlgorithm,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 10,
            beta: 2.0,
            replicates: 10,
            pool_size: 1_000_000,
            test_size: 100_000,
            algorithm: ScoreAlgorithm::ErmAffine(ErmConfig::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Training rows n.
    pub train_size: usize,
    /// Unlabeled calibration rows N.
    pub calibration_size: usize,
    /// Mean over replicates of `ℛ(Γ̂) − ℛ(Γ*)`.
    pub excess_risk: f64,
    /// Standard error of that mean across replicates.
    pub excess_risk_std_error: f64,
    /// Largest per-replicate Monte Carlo standard error of the excess risk.
    pub max_mc_std_error: f64,
    pub min_excess_risk: f64,
    pub information: f64,
    /// Mean over replicates of `|Î − β|`.
    pub information_gap: f64,
    pub information_mc_std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub beta: f64,
    pub oracle_risk: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, n: usize, big_n: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.train_size == n && r.calibration_size == big_n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,N,excess_risk,excess_risk_se,max_mc_se,min_excess_risk,information,information_gap,information_mc_se\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.train_size,
                r.calibration_size,
                r.excess_risk,
                r.excess_risk_std_error,
                r.max_mc_std_error,
                r.min_excess_risk,
                r.information,
                r.information_gap,
                r.information_mc_std_error
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("beta = {}, oracle risk = {:.4}\n", self.beta, self.oracle_risk);
        let _ = writeln!(out, "{:>7} {:>7}  {:>18}  {:>10}  {:>9}", "n", "N", "excess risk (se)", "info", "|info-b|");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>7} {:>7}  {:>18}  {:>10.4}  {:>9.4}",
                r.train_size,
                r.calibration_size,
                format!("{:.4} ({:.4})", r.excess_risk, r.excess_risk_std_error),
                r.information,
                r.information_gap
            );
        }
        out
    }
}

/// Excess risk and information error of the calibrated rule for every
/// `(n, N)` pair, averaged over replicates. The mixture, the true G and the
/// test rows are fixed; each replicate draws fresh training and unlabeled
/// rows from derived seeds. Risks use the posterior form, so the excess is
/// a paired difference on the shared test rows.
pub fn consistency_sweep(n_list: &[usize], big_n_list: &[usize], config: &SweepConfig, seed: RandomSeed) -> Result<SweepReport> {
    if n_list.is_empty() || big_n_list.is_empty() || config.replicates == 0 {
        return Err(Error::InvalidArgument("sweep needs non-empty n and N lists and >= 1 replicate".into()));
    }
    for list in [n_list, big_n_list] {
        if list.windows(2).any(|w| w[0] >= w[1]) || list[0] == 0 {
            return Err(Error::InvalidArgument(format!("sweep sizes {list:?} must be positive and increasing")));
        }
    }
    let mixture = GaussianMixtureModel::remark1(config.classes, config.dim, seed.derive(0))?;
    let g_true = true_g(&mixture, config.pool_size, seed.derive(1))?;
    let test = sample_mixture(&mixture, config.test_size, seed.derive(2))?;
    let post = mixture.posterior_matrix(test.features().view());
    let oracle: Vec<LabelSet> = post
        .axis_iter(Axis(0))
        .map(|p| oracle_beta_set(&g_true, config.beta, p.as_slice().expect("standard layout")))
        .collect::<Result<_>>()?;
    let oracle_loss = per_row_conditional_loss(&oracle, post.view());
    let oracle_risk = oracle_loss.iter().sum::<f64>() / oracle_loss.len() as f64;

    let mut rows = Vec::new();
    for (ni, &n) in n_list.iter().enumerate() {
        for (bi, &big_n) in big_n_list.iter().enumerate() {
            let cell = seed.derive(1000 + (ni * big_n_list.len() + bi) as u64);
            let per_rep: Vec<(f64, f64, f64, f64)> = (0..config.replicates)
                .into_par_iter()
                .map(|r| {
                    let rep = cell.derive(r as u64);
                    let train = sample_mixture(&mixture, n, rep.derive(0))?;
                    let calib = sample_mixture(&mixture, big_n, rep.derive(1))?.unlabeled();
                    let model = config.algorithm.fit(&train)?;
                    let predictor = ConfidenceSetPredictor::calibrate(model, &calib, config.beta, None)?;
                    let sets = predictor.predict_sets(test.features().view())?;
                    let loss = per_row_conditional_loss(&sets, post.view());
                    let diffs: Vec<f64> = loss.iter().zip(&oracle_loss).map(|(a, b)| a - b).collect();
                    let (excess, excess_se) = mean_and_std_error(&diffs);
                    let sizes: Vec<f64> = sets.iter().map(|s| s.len() as f64).collect();
                    let (info, info_se) = mean_and_std_error(&sizes);
                    Ok((excess, excess_se, info, info_se))
                })
                .collect::<Result<_>>()?;
            let excesses: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
            let (excess_risk, excess_risk_std_error) = mean_and_std_error(&excesses);
            let infos: Vec<f64> = per_rep.iter().map(|r| r.2).collect();
            let gaps: Vec<f64> = infos.iter().map(|i| (i - config.beta).abs()).collect();
            rows.push(SweepRow {
                train_size: n,
                calibration_size: big_n,
                excess_risk,
                excess_risk_std_error,
                max_mc_std_error: per_rep.iter().map(|r| r.1).fold(0.0, f64::max),
                min_excess_risk: excesses.iter().copied().fold(f64::INFINITY, f64::min),
                information: infos.iter().sum::<f64>() / infos.len() as f64,
                information_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
                information_mc_std_error: per_rep.iter().map(|r| r.3).fold(0.0, f64::max),
            });
        }
    }
    Ok(SweepReport { beta: config.beta, oracle_risk, rows })
}

fn per_row_conditional_loss(sets: &[LabelSet], posteriors: ArrayView2<'_, f64>) -> Vec<f64> {
    sets.iter()
        .zip(posteriors.rows())
        .map(|(s, p)| 1.0 - s.labels().iter().map(|&l| p[l - 1]).sum::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erm::AffineScoreModel;
    use ndarray::{array, Array2};

    /// Identity scores on 2-d inputs: f(x) = x.
    fn identity_model() -> ScoreModel {
        let mut m = AffineScoreModel::zeros(2, 2, 5.0);
        m.weights = array![[1.0, 0.0], [0.0, 1.0]];
        ScoreModel::Affine(m)
    }

    fn hand_pool() -> UnlabeledDataset {
        // pooled scores {0.9, 0.3, 0.2, −0.4}
        UnlabeledDataset::new(array![[0.9, 0.3], [0.2, -0.4]]).unwrap()
    }

    #[test]
    fn hand_pool_prediction() {
        let p = ConfidenceSetPredictor::calibrate(identity_model(), &hand_pool(), 1.0, None).unwrap();
        assert_eq!(p.predict_set(array![0.3, 0.0].view()).unwrap(), LabelSet::from_labels([1]));
        assert_eq!(p.predict_set(array![4.0, 3.0].view()).unwrap(), LabelSet::full(2));
        assert_eq!(p.predict_set(array![-3.0, -4.0].view()).unwrap(), LabelSet::empty());
        assert!(p.predict_set(array![0.0].view()).is_err());
        assert!(p.predict_set(array![f64::NAN, 0.0].view()).is_err());
    }

    #[test]
    fn beta_validation_and_single_row_pool() {
        let pool = UnlabeledDataset::new(array![[0.1, 0.2]]).unwrap();
        assert!(ConfidenceSetPredictor::calibrate(identity_model(), &pool, 1.0, None).is_ok());
        for beta in [0.0, 2.0, -1.0, f64::NAN] {
            assert!(ConfidenceSetPredictor::calibrate(identity_model(), &pool, beta, None).is_err());
        }
        let wrong = UnlabeledDataset::new(Array2::zeros((3, 3))).unwrap();
        assert!(matches!(
            ConfidenceSetPredictor::calibrate(identity_model(), &wrong, 1.0, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn report_tables_are_aligned() {
        let mut t = ReportTable::default();
        let ri = RiskInformation { risk: 0.05, information: 2.0, risk_std_error: 0.001, information_std_error: 0.01, empty_fraction: 0.0 };
        t.push("oracle", BetaRow::new(2.0, ri));
        t.push("superlearner", BetaRow::new(2.0, ri));
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].find("2 "), lines[2].find("2 "));
        assert!(t.to_csv().starts_with("method,beta,risk"));
        assert!(t.to_csv().contains("oracle,2,0.050000,0.001000,2.000000"));
    }
}
