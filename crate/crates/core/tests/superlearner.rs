use confset::superlearner::{build_cv_table, cv_phi_risk, fit_superlearner_weights, CvRiskTable, FoldScores};
use confset::synthetic::GaussianMixtureModel;
use confset::{
    fit_aggregated_model, sample_mixture, vfold_partition, Error, LabeledDataset, Loss, RandomSeed, RefitPolicy,
    ScoreAlgorithm, ScoreModel, Scorer, SimplexWeights, SuperLearnerConfig, WeightMode,
};
use ndarray::{array, Array2};
use rand::Rng;

#[test]
fn leave_one_out_nearest_neighbor_table() {
    // points on a line; each row's nearest other row is listed below
    let x = array![[0.0], [1.0], [3.0], [3.5], [7.0], [8.5]];
    let labels = vec![1, 2, 2, 1, 1, 2];
    let data = LabeledDataset::new(x, labels, 2).unwrap();
    let partition = vfold_partition(6, 6, RandomSeed(1)).unwrap();
    let table = build_cv_table(&data, &[ScoreAlgorithm::Knn { neighbors: 1 }], &partition).unwrap();
    // nearest other row: 0→1, 1→0, 2→3, 3→2, 4→5 (1.5 < 3.5), 5→4
    let neighbor_label = [2, 1, 1, 2, 2, 1];
    for fold in table.folds() {
        assert_eq!(fold.rows.len(), 1);
        let i = fold.rows[0];
        let s = fold.scores[0].row(0);
        let expected: Vec<f64> = (1..=2).map(|k| if k == neighbor_label[i] { 1.0 } else { -1.0 }).collect();
        assert_eq!(s.to_vec(), expected, "row {i}");
    }
}

#[test]
fn two_fold_single_algorithm_matches_plain_holdout() {
    let mixture = GaussianMixtureModel::remark1(3, 2, RandomSeed(2)).unwrap();
    let data = sample_mixture(&mixture, 120, RandomSeed(3)).unwrap();
    let partition = vfold_partition(120, 2, RandomSeed(4)).unwrap();
    let table = build_cv_table(&data, &[ScoreAlgorithm::Softmax], &partition).unwrap();
    let mut expected = 0.0;
    for v in 0..2 {
        let model = ScoreAlgorithm::Softmax.fit(&data.subset(&partition.complement(v))).unwrap();
        let held = data.subset(&partition.fold(v));
        expected += 0.5 * confset::erm::empirical_phi_risk(&model, &held, Loss::Logistic).unwrap();
        assert_eq!(table.folds()[v].scores[0], model.score_matrix(held.features().view()).unwrap());
    }
    let r = cv_phi_risk(&table, &SimplexWeights::uniform(1), Loss::Logistic).unwrap();
    assert!((r - expected).abs() < 1e-12);
    let again = build_cv_table(&data, &[ScoreAlgorithm::Softmax], &partition).unwrap();
    assert_eq!(again.folds(), table.folds());
}

#[test]
fn missing_class_in_complement_fails_fast() {
    // label 3 only at row 0: its fold complement lacks the class
    let x = Array2::from_shape_fn((9, 1), |(i, _)| i as f64);
    let data = LabeledDataset::new(x, vec![3, 1, 1, 1, 1, 2, 2, 2, 2], 3).unwrap();
    let partition = vfold_partition(9, 3, RandomSeed(5)).unwrap();
    let err = build_cv_table(&data, &[ScoreAlgorithm::GaussianGenerative], &partition).unwrap_err();
    assert!(matches!(err, Error::InvalidDataset(_)), "{err}");
}

#[test]
fn exact_posterior_column_wins() {
    let mixture = GaussianMixtureModel::remark1(10, 10, RandomSeed(6)).unwrap();
    let data = sample_mixture(&mixture, 2_000, RandomSeed(7)).unwrap();
    let truth = ScoreModel::from_probabilities(confset::score::ProbabilityEstimator::TruePosterior(mixture));
    let partition = vfold_partition(data.len(), 5, RandomSeed(8)).unwrap();
    let mut rng = RandomSeed(9).rng();
    let folds = (0..5)
        .map(|v| {
            let rows = partition.fold(v);
            let held = data.subset(&rows);
            let mut scores = vec![truth.score_matrix(held.features().view()).unwrap()];
            for _ in 0..2 {
                scores.push(Array2::from_shape_simple_fn((rows.len(), 10), || rng.random_range(-1.0..1.0)));
            }
            FoldScores { labels: held.labels().to_vec(), rows, scores }
        })
        .collect();
    let table = CvRiskTable::from_scores(10, folds).unwrap();
    for mode in [WeightMode::Continuous, WeightMode::Grid { resolution: 50 }] {
        let w = fit_superlearner_weights(&table, Loss::Boosting, mode).unwrap();
        assert!(w.as_slice()[0] > 0.9, "{mode:?}: {w:?}");
    }
}

#[test]
fn aggregate_scores_are_weighted_sums() {
    let mixture = GaussianMixtureModel::remark1(4, 2, RandomSeed(10)).unwrap();
    let data = sample_mixture(&mixture, 300, RandomSeed(11)).unwrap();
    let library = vec![ScoreAlgorithm::Softmax, ScoreAlgorithm::knn(), ScoreAlgorithm::GaussianGenerative];
    let fit = fit_aggregated_model(&data, &library, &SuperLearnerConfig::default(), RandomSeed(12)).unwrap();
    let w = fit.weights.as_slice();
    assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-10 && w.iter().all(|&v| v >= 0.0));
    let min_vertex = fit.vertex_cv_risks.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(fit.cv_risk <= min_vertex + 1e-8);
    for (m, alg) in fit.model.base_models.iter().zip(&library) {
        assert_eq!(m, &alg.fit(&data).unwrap(), "full-data refit");
    }
    let x = data.row(5);
    let mut agg = vec![0.0; 4];
    fit.model.score_into(x, &mut agg);
    let mut manual = vec![0.0; 4];
    for (m, wm) in fit.model.base_models.iter().zip(w) {
        for (o, s) in manual.iter_mut().zip(m.score(x).unwrap()) {
            *o += wm * s;
        }
    }
    for (a, b) in agg.iter().zip(&manual) {
        assert!((a - b).abs() < 1e-15);
    }

    let config = SuperLearnerConfig { refit: RefitPolicy::FoldAverage, ..SuperLearnerConfig::default() };
    let avg = fit_aggregated_model(&data, &library, &config, RandomSeed(12)).unwrap();
    assert_eq!(avg.weights, fit.weights);
    assert_eq!(avg.model.base_models.len(), 3 * 5);
}

#[test]
fn aggregate_rejects_bad_folds() {
    let mixture = GaussianMixtureModel::remark1(3, 2, RandomSeed(13)).unwrap();
    let data = sample_mixture(&mixture, 30, RandomSeed(14)).unwrap();
    for folds in [0, 1, 31] {
        let config = SuperLearnerConfig { folds, ..SuperLearnerConfig::default() };
        assert!(fit_aggregated_model(&data, &[ScoreAlgorithm::Softmax], &config, RandomSeed(1)).is_err());
    }
    assert!(fit_aggregated_model(&data, &[], &SuperLearnerConfig::default(), RandomSeed(1)).is_err());
}
