//! Set-valued multiclass classification with a controlled expected set
//! size.
//!
//! A score model `f = (f_1, …, f_K)` is fitted on labeled rows, either by
//! convex surrogate risk minimization or by a base learner, optionally
//! aggregated by V-fold cross-validation. Unlabeled rows then calibrate the
//! pooled tail function Ĝ, and a query `x` receives the labels
//! `{k : Ĝ(f_k(x)) ≤ β}`, whose expected size is close to β.
//!
//! ```
//! use confset::{ConfidenceSetPredictor, GaussianMixtureModel, RandomSeed, ScoreAlgorithm, sample_mixture};
//!
//! let mixture = GaussianMixtureModel::remark1(4, 2, RandomSeed(7)).unwrap();
//! let train = sample_mixture(&mixture, 400, RandomSeed(8)).unwrap();
//! let pool = sample_mixture(&mixture, 200, RandomSeed(9)).unwrap().unlabeled();
//! let model = ScoreAlgorithm::Softmax.fit(&train).unwrap();
//! let predictor = ConfidenceSetPredictor::calibrate(model, &pool, 1.5, None).unwrap();
//! let set = predictor.predict_set(train.row(0)).unwrap();
//! assert!(set.len() <= 4);
//! ```

pub mod calibration;
pub mod data;
pub mod erm;
pub mod error;
pub mod labelset;
pub mod learners;
pub mod losses;
pub mod persist;
pub mod pipeline;
pub mod rng;
pub mod score;
pub mod superlearner;
pub mod synthetic;

pub use calibration::{build_empirical_g, EmpiricalG, Jitter, ScorePool};
pub use data::{
    load_labeled_csv, load_unlabeled_csv, split_dataset, split_dataset_counts, vfold_partition, write_labeled_csv,
    write_unlabeled_csv,
    FoldPartition, LabeledDataset, Split, UnlabeledDataset,
};
pub use erm::{fit_erm, AffineScoreModel, ErmConfig};
pub use error::{Error, Result};
pub use labelset::LabelSet;
pub use learners::{parse_library, ScoreAlgorithm};
pub use losses::{calibrated_threshold, Loss};
pub use persist::{load_model, save_model};
pub use pipeline::{
    consistency_sweep, run_remark1_benchmark, ConfidenceSetPredictor, EvaluationReport, Remark1Config, ReportTable,
    SweepConfig,
};
pub use rng::RandomSeed;
pub use score::{ScoreModel, Scorer};
pub use superlearner::{fit_aggregated_model, AggregatedScoreModel, RefitPolicy, SimplexWeights, SuperLearnerConfig, WeightMode};
pub use synthetic::{sample_mixture, GaussianMixtureModel};
