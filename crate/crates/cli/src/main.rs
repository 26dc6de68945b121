use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use confset::pipeline::{Remark1Config, SweepConfig};
use confset::superlearner::grid_size;
use confset::{
    consistency_sweep, fit_aggregated_model, load_labeled_csv, load_model, load_unlabeled_csv, parse_library,
    run_remark1_benchmark, sample_mixture, save_model, split_dataset, write_labeled_csv, write_unlabeled_csv,
    ConfidenceSetPredictor, ErmConfig, Error, GaussianMixtureModel, Jitter, Loss, RandomSeed, RefitPolicy, Result,
    ScoreAlgorithm, ScoreModel, SuperLearnerConfig, WeightMode,
};

#[derive(Parser)]
#[command(name = "confset", version, about = "Confidence sets with controlled expected size")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample train/calibrate/test CSVs from a Gaussian mixture.
    Simulate(SimulateArgs),
    /// Split a labeled CSV into train, calibration (features only) and test files.
    Split(SplitArgs),
    /// Fit one score algorithm.
    Fit(FitArgs),
    /// Fit the cross-validated aggregate of several algorithms.
    Aggregate(AggregateArgs),
    /// Build a predictor from a score model and unlabeled rows.
    Calibrate(CalibrateArgs),
    /// Emit one label set per input row.
    Predict(PredictArgs),
    /// Risk and information of a predictor on labeled rows.
    Evaluate(EvaluateArgs),
    /// Oracle, max, empirical and aggregate sets on the mixture benchmark.
    #[command(name = "benchmark-remark1")]
    BenchmarkRemark1(BenchmarkArgs),
    /// Excess risk and information error across (n, N).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct LabelArgs {
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Number of classes K (default: largest observed label).
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Args)]
struct ErmArgs {
    #[arg(long, default_value = "logistic")]
    loss: Loss,
    #[arg(long, default_value_t = 5.0)]
    clamp_bound: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1.0)]
    initial_step: f64,
}

impl ErmArgs {
    fn config(&self) -> ErmConfig {
        ErmConfig {
            max_iterations: self.max_iters,
            relative_tolerance: self.tol,
            initial_step: self.initial_step,
            loss: self.loss,
            clamp_bound: self.clamp_bound,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 2_000)]
    train: usize,
    #[arg(long, default_value_t = 1_000)]
    calibrate: usize,
    #[arg(long, default_value_t = 100_000)]
    test: usize,
    /// Directory receiving train.csv, calibrate.csv, test.csv and mixture.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    labels: LabelArgs,
    /// Train, calibration and test fractions, summing to 1.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.4, 0.2, 0.4])]
    fractions: Vec<f64>,
    /// Equal per-class counts in the train part.
    #[arg(long)]
    stratified: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    labels: LabelArgs,
    /// softmax, knn, gaussian or erm.
    #[arg(long, default_value = "erm")]
    learner: String,
    #[arg(long, default_value_t = 11)]
    neighbors: usize,
    #[command(flatten)]
    erm: ErmArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightModeArg {
    Continuous,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefitArg {
    Full,
    FoldAverage,
}

#[derive(Args)]
struct AggregateOptions {
    #[arg(long, default_value = "softmax,knn,gaussian")]
    learners: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Surrogate loss of the cross-validated risk.
    #[arg(long = "sl-loss", default_value = "boosting")]
    sl_loss: Loss,
    #[arg(long, value_enum, default_value = "continuous")]
    weight_mode: WeightModeArg,
    #[arg(long, default_value_t = 100)]
    grid_resolution: usize,
    #[arg(long, value_enum, default_value = "full")]
    refit: RefitArg,
    #[arg(long, default_value_t = 11)]
    neighbors: usize,
}

impl AggregateOptions {
    fn library(&self, erm: &ErmArgs) -> Result<Vec<ScoreAlgorithm>> {
        Ok(parse_library(&self.learners)?
            .into_iter()
            .map(|a| match a {
                ScoreAlgorithm::Knn { .. } => ScoreAlgorithm::Knn { neighbors: self.neighbors },
                ScoreAlgorithm::ErmAffine(_) => ScoreAlgorithm::ErmAffine(erm.config()),
                other => other,
            })
            .collect())
    }

    fn config(&self, algorithms: usize) -> Result<SuperLearnerConfig> {
        let mode = match self.weight_mode {
            WeightModeArg::Continuous => WeightMode::Continuous,
            WeightModeArg::Grid => {
                if grid_size(algorithms, self.grid_resolution) > 10_000_000 {
                    return Err(Error::InvalidArgument(format!(
                        "grid of resolution {} over {algorithms} learners is too large",
                        self.grid_resolution
                    )));
                }
                WeightMode::Grid { resolution: self.grid_resolution }
            }
        };
        let refit = match self.refit {
            RefitArg::Full => RefitPolicy::FullData,
            RefitArg::FoldAverage => RefitPolicy::FoldAverage,
        };
        Ok(SuperLearnerConfig { folds: self.folds, loss: self.sl_loss, mode, refit })
    }
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    labels: LabelArgs,
    #[command(flatten)]
    options: AggregateOptions,
    #[command(flatten)]
    erm: ErmArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    unlabeled: PathBuf,
    /// Column to ignore in the unlabeled file (e.g. a label column).
    #[arg(long)]
    drop_column: Option<String>,
    #[arg(long)]
    beta: f64,
    /// Enables seeded tie-breaking noise on pooled and query scores.
    #[arg(long)]
    jitter_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    predictor: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    drop_column: Option<String>,
    /// Overrides the stored β.
    #[arg(long)]
    beta: Option<f64>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictor: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Extra levels to report, comma separated.
    #[arg(long, value_delimiter = ',')]
    beta_sweep: Vec<f64>,
    #[arg(long, default_value = "predictor")]
    method: String,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pool_size: usize,
    #[arg(long, default_value_t = 100_000)]
    test_size: usize,
    #[arg(long, default_value_t = 2_000)]
    train_size: usize,
    #[arg(long, default_value_t = 1_000)]
    calibration_size: usize,
    /// Only the oracle and max rules.
    #[arg(long)]
    oracle_only: bool,
    #[command(flatten)]
    options: AggregateOptions,
    #[command(flatten)]
    erm: ErmArgs,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 1_000, 10_000])]
    n_list: Vec<usize>,
    #[arg(long = "big-n-list", value_delimiter = ',', default_values_t = [1_000])]
    big_n_list: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pool_size: usize,
    #[arg(long, default_value_t = 100_000)]
    test_size: usize,
    #[command(flatten)]
    erm: ErmArgs,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Split(a) => split(a),
        Command::Fit(a) => fit(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::BenchmarkRemark1(a) => benchmark(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let seed = RandomSeed(a.seed);
    let mixture = GaussianMixtureModel::remark1(a.classes, a.dim, seed.derive(0))?;
    create_dir(&a.out_dir)?;
    write_labeled_csv(&sample_mixture(&mixture, a.train, seed.derive(1))?, &a.out_dir.join("train.csv"))?;
    write_unlabeled_csv(&sample_mixture(&mixture, a.calibrate, seed.derive(2))?.unlabeled(), &a.out_dir.join("calibrate.csv"))?;
    write_labeled_csv(&sample_mixture(&mixture, a.test, seed.derive(3))?, &a.out_dir.join("test.csv"))?;
    let json = serde_json::to_string_pretty(&mixture).map_err(|e| Error::Corrupted(e.to_string()))?;
    write_text(&a.out_dir.join("mixture.json"), &json)?;
    println!("wrote {} / {} / {} rows to {}", a.train, a.calibrate, a.test, a.out_dir.display());
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let data = load_labeled_csv(&a.input, &a.labels.label_column, a.labels.classes)?;
    let f = (a.fractions[0], a.fractions[1], a.fractions[2]);
    let parts = split_dataset(&data, f, RandomSeed(a.seed), a.stratified)?;
    create_dir(&a.out_dir)?;
    write_labeled_csv(&parts.train, &a.out_dir.join("train.csv"))?;
    write_unlabeled_csv(&parts.calibrate, &a.out_dir.join("calibrate.csv"))?;
    write_labeled_csv(&parts.test, &a.out_dir.join("test.csv"))?;
    println!("train {} / calibrate {} / test {}", parts.train.len(), parts.calibrate.len(), parts.test.len());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let data = load_labeled_csv(&a.train, &a.labels.label_column, a.labels.classes)?;
    let algorithm = match a.learner.parse::<ScoreAlgorithm>()? {
        ScoreAlgorithm::Knn { .. } => ScoreAlgorithm::Knn { neighbors: a.neighbors },
        ScoreAlgorithm::ErmAffine(_) => ScoreAlgorithm::ErmAffine(a.erm.config()),
        other => other,
    };
    let model = algorithm.fit(&data)?;
    save_model(&model, &a.out)?;
    println!("fitted {algorithm} on {} rows, K = {}", data.len(), data.classes());
    Ok(())
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let data = load_labeled_csv(&a.train, &a.labels.label_column, a.labels.classes)?;
    let library = a.options.library(&a.erm)?;
    let config = a.options.config(library.len())?;
    let fit = fit_aggregated_model(&data, &library, &config, RandomSeed(a.seed))?;
    println!("{:<12} {:>10} {:>12}", "learner", "weight", "cv risk");
    for ((alg, w), r) in library.iter().zip(fit.weights.as_slice()).zip(&fit.vertex_cv_risks) {
        println!("{:<12} {:>10.6} {:>12.6}", alg.to_string(), w, r);
    }
    println!("{:<12} {:>10} {:>12.6}", "aggregate", "", fit.cv_risk);
    save_model(&ScoreModel::Aggregated(fit.model), &a.out)?;
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let model: ScoreModel = load_model(&a.model)?;
    let pool = load_unlabeled_csv(&a.unlabeled, a.drop_column.as_deref())?;
    let predictor = ConfidenceSetPredictor::calibrate(model, &pool, a.beta, a.jitter_seed.map(Jitter::new))?;
    let info = predictor.calibrator.pool_information(a.beta)?;
    save_model(&predictor, &a.out)?;
    println!("calibrated on N = {} rows; pool information at beta = {}: {:.4}", pool.len(), a.beta, info);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let mut predictor: ConfidenceSetPredictor = load_model(&a.predictor)?;
    if let Some(beta) = a.beta {
        predictor = predictor.with_beta(beta)?;
    }
    let data = load_unlabeled_csv(&a.input, a.drop_column.as_deref())?;
    let sets = predictor.predict_sets(data.features().view())?;
    let mut out = String::from("row,set\n");
    for (i, s) in sets.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, s));
    }
    match a.out {
        Some(path) => write_text(&path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let predictor: ConfidenceSetPredictor = load_model(&a.predictor)?;
    let test = load_labeled_csv(&a.test, &a.label_column, Some(predictor.classes()))?;
    let report = predictor.evaluate(&test, &a.beta_sweep)?;
    let table = report.table(&a.method);
    print!("{}", table.to_text());
    if let Some(path) = a.csv {
        write_text(&path, &table.to_csv())?;
    }
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let library = a.options.library(&a.erm)?;
    let config = Remark1Config {
        classes: a.classes,
        dim: a.dim,
        beta: a.beta,
        pool_size: a.pool_size,
        test_size: a.test_size,
        train_size: a.train_size,
        calibration_size: a.calibration_size,
        include_learned: !a.oracle_only,
        erm: a.erm.config(),
        superlearner: a.options.config(library.len())?,
        library,
    };
    let report = run_remark1_benchmark(&config, RandomSeed(a.seed))?;
    print!("{}", report.to_text());
    if let Some(path) = a.csv {
        write_text(&path, &report.to_csv())?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let config = SweepConfig {
        classes: a.classes,
        dim: a.dim,
        beta: a.beta,
        replicates: a.replicates,
        pool_size: a.pool_size,
        test_size: a.test_size,
        algorithm: ScoreAlgorithm::ErmAffine(a.erm.config()),
    };
    let report = consistency_sweep(&a.n_list, &a.big_n_list, &config, RandomSeed(a.seed))?;
    print!("{}", report.to_text());
    if let Some(path) = a.csv {
        write_text(&path, &report.to_csv())?;
    }
    Ok(())
}
