//! Datasets, CSV ingestion, deterministic splits and V-fold partitions.
//!
//! Labels are 1-based (`1..=K`) everywhere in the public API, matching the
//! CSV files; score vectors are indexed `0..K` so label `k` lives at
//! position `k - 1`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSeed;

/// Features with labels in `1..=classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidDataset(format!("class count {classes} < 2")));
        }
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidDataset("dataset needs at least one row and one column".into()));
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), got: labels.len() });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l == 0 || l > classes) {
            return Err(Error::LabelOutOfRange { row: row + 1, label: label as i64 });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self { features, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Number of rows per label, indexed by `label - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l - 1] += 1;
        }
        counts
    }

    /// Rows at `indices`, in the given order. Panics on out-of-range indices.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Drops the labels.
    pub fn unlabeled(&self) -> UnlabeledDataset {
        UnlabeledDataset { features: self.features.clone() }
    }
}

/// Features only; used to calibrate set sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledDataset {
    features: Array2<f64>,
}

impl UnlabeledDataset {
    pub fn new(features: Array2<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidDataset("unlabeled dataset needs at least one row and one column".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }
}

/// Regular partition of `0..n` into `folds` blocks whose sizes differ by at
/// most one. Fold ids are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    assignment: Vec<usize>,
    folds: usize,
}

impl FoldPartition {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Fold id of each row.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Rows in fold `v`, ascending.
    pub fn fold(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] == v).collect()
    }

    /// Rows outside fold `v`, ascending.
    pub fn complement(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] != v).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &v in &self.assignment {
            sizes[v] += 1;
        }
        sizes
    }
}

/// Seeded uniform V-fold partition of `n` rows.
pub fn vfold_partition(n: usize, folds: usize, seed: RandomSeed) -> Result<FoldPartition> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("fold count {folds} < 2")));
    }
    if folds > n {
        return Err(Error::InvalidArgument(format!("fold count {folds} exceeds row count {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    let mut assignment = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % folds;
    }
    Ok(FoldPartition { assignment, folds })
}

/// Three-way split into score-fitting, calibration and evaluation parts.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledDataset,
    pub calibrate: UnlabeledDataset,
    pub test: LabeledDataset,
}

/// Splits by fractions `(train, calibrate, test)`, which must sum to one.
/// Part sizes are `round(f * n)` for the first two; the test part takes the rest.
pub fn split_dataset(
    data: &LabeledDataset,
    fractions: (f64, f64, f64),
    seed: RandomSeed,
    stratified: bool,
) -> Result<Split> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::InvalidArgument(format!("split fractions must be positive, got {fractions:?}")));
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split fractions sum to {}, not 1", a + b + c)));
    }
    let n = data.len();
    let n_train = (a * n as f64).round() as usize;
    let n_cal = (b * n as f64).round() as usize;
    if n_train + n_cal >= n {
        return Err(Error::InvalidArgument("fractions leave the test part empty".into()));
    }
    split_dataset_counts(data, (n_train, n_cal, n - n_train - n_cal), seed, stratified)
}

/// Splits into parts of exactly the given sizes, which must sum to the row
/// count. In stratified mode the train part holds `train / K` rows of every
/// class.
pub fn split_dataset_counts(
    data: &LabeledDataset,
    sizes: (usize, usize, usize),
    seed: RandomSeed,
    stratified: bool,
) -> Result<Split> {
    let (n_train, n_cal, n_test) = sizes;
    if n_train == 0 || n_cal == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(format!("split sizes {sizes:?} contain an empty part")));
    }
    if n_train + n_cal + n_test != data.len() {
        return Err(Error::InvalidArgument(format!(
            "split sizes {sizes:?} do not sum to row count {}",
            data.len()
        )));
    }
    let mut rng = seed.rng();
    let (mut train_idx, mut rest) = if stratified {
        let k = data.classes();
        if n_train % k != 0 {
            return Err(Error::InvalidArgument(format!(
                "stratified train size {n_train} is not a multiple of the class count {k}"
            )));
        }
        let per_class = n_train / k;
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in data.labels().iter().enumerate() {
            by_class[l - 1].push(i);
        }
        let mut train = Vec::with_capacity(n_train);
        let mut rest = Vec::with_capacity(data.len() - n_train);
        for (class, mut rows) in by_class.into_iter().enumerate() {
            if rows.len() < per_class {
                return Err(Error::InvalidArgument(format!(
                    "stratified split needs {per_class} rows of label {}, found {}",
                    class + 1,
                    rows.len()
                )));
            }
            rows.shuffle(&mut rng);
            rest.extend_from_slice(&rows[per_class..]);
            rows.truncate(per_class);
            train.extend(rows);
        }
        rest.sort_unstable();
        rest.shuffle(&mut rng);
        (train, rest)
    } else {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let rest = order.split_off(n_train);
        (order, rest)
    };
    let mut test_idx = rest.split_off(n_cal);
    let mut cal_idx = rest;
    train_idx.sort_unstable();
    cal_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train: data.subset(&train_idx),
        calibrate: data.subset(&cal_idx).unlabeled(),
        test: data.subset(&test_idx),
    })
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::BadCell { row, column: column.to_string(), value: cell.to_string() }),
    }
}

/// Reads a labeled CSV. `classes` overrides the default K = max observed label.
/// Rows are numbered from 1 (the first line after the header) in errors.
pub fn load_labeled_csv(path: &Path, label_column: &str, classes: Option<usize>) -> Result<LabeledDataset> {
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let label_pos = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let d = headers.len() - 1;
    if d == 0 {
        return Err(Error::InvalidDataset("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record?;
        for (c, cell) in record.iter().enumerate() {
            if c == label_pos {
                let label: i64 = cell.parse().map_err(|_| Error::BadCell {
                    row,
                    column: label_column.to_string(),
                    value: cell.to_string(),
                })?;
                if label < 1 || classes.is_some_and(|k| label as usize > k) {
                    return Err(Error::LabelOutOfRange { row, label });
                }
                labels.push(label as usize);
            } else {
                values.push(parse_real(cell, row, &headers[c])?);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let observed = labels.iter().copied().max().unwrap_or(0);
    let k = classes.unwrap_or(observed);
    let features = Array2::from_shape_vec((labels.len(), d), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    LabeledDataset::new(features, labels, k)
}

/// Reads an unlabeled CSV, ignoring `drop_column` when present.
pub fn load_unlabeled_csv(path: &Path, drop_column: Option<&str>) -> Result<UnlabeledDataset> {
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let skip = drop_column.and_then(|name| headers.iter().position(|h| h == name));
    let d = headers.len() - usize::from(skip.is_some());
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        for (c, cell) in record.iter().enumerate() {
            if Some(c) != skip {
                values.push(parse_real(cell, r + 1, &headers[c])?);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let features = Array2::from_shape_vec((rows, d), values).map_err(|e| Error::InvalidDataset(e.to_string()))?;
    UnlabeledDataset::new(features)
}

/// Writes features as `x1..xd` followed by a `label` column.
pub fn write_labeled_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut out = std::io::BufWriter::new(file);
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).chain(["label".to_string()]).collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (row, label) in data.features().rows().into_iter().zip(data.labels()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{},{label}", cells.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes features as `x1..xd`.
pub fn write_unlabeled_csv(data: &UnlabeledDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut out = std::io::BufWriter::new(file);
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in data.features().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", cells.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn toy(n: usize, k: usize) -> LabeledDataset {
        let features = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let labels = (0..n).map(|i| i % k + 1).collect();
        LabeledDataset::new(features, labels, k).unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let f = write("a,b,label\n1.0,2.0,1\n3.0,4.0,2\n5.5,-1,2\n");
        let data = load_labeled_csv(f.path(), "label", None).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.classes(), 2);
        assert_eq!(data.labels(), &[1, 2, 2]);
        assert_eq!(data.row(2).to_vec(), vec![5.5, -1.0]);
    }

    #[test]
    fn label_column_anywhere_and_override() {
        let f = write("label,a\n1,0.5\n2,0.25\n");
        let data = load_labeled_csv(f.path(), "label", Some(5)).unwrap();
        assert_eq!(data.classes(), 5);
        assert_eq!(data.features(), &array![[0.5], [0.25]]);
    }

    #[test]
    fn rejects_label_zero_with_row() {
        let f = write("a,label\n1.0,1\n2.0,0\n");
        let err = load_labeled_csv(f.path(), "label", None).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { row: 2, label: 0 }), "{err}");
        assert!(err.to_string().contains("label out of range at row 2"));
    }

    #[test]
    fn rejects_bad_cells_and_empty_and_missing() {
        let f = write("a,label\n1.0,1\nx,2\n");
        match load_labeled_csv(f.path(), "label", None).unwrap_err() {
            Error::BadCell { row, column, .. } => assert_eq!((row, column.as_str()), (2, "a")),
            e => panic!("{e}"),
        }
        let f = write("a,label\n-1.0,-3\n");
        assert!(matches!(load_labeled_csv(f.path(), "label", None), Err(Error::LabelOutOfRange { .. })));
        let f = write("a,label\n1.0,\n");
        assert!(matches!(load_labeled_csv(f.path(), "label", None), Err(Error::BadCell { .. })));
        let f = write("a,label\n");
        assert!(matches!(load_labeled_csv(f.path(), "label", None), Err(Error::EmptyFile(_))));
        let f = write("");
        assert!(load_labeled_csv(f.path(), "label", None).is_err());
        let f = write("a,b\n1,2\n");
        assert!(matches!(load_labeled_csv(f.path(), "label", None), Err(Error::MissingColumn(_))));
        assert!(matches!(
            load_labeled_csv(Path::new("/nonexistent/x.csv"), "label", None),
            Err(Error::Io { .. })
        ));
        let f = write("a,label\nNaN,1\n");
        assert!(matches!(load_labeled_csv(f.path(), "label", None), Err(Error::BadCell { .. })));
    }

    #[test]
    fn unlabeled_drops_label_column() {
        let f = write("a,label,b\n1,1,2\n3,2,4\n");
        let u = load_unlabeled_csv(f.path(), Some("label")).unwrap();
        assert_eq!(u.features(), &array![[1.0, 2.0], [3.0, 4.0]]);
        let u = load_unlabeled_csv(f.path(), None).unwrap();
        assert_eq!(u.dim(), 3);
    }

    #[test]
    fn csv_write_read_round_trip() {
        let data = LabeledDataset::new(array![[0.1, 1e-17], [-3.25, 7.0]], vec![2, 1], 2).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_labeled_csv(&data, f.path()).unwrap();
        assert_eq!(load_labeled_csv(f.path(), "label", None).unwrap(), data);
        write_unlabeled_csv(&data.unlabeled(), f.path()).unwrap();
        assert_eq!(load_unlabeled_csv(f.path(), None).unwrap(), data.unlabeled());
    }

    #[test]
    fn split_sizes_from_fractions() {
        let data = toy(10, 2);
        let s = split_dataset(&data, (0.5, 0.2, 0.3), RandomSeed(1), false).unwrap();
        assert_eq!((s.train.len(), s.calibrate.len(), s.test.len()), (5, 2, 3));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let data = toy(50, 3);
        let a = split_dataset_counts(&data, (20, 10, 20), RandomSeed(9), false).unwrap();
        let b = split_dataset_counts(&data, (20, 10, 20), RandomSeed(9), false).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.calibrate, b.calibrate);
        assert_eq!(a.test, b.test);
        // first feature column is 2*i, so it identifies the row
        let mut rows: Vec<f64> = a.train.features().column(0).to_vec();
        rows.extend(a.calibrate.features().column(0).iter());
        rows.extend(a.test.features().column(0).iter());
        rows.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..50).map(|i| (2 * i) as f64).collect();
        assert_eq!(rows, expected);
    }

    #[test]
    fn stratified_split_balances_train() {
        let data = toy(60, 3);
        let s = split_dataset_counts(&data, (30, 10, 20), RandomSeed(2), true).unwrap();
        assert_eq!(s.train.class_counts(), vec![10, 10, 10]);
        assert!(split_dataset_counts(&data, (31, 9, 20), RandomSeed(2), true).is_err());
        let skewed = LabeledDataset::new(Array2::zeros((10, 1)), vec![1, 1, 1, 1, 1, 1, 1, 1, 2, 2], 2).unwrap();
        assert!(split_dataset_counts(&skewed, (6, 2, 2), RandomSeed(0), true).is_err());
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let data = toy(10, 2);
        assert!(split_dataset(&data, (0.5, 0.5, 0.1), RandomSeed(0), false).is_err());
        assert!(split_dataset(&data, (0.9, 0.1, 0.0), RandomSeed(0), false).is_err());
        assert!(split_dataset(&data, (0.96, 0.02, 0.02), RandomSeed(0), false).is_err());
    }

    #[test]
    fn vfold_examples() {
        let mut sizes = vfold_partition(10, 3, RandomSeed(0)).unwrap().sizes();
        sizes.sort();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert_eq!(vfold_partition(9, 3, RandomSeed(0)).unwrap().sizes(), vec![3, 3, 3]);
        assert!(vfold_partition(5, 6, RandomSeed(0)).is_err());
        assert!(vfold_partition(5, 1, RandomSeed(0)).is_err());
    }

    proptest! {
        #[test]
        fn vfold_is_regular(n in 2usize..200, v_raw in 0usize..200, seed: u64) {
            let v = 2 + v_raw % (n - 1);
            let p = vfold_partition(n, v, RandomSeed(seed)).unwrap();
            let lo = n / v;
            for s in p.sizes() {
                prop_assert!(s == lo || s == lo + 1);
            }
            let mut all: Vec<usize> = (0..v).flat_map(|f| p.fold(f)).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(p, vfold_partition(n, v, RandomSeed(seed)).unwrap());
        }
    }
}
