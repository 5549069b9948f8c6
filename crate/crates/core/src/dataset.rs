//! Loading, cleaning and splitting tabular datasets.
//!
//! Splitting always happens on raw, unscaled data. Scalers only ever see
//! the training half of a [`SplitPair`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::Matrix;

/// Cell tokens (besides configured sentinels) read as missing values.
/// Blank cells are an error, not a missing value.
const MISSING_TOKENS: [&str; 5] = ["NaN", "nan", "NA", "N/A", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            other => Err(Error::InvalidInput(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub x: Matrix,
    /// Class index `0..n_classes` for classification, real value for regression.
    pub y: Vec<f64>,
    pub task: Task,
    /// Original label text per class index (classification only).
    pub class_names: Vec<String>,
}

/// Borrowed feature matrix plus targets, the input every learner trains on.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [f64],
    pub task: Task,
    pub n_classes: usize,
}

impl<'a> Samples<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &'a [f64], task: Task, n_classes: usize) -> Self {
        Self {
            x,
            y,
            task,
            n_classes,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        match self.task {
            Task::Classification => self.class_names.len(),
            Task::Regression => 0,
        }
    }

    pub fn samples(&self) -> Samples<'_> {
        Samples::new(self.x.view(), &self.y, self.task, self.n_classes())
    }

    /// Rows `indices` in the given order, keeping names and the class table.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            x: self.x.select(Axis(0), indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            task: self.task,
            class_names: self.class_names.clone(),
        }
    }

    /// Checks the cleaned-dataset invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n_samples() < 2 || self.n_features() < 1 {
            return Err(Error::EmptyDataset(format!(
                "{}: need at least 2 rows and 1 feature, got {}x{}",
                self.name,
                self.n_samples(),
                self.n_features()
            )));
        }
        if self.y.len() != self.n_samples() || self.feature_names.len() != self.n_features() {
            return Err(Error::InvalidInput(format!(
                "{}: inconsistent shapes",
                self.name
            )));
        }
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: non-finite cell",
                self.name
            )));
        }
        let mut seen = HashSet::new();
        for name in &self.feature_names {
            if sanitize_column_name(name) != *name || !seen.insert(name) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if self.task == Task::Classification {
            let c = self.class_names.len();
            let mut present = vec![false; c];
            for &label in &self.y {
                let idx = label as usize;
                if label < 0.0 || label.fract() != 0.0 || idx >= c {
                    return Err(Error::InvalidInput(format!(
                        "{}: label {label} outside 0..{c}",
                        self.name
                    )));
                }
                present[idx] = true;
            }
            if present.iter().any(|p| !p) {
                return Err(Error::InvalidInput(format!(
                    "{}: class labels are not contiguous",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Numeric values treated as missing (e.g. `-200` in some UCI sets).
    pub missing_sentinels: Vec<f64>,
    /// Dataset name; defaults to the file stem.
    pub name: Option<String>,
}

/// Lower-cases a column name and replaces each run of non-alphanumeric
/// characters with a single `_`, trimming underscores at both ends.
pub fn sanitize_column_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(ch);
        } else {
            pending_sep = true;
        }
    }
    out
}

/// Reads a CSV file without cleaning: column names are kept verbatim,
/// missing tokens and sentinels become NaN, classification targets are
/// label-encoded by first occurrence (a missing label is NaN).
pub fn read_csv_raw(
    path: &Path,
    target_column: &str,
    task: Task,
    options: &LoadOptions,
) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTarget(target_column.to_owned()))?;

    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let d = feature_names.len();

    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();

    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let column = &header[c];
            if c == target_idx {
                let value = if cell.is_empty() || MISSING_TOKENS.contains(&cell) {
                    f64::NAN
                } else {
                    match task {
                        Task::Classification => {
                            let next = classes.len();
                            let idx = *class_index.entry(cell.to_owned()).or_insert_with(|| {
                                classes.push(cell.to_owned());
                                next
                            });
                            idx as f64
                        }
                        Task::Regression => parse_numeric(cell, row, column, options)?,
                    }
                };
                y.push(value);
            } else {
                if cell.is_empty() {
                    return Err(Error::MissingValue {
                        row,
                        column: column.clone(),
                    });
                }
                values.push(parse_numeric(cell, row, column, options)?);
            }
        }
    }

    let n = y.len();
    let name = options.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_owned())
    });
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset(format!(
            "{name}: {n} rows, {d} features"
        )));
    }
    let x =
        Array2::from_shape_vec((n, d), values).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(Dataset {
        name,
        feature_names,
        target_name: target_column.to_owned(),
        x,
        y,
        task,
        class_names: classes,
    })
}

fn parse_numeric(cell: &str, row: usize, column: &str, options: &LoadOptions) -> Result<f64> {
    if MISSING_TOKENS.contains(&cell) {
        return Ok(f64::NAN);
    }
    let value: f64 = cell.parse().map_err(|_| Error::NonNumeric {
        row,
        column: column.to_owned(),
        value: cell.to_owned(),
    })?;
    if !value.is_finite() {
        return Ok(f64::NAN);
    }
    if options.missing_sentinels.contains(&value) {
        return Ok(f64::NAN);
    }
    Ok(value)
}

/// Reads and cleans a CSV dataset.
pub fn load_csv(path: &Path, target_column: &str, task: Task) -> Result<Dataset> {
    load_csv_with(path, target_column, task, &LoadOptions::default())
}

pub fn load_csv_with(
    path: &Path,
    target_column: &str,
    task: Task,
    options: &LoadOptions,
) -> Result<Dataset> {
    let raw = read_csv_raw(path, target_column, task, options)?;
    let (clean, dropped) = clean_dataset_counted(&raw)?;
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with missing values", clean.name);
    }
    Ok(clean)
}

/// Sanitizes column names, drops rows containing a missing value and
/// re-encodes class labels contiguously by first occurrence.
pub fn clean_dataset(raw: &Dataset) -> Result<Dataset> {
    clean_dataset_counted(raw).map(|(ds, _)| ds)
}

/// As [`clean_dataset`], also returning the number of dropped rows.
pub fn clean_dataset_counted(raw: &Dataset) -> Result<(Dataset, usize)> {
    let mut seen = HashSet::new();
    let mut feature_names = Vec::with_capacity(raw.feature_names.len());
    for (i, name) in raw.feature_names.iter().enumerate() {
        let mut clean = sanitize_column_name(name);
        if clean.is_empty() {
            clean = format!("column_{i}");
        }
        if !seen.insert(clean.clone()) {
            return Err(Error::DuplicateColumn(clean));
        }
        feature_names.push(clean);
    }
    let target_name = {
        let t = sanitize_column_name(&raw.target_name);
        if t.is_empty() {
            "target".to_owned()
        } else {
            t
        }
    };

    let keep: Vec<usize> = (0..raw.n_samples())
        .filter(|&i| raw.y[i].is_finite() && raw.x.row(i).iter().all(|v| v.is_finite()))
        .collect();
    let dropped = raw.n_samples() - keep.len();
    if keep.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{}: all {} rows dropped during cleaning",
            raw.name,
            raw.n_samples()
        )));
    }

    let mut ds = raw.select_rows(&keep);
    ds.feature_names = feature_names;
    ds.target_name = target_name;

    if ds.task == Task::Classification {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut class_names = Vec::new();
        for label in ds.y.iter_mut() {
            let old = *label as usize;
            let next = remap.len();
            let new = *remap.entry(old).or_insert_with(|| {
                class_names.push(
                    raw.class_names
                        .get(old)
                        .cloned()
                        .unwrap_or_else(|| old.to_string()),
                );
                next
            });
            *label = new as f64;
        }
        ds.class_names = class_names;
    }
    Ok((ds, dropped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// Number of training rows for `n` samples at `ratio`.
pub fn train_size(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

/// Shuffles row indices with [`SeededRng`] seeded by `seed`; the first
/// `round(ratio * n)` shuffled rows form the training set.
pub fn split_train_test(ds: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidSplit(format!("ratio {ratio} outside (0, 1)")));
    }
    let n = ds.n_samples();
    let n_train = train_size(n, ratio);
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit(format!(
            "{} rows at ratio {ratio} leave an empty side",
            n
        )));
    }
    let order = SeededRng::new(seed).permutation(n);
    let train_indices = order[..n_train].to_vec();
    let test_indices = order[n_train..].to_vec();
    Ok(SplitPair {
        train: ds.select_rows(&train_indices),
        test: ds.select_rows(&test_indices),
        train_indices,
        test_indices,
        seed,
        ratio,
    })
}

/// Writes a dataset as CSV: sanitized feature names, then the target
/// column (encoded class index for classification).
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut header = ds.feature_names.clone();
    header.push(ds.target_name.clone());
    writer.write_record(&header)?;
    for (row, target) in ds.x.rows().into_iter().zip(&ds.y) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(target.to_string());
        writer.write_record(&fields)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn toy(n: usize) -> Dataset {
        Dataset {
            name: "toy".into(),
            feature_names: vec!["a".into()],
            target_name: "t".into(),
            x: Array2::from_shape_fn((n, 1), |(i, _)| i as f64),
            y: (0..n).map(|i| i as f64).collect(),
            task: Task::Regression,
            class_names: vec![],
        }
    }

    #[test]
    fn loads_four_rows_two_features() {
        let f = write_tmp("a,b,target\n1,2,0.5\n3,4,1.5\n5,6,2.5\n7,8,3.5\n");
        let ds = load_csv(f.path(), "target", Task::Regression).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_samples(), 4);
        assert_eq!(ds.y, vec![0.5, 1.5, 2.5, 3.5]);
        assert_eq!(ds.x[[3, 1]], 8.0);
    }

    #[test]
    fn labels_encoded_by_first_occurrence() {
        let f = write_tmp("x,class\n1,B\n2,A\n3,B\n4,A\n");
        let ds = load_csv(f.path(), "class", Task::Classification).unwrap();
        assert_eq!(ds.y, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.class_names, vec!["B", "A"]);
    }

    #[test]
    fn blank_cell_is_an_error() {
        let f = write_tmp("a,b,target\n1,2,0\n3,,1\n");
        let err = load_csv(f.path(), "target", Task::Regression).unwrap_err();
        assert_eq!(err.to_string(), "missing value at row 2, column b");
    }

    #[test]
    fn missing_target_column() {
        let f = write_tmp("a,b\n1,2\n");
        let err = load_csv(f.path(), "target", Task::Regression).unwrap_err();
        assert!(matches!(err, Error::MissingTarget(_)));
    }

    #[test]
    fn missing_file() {
        let err = load_csv(Path::new("/nonexistent/x.csv"), "t", Task::Regression).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn non_numeric_feature() {
        let f = write_tmp("a,target\nfoo,1\n2,3\n");
        let err = load_csv(f.path(), "target", Task::Regression).unwrap_err();
        assert!(matches!(err, Error::NonNumeric { row: 1, .. }));
    }

    #[test]
    fn empty_file_body() {
        let f = write_tmp("a,target\n");
        assert!(matches!(
            load_csv(f.path(), "target", Task::Regression),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn sanitizes_names() {
        assert_eq!(sanitize_column_name("Area (mm^2)"), "area_mm_2");
        assert_eq!(
            sanitize_column_name("  Major_Axis Length "),
            "major_axis_length"
        );
        assert_eq!(sanitize_column_name("PT08.S1(CO)"), "pt08_s1_co");
    }

    #[test]
    fn cleaning_drops_missing_rows_and_encodes() {
        let f = write_tmp("Area (mm^2),Class\n1,Cammeo\nNaN,Osmancik\n3,Osmancik\n");
        let raw = read_csv_raw(
            f.path(),
            "Class",
            Task::Classification,
            &LoadOptions::default(),
        )
        .unwrap();
        let (ds, dropped) = clean_dataset_counted(&raw).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(ds.n_samples(), 2);
        assert_eq!(ds.feature_names, vec!["area_mm_2"]);
        assert_eq!(ds.y, vec![0.0, 1.0]);
        assert_eq!(ds.class_names, vec!["Cammeo", "Osmancik"]);
        ds.validate().unwrap();
    }

    #[test]
    fn relabels_when_a_class_disappears() {
        let f = write_tmp("x,c\nNaN,A\n1,B\n2,C\n3,B\n");
        let ds = load_csv(f.path(), "c", Task::Classification).unwrap();
        assert_eq!(ds.y, vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.class_names, vec!["B", "C"]);
    }

    #[test]
    fn sentinels_become_missing() {
        let f = write_tmp("a,t\n-200,1\n2,2\n3,3\n");
        let opts = LoadOptions {
            missing_sentinels: vec![-200.0],
            name: None,
        };
        let ds = load_csv_with(f.path(), "t", Task::Regression, &opts).unwrap();
        assert_eq!(ds.n_samples(), 2);
        let plain = load_csv(f.path(), "t", Task::Regression).unwrap();
        assert_eq!(plain.n_samples(), 3);
    }

    #[test]
    fn cleaning_errors() {
        let mut ds = toy(3);
        ds.feature_names = vec!["A b".into(), "a-b".into()];
        ds.x = Array2::zeros((3, 2));
        assert!(matches!(clean_dataset(&ds), Err(Error::DuplicateColumn(_))));

        let mut ds = toy(2);
        ds.x.fill(f64::NAN);
        assert!(matches!(clean_dataset(&ds), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn cleaning_is_idempotent() {
        let f = write_tmp("Feat A,Feat-B,Label\n1,2,x\n?,3,y\n4,5,z\n6,7,x\n");
        let once = load_csv(f.path(), "Label", Task::Classification).unwrap();
        let twice = clean_dataset(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn split_sizes() {
        let s = split_train_test(&toy(10), 0.7, 1).unwrap();
        assert_eq!(s.train.n_samples(), 7);
        assert_eq!(s.test.n_samples(), 3);
    }

    #[test]
    fn split_is_deterministic_and_seed_dependent() {
        let ds = toy(10);
        let a = split_train_test(&ds, 0.7, 5).unwrap();
        let b = split_train_test(&ds, 0.7, 5).unwrap();
        assert_eq!(a.train_indices, b.train_indices);
        assert_eq!(a.test_indices, b.test_indices);
        let c = split_train_test(&ds, 0.7, 6).unwrap();
        let perm_a: Vec<_> = a.train_indices.iter().chain(&a.test_indices).collect();
        let perm_c: Vec<_> = c.train_indices.iter().chain(&c.test_indices).collect();
        assert_ne!(perm_a, perm_c);
    }

    #[test]
    fn split_rejects_bad_ratio_and_tiny_data() {
        assert!(split_train_test(&toy(10), 0.0, 1).is_err());
        assert!(split_train_test(&toy(10), 1.0, 1).is_err());
        assert!(split_train_test(&toy(10), f64::NAN, 1).is_err());
        assert!(split_train_test(&toy(2), 0.9, 1).is_err());
    }

    #[test]
    fn split_rows_follow_indices() {
        let ds = toy(20);
        let s = split_train_test(&ds, 0.7, 9).unwrap();
        for (row, &i) in s.train_indices.iter().enumerate() {
            assert_eq!(s.train.x[[row, 0]], i as f64);
            assert_eq!(s.train.y[row], i as f64);
        }
    }

    #[test]
    fn csv_round_trip() {
        let f = write_tmp("a,b,label\n1.5,2,yes\n3,4.25,no\n");
        let ds = load_csv(f.path(), "label", Task::Classification).unwrap();
        let out = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        write_csv(&ds, out.path()).unwrap();
        let back = load_csv(out.path(), "label", Task::Classification).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_partitions_rows(n in 2usize..200, ratio in 0.05f64..0.95, seed: u64) {
                let n_train = train_size(n, ratio);
                prop_assume!(n_train >= 1 && n_train < n);
                let s = split_train_test(&toy(n), ratio, seed).unwrap();
                let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(s.train_indices.len(), n_train);
            }
        }
    }
}
