//! The dataset × model × scaler sweep.
//!
//! Each dataset is loaded, cleaned and split once; every compatible
//! (model, scaler) cell then fits its scaler on the training rows only,
//! transforms both sides, trains, predicts and scores. Cells are
//! independent and run on a rayon pool; a failing cell becomes a
//! `failed: ...` record instead of aborting the sweep.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::{
    clean_dataset_counted, read_csv_raw, split_train_test, write_csv, Dataset, LoadOptions,
    Samples, SplitPair, Task,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult};
use crate::models::{train, Hyperparams, ModelKind, ModelSpec};
use crate::rng::derive_seed;
use crate::scaling::{fit_scaler_with, FittedScaler, QuantileOutput, ScalerKind};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Columns of `results.csv`, in order.
pub const RESULT_COLUMNS: [&str; 14] = [
    "dataset",
    "model",
    "scaler",
    "task",
    "accuracy",
    "mae",
    "mse",
    "r2",
    "train_time_ms",
    "inference_time_ms",
    "scaler_fit_time_ms",
    "memory_kb",
    "seed",
    "status",
];

/// Columns that vary between otherwise identical runs.
pub const TIME_COLUMNS: [&str; 3] = ["train_time_ms", "inference_time_ms", "scaler_fit_time_ms"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub path: PathBuf,
    pub target: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_sentinels: Vec<f64>,
}

impl DatasetConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_owned())
        })
    }
}

/// A model given by name, or by name plus hyperparameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Name(String),
    Detailed {
        kind: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
}

impl ModelEntry {
    fn resolve(&self) -> Result<(ModelKind, Hyperparams)> {
        let (kind, params) = match self {
            ModelEntry::Name(name) => (name.parse::<ModelKind>()?, Map::new()),
            ModelEntry::Detailed { kind, params } => (kind.parse::<ModelKind>()?, params.clone()),
        };
        let hp = Hyperparams::with_overrides(kind, &params)?;
        hp.validate()?;
        Ok((kind, hp))
    }
}

fn default_models() -> Vec<ModelEntry> {
    ModelKind::ALL
        .iter()
        .map(|k| ModelEntry::Name(k.name().to_owned()))
        .collect()
}

fn default_scalers() -> Vec<String> {
    ScalerKind::ALL
        .iter()
        .map(|k| k.abbreviation().to_owned())
        .collect()
}

fn default_seed() -> u64 {
    42
}

fn default_ratio() -> f64 {
    0.7
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelEntry>,
    #[serde(default = "default_scalers")]
    pub scalers: Vec<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub qt_output: QuantileOutput,
}

impl RunConfig {
    /// Parses a config whose relative dataset paths are relative to
    /// `base_dir`. A relative `output_dir` stays relative to the working
    /// directory.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for ds in &mut cfg.datasets {
            if ds.path.is_relative() {
                ds.path = base_dir.join(&ds.path);
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base)
    }

    /// Checks everything that can be checked without touching data files.
    pub fn plan(&self) -> Result<Plan> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        if self.scalers.is_empty() {
            return Err(Error::Config("at least one scaler is required".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio {} outside (0, 1)",
                self.split_ratio
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        let mut names = HashSet::new();
        for ds in &self.datasets {
            let name = ds.display_name();
            if !names.insert(name.clone()) {
                return Err(Error::Config(format!("duplicate dataset name {name:?}")));
            }
        }
        let mut models = Vec::new();
        for entry in &self.models {
            let (kind, params) = entry.resolve()?;
            if models.iter().any(|(k, _)| *k == kind) {
                return Err(Error::Config(format!("model {kind} listed twice")));
            }
            models.push((kind, params));
        }
        let mut scalers = Vec::new();
        for name in &self.scalers {
            let kind: ScalerKind = name.parse()?;
            if scalers.contains(&kind) {
                return Err(Error::Config(format!("scaler {kind} listed twice")));
            }
            scalers.push(kind);
        }
        Ok(Plan { models, scalers })
    }
}

/// Validated model and scaler lists, in sweep order.
#[derive(Debug, Clone)]
pub struct Plan {
    pub models: Vec<(ModelKind, Hyperparams)>,
    pub scalers: Vec<ScalerKind>,
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub model: String,
    pub scaler: String,
    pub task: Task,
    pub accuracy: Option<f64>,
    pub mae: Option<f64>,
    pub mse: Option<f64>,
    pub r2: Option<f64>,
    pub train_time_ms: f64,
    pub inference_time_ms: f64,
    pub scaler_fit_time_ms: f64,
    pub memory_kb: f64,
    pub seed: u64,
    /// `ok` or `failed: <reason>`.
    pub status: String,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn metrics(&self) -> EvalResult {
        EvalResult {
            accuracy: self.accuracy,
            mae: self.mae,
            mse: self.mse,
            r2: self.r2,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics().get(name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub name: String,
    pub path: PathBuf,
    pub task: Task,
    pub rows: usize,
    pub features: usize,
    pub classes: usize,
    pub dropped_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub split_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub params: Hyperparams,
}

/// Fitted statistics of one scaler on one dataset's training split.
#[derive(Debug, Clone, Serialize)]
pub struct ScalerSummary {
    pub dataset: String,
    pub scaler: FittedScaler,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub seed: u64,
    pub config: RunConfig,
    pub datasets: Vec<DatasetSummary>,
    pub models: Vec<ModelSummary>,
    pub scalers: Vec<ScalerSummary>,
    pub records: usize,
    pub failed: usize,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub manifest: RunManifest,
    pub splits: Vec<SplitPair>,
}

/// Runs `f` and returns its result with the elapsed wall-clock time in
/// milliseconds.
pub fn measure_time<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

/// Bytes held because of scaling, in kB: the scaler's statistics plus the
/// transformed copies of both splits at 8 bytes per value. `NO` copies
/// nothing and costs nothing.
pub fn measure_memory(scaler: &FittedScaler, train: &Array2<f64>, test: &Array2<f64>) -> f64 {
    if scaler.kind == ScalerKind::NO {
        return 0.0;
    }
    let values = scaler.stored_value_count() + train.len() + test.len();
    (values * 8) as f64 / 1024.0
}

/// Seed for a model on a dataset. The scaler is left out so every scaler
/// of a (dataset, model) pair trains with the same randomness.
pub fn cell_seed(global: u64, dataset: &str, model: ModelKind) -> u64 {
    derive_seed(global, &["cell", dataset, model.name()])
}

pub fn split_seed(global: u64, dataset: &str) -> u64 {
    derive_seed(global, &["split", dataset])
}

struct Cell<'a> {
    split: &'a SplitPair,
    model: ModelKind,
    params: &'a Hyperparams,
    scaler: ScalerKind,
}

struct CellOutcome {
    record: RunRecord,
    fitted: Option<FittedScaler>,
}

fn run_cell(cell: &Cell, global_seed: u64, qt_output: QuantileOutput) -> CellOutcome {
    let train_ds = &cell.split.train;
    let test_ds = &cell.split.test;
    let seed = cell_seed(global_seed, &train_ds.name, cell.model);
    let mut record = RunRecord {
        dataset: train_ds.name.clone(),
        model: cell.model.name().to_owned(),
        scaler: cell.scaler.abbreviation().to_owned(),
        task: train_ds.task,
        accuracy: None,
        mae: None,
        mse: None,
        r2: None,
        train_time_ms: 0.0,
        inference_time_ms: 0.0,
        scaler_fit_time_ms: 0.0,
        memory_kb: 0.0,
        seed,
        status: "ok".to_owned(),
    };
    let mut fitted = None;
    let result = (|| -> Result<EvalResult> {
        let (scaler, t) =
            measure_time(|| fit_scaler_with(cell.scaler, train_ds.x.view(), qt_output));
        let scaler = scaler?;
        record.scaler_fit_time_ms = t;
        if scaler.fit_row_count != train_ds.n_samples() {
            return Err(Error::InvalidInput(format!(
                "scaler saw {} rows, training split has {}",
                scaler.fit_row_count,
                train_ds.n_samples()
            )));
        }
        let train_x = scaler.transform_cow(&train_ds.x)?;
        let test_x = scaler.transform_cow(&test_ds.x)?;
        record.memory_kb = measure_memory(&scaler, &train_x, &test_x);
        fitted = Some(scaler);

        let spec = ModelSpec::new(cell.model, train_ds.task, seed).with_params(cell.params.clone());
        let samples = Samples::new(
            train_x.view(),
            &train_ds.y,
            train_ds.task,
            train_ds.n_classes(),
        );
        let (model, t) = measure_time(|| train(&spec, samples));
        record.train_time_ms = t;
        let model = model?;
        let (pred, t) = measure_time(|| model.predict(test_x.view()));
        record.inference_time_ms = t;
        evaluate(train_ds.task, &test_ds.y, &pred?)
    })();
    match result {
        Ok(m) => {
            record.accuracy = m.accuracy;
            record.mae = m.mae;
            record.mse = m.mse;
            record.r2 = m.r2;
        }
        Err(e) => {
            log::warn!(
                "{}/{}/{} failed: {e}",
                record.dataset,
                record.model,
                record.scaler
            );
            record.status = format!("failed: {e}");
        }
    }
    CellOutcome { record, fitted }
}

fn load_dataset(cfg: &DatasetConfig) -> Result<(Dataset, usize)> {
    let options = LoadOptions {
        missing_sentinels: cfg.missing_sentinels.clone(),
        name: Some(cfg.display_name()),
    };
    let raw = read_csv_raw(&cfg.path, &cfg.target, cfg.task, &options)?;
    let (clean, dropped) = clean_dataset_counted(&raw)?;
    clean.validate()?;
    Ok((clean, dropped))
}

/// Runs the full grid described by `config`. Configuration and data
/// loading errors abort before any cell runs.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutput> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let plan = config.plan()?;

    let mut datasets = Vec::new();
    let mut splits = Vec::new();
    for ds_cfg in &config.datasets {
        let (ds, dropped) = load_dataset(ds_cfg)?;
        let seed = split_seed(config.seed, &ds.name);
        let split = split_train_test(&ds, config.split_ratio, seed)?;
        log::info!(
            "{}: {} rows ({} dropped), {} train / {} test",
            ds.name,
            ds.n_samples(),
            dropped,
            split.train.n_samples(),
            split.test.n_samples()
        );
        datasets.push(DatasetSummary {
            name: ds.name.clone(),
            path: ds_cfg.path.clone(),
            task: ds.task,
            rows: ds.n_samples(),
            features: ds.n_features(),
            classes: ds.n_classes(),
            dropped_rows: dropped,
            train_rows: split.train.n_samples(),
            test_rows: split.test.n_samples(),
            split_seed: seed,
        });
        splits.push(split);
    }

    let mut cells = Vec::new();
    for split in &splits {
        for (model, params) in &plan.models {
            if !model.supports(split.train.task) {
                continue;
            }
            for &scaler in &plan.scalers {
                cells.push(Cell {
                    split,
                    model: *model,
                    params,
                    scaler,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    // indexed collect keeps grid order: dataset, then model, then scaler
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(cell, config.seed, config.qt_output))
            .collect()
    });

    let mut scalers = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for (cell, outcome) in cells.iter().zip(&outcomes) {
        let Some(fitted) = &outcome.fitted else {
            continue;
        };
        let name = &cell.split.train.name;
        if !seen.insert((name.clone(), cell.scaler)) {
            continue;
        }
        if !fitted.degenerate_columns.is_empty() {
            let cols: Vec<&str> = fitted
                .degenerate_columns
                .iter()
                .map(|&j| cell.split.train.feature_names[j].as_str())
                .collect();
            warnings.push(format!(
                "{name}/{}: zero-spread columns {cols:?} mapped to the center value",
                cell.scaler
            ));
        }
        scalers.push(ScalerSummary {
            dataset: name.clone(),
            scaler: fitted.clone(),
        });
    }

    let records: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
    let failures: Vec<String> = records
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| format!("{}/{}/{}: {}", r.dataset, r.model, r.scaler, r.status))
        .collect();
    let manifest = RunManifest {
        tool: "scalebench".to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        seed: config.seed,
        config: config.clone(),
        datasets,
        models: plan
            .models
            .iter()
            .map(|(kind, params)| ModelSummary {
                kind: *kind,
                params: params.clone(),
            })
            .collect(),
        scalers,
        records: records.len(),
        failed: failures.len(),
        failures,
        warnings,
    };
    Ok(RunOutput {
        records,
        manifest,
        splits,
    })
}

/// Sorts records by dataset name, model (in [`ModelKind::ALL`] order) and
/// scaler (in [`ScalerKind::ALL`] order); unknown names sort last,
/// alphabetically.
pub fn sort_records(records: &mut [RunRecord]) {
    fn model_rank(name: &str) -> usize {
        ModelKind::ALL
            .iter()
            .position(|k| k.name() == name)
            .unwrap_or(usize::MAX)
    }
    fn scaler_rank(name: &str) -> usize {
        ScalerKind::ALL
            .iter()
            .position(|k| k.abbreviation() == name)
            .unwrap_or(usize::MAX)
    }
    records.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(model_rank(&a.model).cmp(&model_rank(&b.model)))
            .then(a.model.cmp(&b.model))
            .then(scaler_rank(&a.scaler).cmp(&scaler_rank(&b.scaler)))
            .then(a.scaler.cmp(&b.scaler))
    });
}

pub fn write_results(records: &[RunRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for r in records {
        writer.serialize(r)?;
    }
    if records.is_empty() {
        writer.write_record(RESULT_COLUMNS)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<RunRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != RESULT_COLUMNS {
        return Err(Error::InvalidInput(format!(
            "{}: expected header {}, got {}",
            path.display(),
            RESULT_COLUMNS.join(","),
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Writes `results.csv`, `manifest.json` and `<dataset>_train.csv` /
/// `<dataset>_test.csv` into `out_dir`, creating it if needed.
pub fn persist(output: &RunOutput, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut records = output.records.clone();
    sort_records(&mut records);
    write_results(&records, &out_dir.join(RESULTS_FILE))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&output.manifest)?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    for split in &output.splits {
        let name = &split.train.name;
        write_csv(&split.train, &out_dir.join(format!("{name}_train.csv")))?;
        write_csv(&split.test, &out_dir.join(format!("{name}_test.csv")))?;
    }
    Ok(())
}
