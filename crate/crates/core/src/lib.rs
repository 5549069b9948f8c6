//! Feature-scaling benchmark toolkit.
//!
//! The crate bundles everything needed to measure how per-feature scalers
//! affect tabular learners:
//!
//! * [`dataset`] loads, cleans and splits CSV datasets before any scaling.
//! * [`scaling`] holds the thirteen scalers (twelve techniques plus the
//!   `NO` baseline) with fit-on-train-only semantics.
//! * [`models`] contains the from-scratch learners.
//! * [`metrics`] and [`stats`] score predictions and test significance.
//! * [`runner`] executes the dataset × model × scaler grid.
//! * [`report`] aggregates results into significance tables and reports.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod models;
pub mod report;
pub mod rng;
pub mod runner;
pub mod scaling;
pub mod stats;

pub use dataset::{
    clean_dataset, load_csv, split_train_test, Dataset, LoadOptions, SplitPair, Task,
};
pub use error::{Error, Result};
pub use metrics::{accuracy, mae, mse, r2, EvalResult};
pub use models::{train, ModelKind, ModelSpec, TrainedModel};
pub use runner::{run_experiment, RunConfig, RunManifest, RunOutput, RunRecord};
pub use scaling::{fit_scaler, FittedScaler, QuantileOutput, ScalerKind};
pub use stats::{friedman, wilcoxon_signed_rank, TestOutcome};

/// Row-major feature matrix (`n` samples × `d` features).
pub type Matrix = ndarray::Array2<f64>;
