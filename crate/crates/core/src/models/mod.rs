//! From-scratch learners.
//!
//! All learners are deterministic functions of their [`ModelSpec`] (seed
//! included) and training data. Ties are always broken toward the lowest
//! index: lowest class in votes and argmax, lowest training row among
//! equidistant KNN neighbors, lowest feature then lowest threshold among
//! equally good tree splits.

mod forest;
mod gnb;
mod knn;
mod linreg;
mod logreg;
mod mlp;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::{Samples, Task};
use crate::error::{Error, Result};

pub use forest::{RandomForest, RandomForestParams};
pub use gnb::{GaussianNb, GaussianNbParams};
pub use knn::{Knn, KnnParams};
pub use linreg::LinearRegression;
pub use logreg::{LogisticParams, LogisticRegression};
pub use mlp::{Mlp, MlpGradients, MlpParams, MlpWeights};
pub use tree::{DecisionTree, MaxFeatures, Node, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "LinReg")]
    LinReg,
    #[serde(rename = "LogReg")]
    LogReg,
    #[serde(rename = "GaussianNB")]
    GaussianNb,
    #[serde(rename = "CART")]
    Cart,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "MLP")]
    Mlp,
}

/// Model families known from the literature but not implemented here.
const UNSUPPORTED: [&str; 14] = [
    "svm",
    "svr",
    "svc",
    "tabnet",
    "lightgbm",
    "lgbm",
    "catboost",
    "xgboost",
    "xgb",
    "adaboost",
    "ada",
    "gbt",
    "gradientboosting",
    "gradient_boosting",
];

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Knn,
        ModelKind::LinReg,
        ModelKind::LogReg,
        ModelKind::GaussianNb,
        ModelKind::Cart,
        ModelKind::Rf,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "KNN",
            ModelKind::LinReg => "LinReg",
            ModelKind::LogReg => "LogReg",
            ModelKind::GaussianNb => "GaussianNB",
            ModelKind::Cart => "CART",
            ModelKind::Rf => "RF",
            ModelKind::Mlp => "MLP",
        }
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            ModelKind::LinReg => task == Task::Regression,
            ModelKind::LogReg | ModelKind::GaussianNb => task == Task::Classification,
            _ => true,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// Case-insensitive; out-of-scope families yield
    /// [`Error::ModelNotImplemented`].
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(kind) = ModelKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == lower)
        {
            return Ok(kind);
        }
        if UNSUPPORTED.contains(&lower.as_str()) {
            Err(Error::ModelNotImplemented(s.to_owned()))
        } else {
            Err(Error::UnknownModel(s.to_owned()))
        }
    }
}

/// Hyperparameters for one learner.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Hyperparams {
    Knn(KnnParams),
    LinReg {},
    LogReg(LogisticParams),
    GaussianNb(GaussianNbParams),
    Cart(TreeParams),
    Rf(RandomForestParams),
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn defaults(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => Hyperparams::Knn(KnnParams::default()),
            ModelKind::LinReg => Hyperparams::LinReg {},
            ModelKind::LogReg => Hyperparams::LogReg(LogisticParams::default()),
            ModelKind::GaussianNb => Hyperparams::GaussianNb(GaussianNbParams::default()),
            ModelKind::Cart => Hyperparams::Cart(TreeParams::default()),
            ModelKind::Rf => Hyperparams::Rf(RandomForestParams::default()),
            ModelKind::Mlp => Hyperparams::Mlp(MlpParams::default()),
        }
    }

    /// Defaults for `kind` with the keys of `overrides` replaced. Unknown
    /// keys are rejected.
    pub fn with_overrides(kind: ModelKind, overrides: &Map<String, Value>) -> Result<Self> {
        let defaults = Self::defaults(kind);
        if overrides.is_empty() {
            return Ok(defaults);
        }
        let mut merged = match serde_json::to_value(&defaults)? {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        for (k, v) in overrides {
            merged.insert(k.clone(), v.clone());
        }
        let merged = Value::Object(merged);
        let bad = |e: serde_json::Error| Error::InvalidHyperparameter(format!("{kind}: {e}"));
        Ok(match kind {
            ModelKind::Knn => Hyperparams::Knn(serde_json::from_value(merged).map_err(bad)?),
            ModelKind::LinReg => {
                return Err(Error::InvalidHyperparameter(format!(
                    "LinReg takes no hyperparameters, got {:?}",
                    overrides.keys().collect::<Vec<_>>()
                )))
            }
            ModelKind::LogReg => Hyperparams::LogReg(serde_json::from_value(merged).map_err(bad)?),
            ModelKind::GaussianNb => {
                Hyperparams::GaussianNb(serde_json::from_value(merged).map_err(bad)?)
            }
            ModelKind::Cart => Hyperparams::Cart(serde_json::from_value(merged).map_err(bad)?),
            ModelKind::Rf => Hyperparams::Rf(serde_json::from_value(merged).map_err(bad)?),
            ModelKind::Mlp => Hyperparams::Mlp(serde_json::from_value(merged).map_err(bad)?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidHyperparameter(msg.to_owned()));
        match self {
            Hyperparams::Knn(p) if p.k < 1 => bad("k must be >= 1"),
            Hyperparams::LogReg(p) if p.learning_rate.is_nan() || p.learning_rate <= 0.0 => {
                bad("learning_rate must be > 0")
            }
            Hyperparams::LogReg(p) if p.max_iter < 1 => bad("max_iter must be >= 1"),
            Hyperparams::GaussianNb(p) if p.var_smoothing.is_nan() || p.var_smoothing < 0.0 => {
                bad("var_smoothing must be >= 0")
            }
            Hyperparams::Cart(p) if p.min_samples_split < 2 => {
                bad("min_samples_split must be >= 2")
            }
            Hyperparams::Rf(p) if p.n_trees < 1 => bad("n_trees must be >= 1"),
            Hyperparams::Rf(p) if p.min_samples_split < 2 => bad("min_samples_split must be >= 2"),
            Hyperparams::Mlp(p) if p.learning_rate.is_nan() || p.learning_rate <= 0.0 => {
                bad("learning_rate must be > 0")
            }
            Hyperparams::Mlp(p) if p.epochs < 1 => bad("epochs must be >= 1"),
            Hyperparams::Mlp(p) if p.hidden < 1 => bad("hidden must be >= 1"),
            Hyperparams::Mlp(p) if p.batch_size == Some(0) => bad("batch_size must be >= 1"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub task: Task,
    pub params: Hyperparams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, task: Task, seed: u64) -> Self {
        Self {
            kind,
            task,
            params: Hyperparams::defaults(kind),
            seed,
        }
    }

    pub fn with_params(mut self, params: Hyperparams) -> Self {
        self.params = params;
        self
    }
}

/// Bookkeeping from training.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingInfo {
    pub iterations: usize,
    pub final_loss: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Knn(Knn),
    LinReg(LinearRegression),
    LogReg(LogisticRegression),
    GaussianNb(GaussianNb),
    Cart(DecisionTree),
    Rf(RandomForest),
    Mlp(Mlp),
}

/// Trains the learner described by `spec` on `data`.
pub fn train(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    if !spec.kind.supports(spec.task) {
        return Err(Error::TaskMismatch(format!(
            "{} does not support {}",
            spec.kind, spec.task
        )));
    }
    if spec.task != data.task {
        return Err(Error::TaskMismatch(format!(
            "spec is for {} but data is {}",
            spec.task, data.task
        )));
    }
    if data.n_samples() == 0 || data.n_features() == 0 || data.y.len() != data.n_samples() {
        return Err(Error::InvalidInput(format!(
            "training data has shape {}x{} with {} targets",
            data.n_samples(),
            data.n_features(),
            data.y.len()
        )));
    }
    if data.task == Task::Classification && data.n_classes == 0 {
        return Err(Error::InvalidInput(
            "classification data without classes".into(),
        ));
    }
    spec.params.validate()?;
    Ok(match &spec.params {
        Hyperparams::Knn(p) => TrainedModel::Knn(Knn::fit(p, data)?),
        Hyperparams::LinReg {} => TrainedModel::LinReg(LinearRegression::fit(data)?),
        Hyperparams::LogReg(p) => TrainedModel::LogReg(LogisticRegression::fit(p, data)?),
        Hyperparams::GaussianNb(p) => TrainedModel::GaussianNb(GaussianNb::fit(p, data)?),
        Hyperparams::Cart(p) => TrainedModel::Cart(DecisionTree::fit(p, data)?),
        Hyperparams::Rf(p) => TrainedModel::Rf(RandomForest::fit(p, data, spec.seed)?),
        Hyperparams::Mlp(p) => TrainedModel::Mlp(Mlp::fit(p, data, spec.seed)?),
    })
}

pub fn train_knn(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    expect_kind(spec, ModelKind::Knn)?;
    train(spec, data)
}

pub fn train_linreg(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    expect_kind(spec, ModelKind::LinReg)?;
    train(spec, data)
}

pub fn train_logreg(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    expect_kind(spec, ModelKind::LogReg)?;
    train(spec, data)
}

pub fn train_gnb(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    expect_kind(spec, ModelKind::GaussianNb)?;
    train(spec, data)
}

pub fn train_cart(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    expect_kind(spec, ModelKind::Cart)?;
    train(spec, data)
}

pub fn train_rf(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    expect_kind(spec, ModelKind::Rf)?;
    train(spec, data)
}

pub fn train_mlp(spec: &ModelSpec, data: Samples) -> Result<TrainedModel> {
    expect_kind(spec, ModelKind::Mlp)?;
    train(spec, data)
}

fn expect_kind(spec: &ModelSpec, kind: ModelKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidInput(format!(
            "expected a {kind} spec, got {}",
            spec.kind
        )));
    }
    Ok(())
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::LinReg(_) => ModelKind::LinReg,
            TrainedModel::LogReg(_) => ModelKind::LogReg,
            TrainedModel::GaussianNb(_) => ModelKind::GaussianNb,
            TrainedModel::Cart(_) => ModelKind::Cart,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::LinReg(m) => m.coefficients.len(),
            TrainedModel::LogReg(m) => m.weights.nrows(),
            TrainedModel::GaussianNb(m) => m.means.ncols(),
            TrainedModel::Cart(m) => m.n_features,
            TrainedModel::Rf(m) => m.n_features,
            TrainedModel::Mlp(m) => m.weights.w1.nrows(),
        }
    }

    pub fn task(&self) -> Task {
        match self {
            TrainedModel::Knn(m) => m.task,
            TrainedModel::LinReg(_) => Task::Regression,
            TrainedModel::LogReg(_) | TrainedModel::GaussianNb(_) => Task::Classification,
            TrainedModel::Cart(m) => m.task,
            TrainedModel::Rf(m) => m.task,
            TrainedModel::Mlp(m) => m.task,
        }
    }

    pub fn info(&self) -> TrainingInfo {
        match self {
            TrainedModel::LogReg(m) => m.info.clone(),
            TrainedModel::Mlp(m) => m.info.clone(),
            TrainedModel::Rf(m) => TrainingInfo {
                iterations: m.trees.len(),
                ..TrainingInfo::default()
            },
            _ => TrainingInfo::default(),
        }
    }

    fn check_dims(&self, x: &ArrayView2<f64>) -> Result<()> {
        let expected = self.n_features();
        if x.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Class indices (as `f64`) for classifiers, real values for regressors.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_dims(&x)?;
        Ok(match self {
            TrainedModel::Knn(m) => m.predict(x),
            TrainedModel::LinReg(m) => m.predict(x),
            TrainedModel::LogReg(m) => argmax_rows(&m.predict_proba(x)),
            TrainedModel::GaussianNb(m) => argmax_rows(&m.predict_proba(x)),
            TrainedModel::Cart(m) => m.predict(x),
            TrainedModel::Rf(m) => m.predict(x),
            TrainedModel::Mlp(m) => m.predict(x),
        })
    }

    /// Class probabilities (m × n_classes); rows sum to one.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dims(&x)?;
        if self.task() != Task::Classification {
            return Err(Error::TaskMismatch(
                "probabilities need a classifier".into(),
            ));
        }
        Ok(match self {
            TrainedModel::Knn(m) => m.predict_proba(x),
            TrainedModel::LogReg(m) => m.predict_proba(x),
            TrainedModel::GaussianNb(m) => m.predict_proba(x),
            TrainedModel::Cart(m) => m.predict_proba(x),
            TrainedModel::Rf(m) => m.predict_proba(x),
            TrainedModel::Mlp(m) => m.predict_proba(x),
            TrainedModel::LinReg(_) => unreachable!(),
        })
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

pub(crate) fn argmax_rows(p: &Array2<f64>) -> Vec<f64> {
    p.rows()
        .into_iter()
        .map(|row| argmax(row.iter().copied()) as f64)
        .collect()
}

/// Most frequent class among `labels`; ties go to the lowest class.
pub(crate) fn majority(labels: impl IntoIterator<Item = f64>, n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for l in labels {
        counts[l as usize] += 1;
    }
    argmax(counts.into_iter().map(|c| c as f64))
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parses_names_and_rejects_out_of_scope() {
        assert_eq!("knn".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert_eq!(
            "GaussianNB".parse::<ModelKind>().unwrap(),
            ModelKind::GaussianNb
        );
        let err = "xgboost".parse::<ModelKind>().unwrap_err();
        assert!(matches!(err, Error::ModelNotImplemented(_)));
        assert!(err.to_string().contains("model not implemented"));
        assert!(matches!(
            "SVM".parse::<ModelKind>(),
            Err(Error::ModelNotImplemented(_))
        ));
        assert!(matches!(
            "banana".parse::<ModelKind>(),
            Err(Error::UnknownModel(_))
        ));
    }

    #[test]
    fn task_support() {
        let cls: Vec<_> = ModelKind::ALL
            .into_iter()
            .filter(|k| k.supports(Task::Classification))
            .collect();
        let reg: Vec<_> = ModelKind::ALL
            .into_iter()
            .filter(|k| k.supports(Task::Regression))
            .collect();
        assert_eq!(cls.len(), 6);
        assert_eq!(reg.len(), 5);
    }

    #[test]
    fn overrides_merge_and_validate() {
        let mut m = Map::new();
        m.insert("k".into(), Value::from(3));
        let p = Hyperparams::with_overrides(ModelKind::Knn, &m).unwrap();
        assert_eq!(p, Hyperparams::Knn(KnnParams { k: 3 }));

        let mut bad = Map::new();
        bad.insert("depth".into(), Value::from(3));
        assert!(Hyperparams::with_overrides(ModelKind::Knn, &bad).is_err());

        let mut zero = Map::new();
        zero.insert("k".into(), Value::from(0));
        let p = Hyperparams::with_overrides(ModelKind::Knn, &zero).unwrap();
        assert!(p.validate().is_err());
    }

    #[test]
    fn train_rejects_task_mismatch() {
        let x = array![[0.0], [1.0]];
        let y = [0.0, 1.0];
        let spec = ModelSpec::new(ModelKind::LinReg, Task::Classification, 0);
        assert!(matches!(
            train(&spec, Samples::new(x.view(), &y, Task::Classification, 2)),
            Err(Error::TaskMismatch(_))
        ));
        let spec = ModelSpec::new(ModelKind::Knn, Task::Classification, 0);
        assert!(train_cart(&spec, Samples::new(x.view(), &y, Task::Classification, 2)).is_err());
    }

    #[test]
    fn predict_checks_dimensions() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let y = [0.0, 1.0];
        let spec = ModelSpec::new(ModelKind::Cart, Task::Classification, 0);
        let m = train(&spec, Samples::new(x.view(), &y, Task::Classification, 2)).unwrap();
        assert!(matches!(
            m.predict(array![[1.0]].view()),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn argmax_and_majority_break_ties_low() {
        assert_eq!(argmax([1.0, 3.0, 3.0]), 1);
        assert_eq!(majority([0.0, 0.0, 1.0], 2), 0);
        assert_eq!(majority([2.0, 1.0], 3), 1);
    }
}
