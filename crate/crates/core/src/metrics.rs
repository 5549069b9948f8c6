//! Predictive-performance metrics.

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};

pub const METRIC_NAMES: [&str; 4] = ["accuracy", "mae", "mse", "r2"];

/// Binary confusion counts with class `1` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(y_true: &[f64], y_pred: &[f64]) -> Result<Self> {
        check_lengths(y_true, y_pred, 1)?;
        let mut c = ConfusionCounts::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == 1.0, p == 1.0) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

fn check_lengths(y_true: &[f64], y_pred: &[f64], min: usize) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} true values vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < min {
        return Err(Error::InvalidInput(format!(
            "need at least {min} values, got {}",
            y_true.len()
        )));
    }
    Ok(())
}

/// Exact-match rate; for binary labels this equals (TP + TN) / total.
pub fn accuracy(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred, 1)?;
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / y_true.len() as f64)
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred, 1)?;
    let sum: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(sum / y_true.len() as f64)
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred, 1)?;
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(sum / y_true.len() as f64)
}

/// Coefficient of determination, `1 - SS_res / SS_tot`. Errors on a
/// constant `y_true`.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred, 2)?;
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Metric values for one evaluation; absent metrics do not apply to the task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: Option<f64>,
    pub mae: Option<f64>,
    pub mse: Option<f64>,
    pub r2: Option<f64>,
}

impl EvalResult {
    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "accuracy" => self.accuracy,
            "mae" => self.mae,
            "mse" => self.mse,
            "r2" => self.r2,
            _ => None,
        }
    }
}

/// Accuracy for classification; MAE, MSE and R² for regression. R² is left
/// empty (with a warning) when the test target is constant.
pub fn evaluate(task: Task, y_true: &[f64], y_pred: &[f64]) -> Result<EvalResult> {
    match task {
        Task::Classification => Ok(EvalResult {
            accuracy: Some(accuracy(y_true, y_pred)?),
            ..EvalResult::default()
        }),
        Task::Regression => {
            let r2 = match r2(y_true, y_pred) {
                Ok(v) => Some(v),
                Err(Error::ConstantTarget) => {
                    log::warn!("R² undefined: constant test target");
                    None
                }
                Err(e) => return Err(e),
            };
            Ok(EvalResult {
                accuracy: None,
                mae: Some(mae(y_true, y_pred)?),
                mse: Some(mse(y_true, y_pred)?),
                r2,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(
            accuracy(&[1., 0., 1., 1.], &[1., 0., 0., 1.]).unwrap(),
            0.75
        );
        assert_eq!(accuracy(&[2., 0., 1.], &[2., 0., 1.]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1., 0.], &[0., 1.]).unwrap(), 0.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn confusion_matches_accuracy() {
        let t = [1., 0., 1., 1., 0.];
        let p = [1., 1., 0., 1., 0.];
        let c = ConfusionCounts::from_labels(&t, &p).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 2,
                tn: 1,
                fp: 1,
                fn_: 1
            }
        );
        assert_eq!(c.total(), 5);
        assert_eq!(c.accuracy(), accuracy(&t, &p).unwrap());
    }

    #[test]
    fn error_metric_examples() {
        assert_abs_diff_eq!(
            mae(&[1., 2., 3.], &[2., 2., 2.]).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            mse(&[1., 2., 3.], &[2., 2., 2.]).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(mae(&[1., 5.], &[1., 5.]).unwrap(), 0.0);
        assert_eq!(mse(&[1., 5.], &[1., 5.]).unwrap(), 0.0);
        assert_eq!(mse(&[0.], &[3.]).unwrap(), 9.0);
        assert!(mae(&[], &[]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), 1.0);
        assert_eq!(r2(&[1., 2., 3.], &[2., 2., 2.]).unwrap(), 0.0);
        assert_eq!(r2(&[0., 1.], &[1., 0.]).unwrap(), -3.0);
        let err = r2(&[4., 4., 4.], &[4., 4., 4.]).unwrap_err();
        assert_eq!(err.to_string(), "undefined R² for constant target");
        assert!(r2(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn evaluate_by_task() {
        let c = evaluate(Task::Classification, &[0., 1.], &[0., 0.]).unwrap();
        assert_eq!(c.accuracy, Some(0.5));
        assert!(c.mae.is_none() && c.r2.is_none());
        let r = evaluate(Task::Regression, &[1., 1.], &[1., 2.]).unwrap();
        assert!(r.accuracy.is_none());
        assert_eq!(r.mae, Some(0.5));
        assert!(r.r2.is_none());
        assert_eq!(r.get("mse"), Some(0.5));
        assert_eq!(r.get("bogus"), None);
    }

    proptest! {
        #[test]
        fn jensen_mae_le_rmse(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = mae(&t, &p).unwrap();
            let s = mse(&t, &p).unwrap();
            prop_assert!(a * a <= s * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn equal_errors_give_mse_equal_mae_squared(t in prop::collection::vec(-1e3f64..1e3, 1..30), e in 0.0f64..10.0) {
            let p: Vec<f64> = t.iter().enumerate().map(|(i, v)| if i % 2 == 0 { v + e } else { v - e }).collect();
            let a = mae(&t, &p).unwrap();
            let s = mse(&t, &p).unwrap();
            prop_assert!((s - a * a).abs() <= 1e-9 * (1.0 + s));
        }

        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40), rot in 0usize..40) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let mut rotated = pairs.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let (t2, p2): (Vec<f64>, Vec<f64>) = rotated.into_iter().unzip();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs());
            prop_assert!(close(mae(&t, &p).unwrap(), mae(&t2, &p2).unwrap()));
            prop_assert!(close(mse(&t, &p).unwrap(), mse(&t2, &p2).unwrap()));
            prop_assert_eq!(accuracy(&t, &p).unwrap(), accuracy(&t2, &p2).unwrap());
            if let (Ok(a), Ok(b)) = (r2(&t, &p), r2(&t2, &p2)) {
                prop_assert!(close(a, b));
            }
        }
    }
}
