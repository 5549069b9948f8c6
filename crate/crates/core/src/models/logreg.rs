use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{softmax_rows, TrainingInfo};
use crate::dataset::Samples;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once the loss changes by less than this between iterations.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

/// Logistic regression fitted by full-batch gradient descent from zero
/// weights, without regularization.
///
/// Two classes use a single sigmoid output (stored as column 0 of
/// `weights`, scoring class 1); more classes use a multinomial softmax with
/// one column per class.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub n_classes: usize,
    pub info: TrainingInfo,
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    fn binary(&self) -> bool {
        self.n_classes <= 2
    }

    fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }

    /// Mean cross-entropy and its gradients with respect to weights and bias.
    fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &[f64]) -> (f64, Array2<f64>, Array1<f64>) {
        let n = x.nrows() as f64;
        let z = self.scores(x);
        let mut residual;
        let loss;
        if self.binary() {
            let mut total = 0.0;
            residual = Array2::zeros((x.nrows(), 1));
            for (i, &label) in y.iter().enumerate() {
                let zi = z[[i, 0]];
                total += softplus(zi) - label * zi;
                residual[[i, 0]] = sigmoid(zi) - label;
            }
            loss = total / n;
        } else {
            let mut total = 0.0;
            for (row, &label) in z.rows().into_iter().zip(y) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - row[label as usize];
            }
            loss = total / n;
            residual = z;
            softmax_rows(&mut residual);
            for (i, &label) in y.iter().enumerate() {
                residual[[i, label as usize]] -= 1.0;
            }
        }
        let grad_w = x.t().dot(&residual) / n;
        let grad_b = residual.sum_axis(Axis(0)) / n;
        (loss, grad_w, grad_b)
    }

    pub fn fit(params: &LogisticParams, data: Samples) -> Result<Self> {
        let d = data.n_features();
        let n_classes = data.n_classes.max(2);
        let outputs = if n_classes == 2 { 1 } else { n_classes };
        let mut model = Self {
            weights: Array2::zeros((d, outputs)),
            bias: Array1::zeros(outputs),
            n_classes,
            info: TrainingInfo::default(),
        };
        let mut previous = f64::INFINITY;
        for iter in 0..params.max_iter {
            let (loss, grad_w, grad_b) = model.loss_and_gradient(data.x, data.y);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "logistic regression loss became {loss} at iteration {iter}"
                )));
            }
            model.info.iterations = iter + 1;
            model.info.final_loss = Some(loss);
            if (previous - loss).abs() < params.tol {
                break;
            }
            previous = loss;
            model.weights.scaled_add(-params.learning_rate, &grad_w);
            model.bias.scaled_add(-params.learning_rate, &grad_b);
        }
        if model
            .weights
            .iter()
            .chain(model.bias.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Diverged(
                "logistic regression weights are not finite".into(),
            ));
        }
        Ok(model)
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = self.scores(x);
        if self.binary() {
            let mut p = Array2::zeros((x.nrows(), 2));
            for i in 0..x.nrows() {
                let p1 = sigmoid(z[[i, 0]]);
                p[[i, 0]] = 1.0 - p1;
                p[[i, 1]] = p1;
            }
            p
        } else {
            softmax_rows(&mut z);
            z
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Task;
    use crate::metrics::accuracy;
    use crate::models::argmax_rows;
    use ndarray::{array, Array2};

    fn fit(x: &Array2<f64>, y: &[f64], classes: usize) -> LogisticRegression {
        LogisticRegression::fit(
            &LogisticParams::default(),
            Samples::new(x.view(), y, Task::Classification, classes),
        )
        .unwrap()
    }

    #[test]
    fn separable_one_dimensional() {
        let x = array![[-1.0], [1.0]];
        let y = [0.0, 1.0];
        let m = fit(&x, &y, 2);
        let pred = argmax_rows(&m.predict_proba(x.view()));
        assert_eq!(accuracy(&y, &pred).unwrap(), 1.0);
        let p = m.predict_proba(x.view());
        assert!(p[[1, 1]] > 0.5 && p[[0, 1]] < 0.5);
    }

    #[test]
    fn boundary_probability_is_half() {
        let x = array![[-2.0], [-1.0], [0.5], [1.5], [3.0], [-0.2]];
        let y = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let m = fit(&x, &y, 2);
        let boundary = -m.bias[0] / m.weights[[0, 0]];
        let p = m.predict_proba(array![[boundary]].view());
        assert!((p[[0, 1]] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn uninformative_features_give_half() {
        let x = Array2::from_elem((6, 3), 2.5);
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let m = fit(&x, &y, 2);
        let p = m.predict_proba(array![[2.5, 2.5, 2.5], [9.0, -1.0, 0.0]].view());
        for row in p.rows() {
            assert!((row[1] - 0.5).abs() < 1e-6, "{row}");
        }
    }

    #[test]
    fn multiclass_softmax() {
        let x = array![
            [0.0, 0.0],
            [0.1, 0.2],
            [3.0, 0.0],
            [3.1, 0.2],
            [0.0, 3.0],
            [0.2, 3.1]
        ];
        let y = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let m = fit(&x, &y, 3);
        assert_eq!(m.weights.ncols(), 3);
        let p = m.predict_proba(x.view());
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert_eq!(argmax_rows(&p), y.to_vec());
        assert!(m.info.final_loss.unwrap() < 1.0);
    }

    #[test]
    fn stops_on_tolerance() {
        let x = array![[-1.0], [1.0]];
        let m = LogisticRegression::fit(
            &LogisticParams {
                tol: 1e-2,
                ..LogisticParams::default()
            },
            Samples::new(x.view(), &[0.0, 1.0], Task::Classification, 2),
        )
        .unwrap();
        assert!(m.info.iterations < 1000);
    }

    #[test]
    fn huge_unscaled_features_stay_finite() {
        let x = array![[1e6], [2e6], [3e6], [4e6]];
        let y = [0.0, 1.0, 0.0, 1.0];
        let m = fit(&x, &y, 2);
        assert!(m.info.final_loss.unwrap().is_finite());
    }

    #[test]
    fn reports_divergence() {
        let x = array![[f64::MAX], [-f64::MAX]];
        let err = LogisticRegression::fit(
            &LogisticParams {
                learning_rate: 1e300,
                ..LogisticParams::default()
            },
            Samples::new(x.view(), &[0.0, 1.0], Task::Classification, 2),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged(_)));
    }
}
