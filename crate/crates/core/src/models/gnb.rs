use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::softmax_rows;
use crate::dataset::Samples;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianNbParams {
    /// Fraction of the largest feature variance added to every variance.
    pub var_smoothing: f64,
}

impl Default for GaussianNbParams {
    fn default() -> Self {
        Self {
            var_smoothing: 1e-9,
        }
    }
}

/// Gaussian naive Bayes with class priors from training frequencies.
#[derive(Debug, Clone)]
pub struct GaussianNb {
    /// Per-class feature means (n_classes × d).
    pub means: Array2<f64>,
    /// Per-class feature variances including the smoothing floor.
    pub variances: Array2<f64>,
    pub priors: Array1<f64>,
    pub epsilon: f64,
}

impl GaussianNb {
    pub fn fit(params: &GaussianNbParams, data: Samples) -> Result<Self> {
        let (n, d) = data.x.dim();
        let c = data.n_classes;
        let max_var = data
            .x
            .var_axis(Axis(0), 0.0)
            .iter()
            .copied()
            .fold(0.0, f64::max);
        // all-constant features: fall back to an absolute floor
        let epsilon = if max_var > 0.0 {
            params.var_smoothing * max_var
        } else {
            params.var_smoothing.max(f64::MIN_POSITIVE)
        };

        let mut means = Array2::zeros((c, d));
        let mut variances = Array2::from_elem((c, d), 1.0);
        let mut priors = Array1::zeros(c);
        for class in 0..c {
            let rows: Vec<usize> = (0..n).filter(|&i| data.y[i] as usize == class).collect();
            if rows.is_empty() {
                continue;
            }
            let sub = data.x.select(Axis(0), &rows);
            let mean = sub.mean_axis(Axis(0)).expect("non-empty");
            let var = sub.var_axis(Axis(0), 0.0);
            means.row_mut(class).assign(&mean);
            variances.row_mut(class).assign(&(var + epsilon));
            priors[class] = rows.len() as f64 / n as f64;
        }
        Ok(Self {
            means,
            variances,
            priors,
            epsilon,
        })
    }

    /// Unnormalized log posterior per class (m × n_classes).
    pub fn joint_log_likelihood(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let c = self.priors.len();
        let mut out = Array2::zeros((x.nrows(), c));
        for (r, row) in x.rows().into_iter().enumerate() {
            for class in 0..c {
                if self.priors[class] == 0.0 {
                    out[[r, class]] = f64::NEG_INFINITY;
                    continue;
                }
                let mut ll = self.priors[class].ln();
                for (j, &v) in row.iter().enumerate() {
                    let var = self.variances[[class, j]];
                    let diff = v - self.means[[class, j]];
                    ll -= 0.5 * ((2.0 * PI * var).ln() + diff * diff / var);
                }
                out[[r, class]] = ll;
            }
        }
        out
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut jll = self.joint_log_likelihood(x);
        softmax_rows(&mut jll);
        jll
    }
}
