use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView2, Axis};

use crate::dataset::Samples;
use crate::error::{Error, Result};

/// Ordinary least squares with intercept.
///
/// Features and target are centered, then the centered system is solved
/// through an SVD pseudoinverse. Singular values below
/// `max(n, d) · ε · σ_max` are discarded, which yields the minimum-norm
/// solution for rank-deficient designs.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub rank: usize,
}

impl LinearRegression {
    pub fn fit(data: Samples) -> Result<Self> {
        let (n, d) = data.x.dim();
        let x_mean = data
            .x
            .mean_axis(Axis(0))
            .ok_or_else(|| Error::InvalidInput("empty design matrix".into()))?;
        let y_mean = data.y.iter().sum::<f64>() / n as f64;

        let a = DMatrix::from_fn(n, d, |i, j| data.x[[i, j]] - x_mean[j]);
        let b = DVector::from_iterator(n, data.y.iter().map(|v| v - y_mean));

        let svd = a.svd(true, true);
        let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let tol = n.max(d) as f64 * f64::EPSILON * sigma_max;
        let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
        let coefficients: Vec<f64> = if sigma_max == 0.0 {
            vec![0.0; d]
        } else {
            svd.solve(&b, tol)
                .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))?
                .iter()
                .copied()
                .collect()
        };
        let intercept = y_mean
            - coefficients
                .iter()
                .zip(x_mean.iter())
                .map(|(w, m)| w * m)
                .sum::<f64>();
        Ok(Self {
            coefficients,
            intercept,
            rank,
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                self.intercept
                    + row
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(v, w)| v * w)
                        .sum::<f64>()
            })
            .collect()
    }
}
