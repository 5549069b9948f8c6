use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::majority;
use crate::dataset::{Samples, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Euclidean k-nearest neighbors. Stores the training set verbatim.
#[derive(Debug, Clone)]
pub struct Knn {
    pub k: usize,
    pub task: Task,
    pub n_classes: usize,
    pub x: Array2<f64>,
    pub y: Vec<f64>,
}

impl Knn {
    pub fn fit(params: &KnnParams, data: Samples) -> Result<Self> {
        if params.k < 1 || params.k > data.n_samples() {
            return Err(Error::InvalidHyperparameter(format!(
                "k = {} must be in 1..={}",
                params.k,
                data.n_samples()
            )));
        }
        Ok(Self {
            k: params.k,
            task: data.task,
            n_classes: data.n_classes,
            x: data.x.to_owned(),
            y: data.y.to_vec(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Training rows of the `k` nearest neighbors, nearest first; equal
    /// distances are ordered by training-row index.
    pub fn neighbors(&self, query: ArrayView1<f64>) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row
                    .iter()
                    .zip(query.iter())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                (d, i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.truncate(self.k);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|q| {
                let nn = self.neighbors(q);
                match self.task {
                    Task::Classification => {
                        majority(nn.iter().map(|&i| self.y[i]), self.n_classes) as f64
                    }
                    Task::Regression => {
                        nn.iter().map(|&i| self.y[i]).sum::<f64>() / nn.len() as f64
                    }
                }
            })
            .collect()
    }

    /// Neighbor vote fractions.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (r, q) in x.rows().into_iter().enumerate() {
            for i in self.neighbors(q) {
                out[[r, self.y[i] as usize]] += 1.0 / self.k as f64;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, ModelKind, ModelSpec, TrainedModel};
    use ndarray::array;

    fn knn(k: usize, x: Array2<f64>, y: &[f64], task: Task) -> TrainedModel {
        let n_classes = if task == Task::Classification { 2 } else { 0 };
        let spec = ModelSpec::new(ModelKind::Knn, task, 0)
            .with_params(crate::models::Hyperparams::Knn(KnnParams { k }));
        train(&spec, Samples::new(x.view(), y, task, n_classes)).unwrap()
    }

    #[test]
    fn nearest_point_wins() {
        let m = knn(1, array![[0.0], [10.0]], &[0.0, 1.0], Task::Classification);
        assert_eq!(m.predict(array![[1.0]].view()).unwrap(), vec![0.0]);
    }

    #[test]
    fn majority_of_three() {
        let m = knn(
            3,
            array![[0.0], [1.0], [10.0]],
            &[0.0, 0.0, 1.0],
            Task::Classification,
        );
        assert_eq!(m.predict(array![[0.5]].view()).unwrap(), vec![0.0]);
    }

    #[test]
    fn regression_averages() {
        let m = knn(2, array![[0.0], [10.0]], &[0.0, 10.0], Task::Regression);
        assert_eq!(m.predict(array![[5.0]].view()).unwrap(), vec![5.0]);
    }

    #[test]
    fn training_point_returns_own_label() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]];
        let y = [1.0, 0.0, 1.0];
        let m = knn(1, x.clone(), &y, Task::Classification);
        assert_eq!(m.predict(x.view()).unwrap(), y.to_vec());
    }

    #[test]
    fn equidistant_neighbors_prefer_lower_row() {
        // both rows are at distance 1 from the query
        let m = knn(1, array![[-1.0], [1.0]], &[1.0, 0.0], Task::Classification);
        assert_eq!(m.predict(array![[0.0]].view()).unwrap(), vec![1.0]);
    }

    #[test]
    fn rejects_bad_k() {
        let x = array![[0.0], [1.0]];
        let y = [0.0, 1.0];
        let s = Samples::new(x.view(), &y, Task::Classification, 2);
        assert!(Knn::fit(&KnnParams { k: 3 }, s).is_err());
        assert!(Knn::fit(&KnnParams { k: 0 }, s).is_err());
    }

    #[test]
    fn probabilities_are_vote_fractions() {
        let m = knn(
            3,
            array![[0.0], [1.0], [10.0]],
            &[0.0, 0.0, 1.0],
            Task::Classification,
        );
        let p = m.predict_proba(array![[0.5]].view()).unwrap();
        assert!((p[[0, 0]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.row(0).sum() - 1.0).abs() < 1e-12);
    }
}
