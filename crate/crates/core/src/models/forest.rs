use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::majority;
use super::tree::{DecisionTree, FeatureSampler, MaxFeatures, TreeBuilder, TreeParams};
use crate::dataset::{Samples, Task};
use crate::error::Result;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Auto,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

/// Bagged CART ensemble. Tree `t` draws its bootstrap sample and feature
/// subsets from a generator seeded with the `t`-th output of the forest's
/// seeded generator, so trees can be grown in parallel deterministically.
#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub task: Task,
    pub n_classes: usize,
    pub n_features: usize,
}

impl RandomForest {
    pub fn fit(params: &RandomForestParams, data: Samples, seed: u64) -> Result<Self> {
        let n = data.n_samples();
        let d = data.n_features();
        let per_split = params.max_features.resolve(d, data.task);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
        };
        let mut master = SeededRng::new(seed);
        let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();

        let trees = tree_seeds
            .into_par_iter()
            .map(|tree_seed| {
                let mut rng = SeededRng::new(tree_seed);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.index(n)).collect()
                } else {
                    (0..n).collect()
                };
                let sampler = FeatureSampler { per_split, rng };
                TreeBuilder::new(data, &tree_params, Some(sampler)).build(rows)
            })
            .collect();

        Ok(Self {
            trees,
            task: data.task,
            n_classes: data.n_classes,
            n_features: d,
        })
    }

    /// Majority vote (ties to the lowest class) or mean of tree outputs.
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let votes = self.trees.iter().map(|t| t.predict_row(row));
                match self.task {
                    Task::Classification => majority(votes, self.n_classes) as f64,
                    Task::Regression => votes.sum::<f64>() / self.trees.len() as f64,
                }
            })
            .collect()
    }

    /// Vote fractions.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        let share = 1.0 / self.trees.len() as f64;
        for (r, row) in x.rows().into_iter().enumerate() {
            for tree in &self.trees {
                out[[r, tree.predict_row(row) as usize]] += share;
            }
        }
        out
    }
}
