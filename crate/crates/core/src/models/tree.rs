//! CART decision trees (Gini for classification, squared error for
//! regression), also used as the base learner of the random forest.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! values, so a tree depends only on the order of each feature's values and
//! is unchanged by any strictly increasing per-feature map (up to where a
//! test value falls relative to a midpoint).

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::argmax;
use crate::dataset::{Samples, Task};
use crate::error::Result;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// Every feature at every split.
    All,
    /// `ceil(sqrt(d))` for classification, `ceil(d / 3)` for regression.
    Auto,
    Sqrt,
    Third,
    #[serde(untagged)]
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize, task: Task) -> usize {
        let m = match self {
            MaxFeatures::All => d,
            MaxFeatures::Auto => match task {
                Task::Classification => (d as f64).sqrt().ceil() as usize,
                Task::Regression => d.div_ceil(3),
            },
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Third => d.div_ceil(3),
            MaxFeatures::Count(m) => m,
        };
        m.clamp(1, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        /// Majority class index or mean target.
        value: f64,
        /// Class frequencies at the leaf (classification only).
        distribution: Vec<f64>,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct DecisionTree {
    /// Node arena; index 0 is the root.
    pub nodes: Vec<Node>,
    pub task: Task,
    pub n_classes: usize,
    pub n_features: usize,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Per-node feature subsampling for forests.
pub(crate) struct FeatureSampler {
    pub per_split: usize,
    pub rng: SeededRng,
}

pub(crate) struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    task: Task,
    n_classes: usize,
    params: TreeParams,
    sampler: Option<FeatureSampler>,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(data: Samples<'a>, params: &TreeParams, sampler: Option<FeatureSampler>) -> Self {
        let sampler = sampler.filter(|s| s.per_split < data.n_features());
        Self {
            x: data.x,
            y: data.y,
            task: data.task,
            n_classes: data.n_classes,
            params: params.clone(),
            sampler,
            nodes: Vec::new(),
        }
    }

    /// Grows a tree on the rows listed in `rows` (repeats allowed).
    pub fn build(mut self, rows: Vec<usize>) -> DecisionTree {
        self.grow(rows, 0);
        DecisionTree {
            nodes: self.nodes,
            task: self.task,
            n_classes: self.n_classes,
            n_features: self.x.ncols(),
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(self.leaf(&rows));
        let depth_ok = self.params.max_depth.is_none_or(|max| depth < max);
        if rows.len() < self.params.min_samples_split || !depth_ok || self.is_pure(&rows) {
            return id;
        }
        let Some(best) = self.best_split(&rows) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[[i, best.feature]] <= best.threshold);
        drop(rows);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&i| self.y[i] == first)
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let n = rows.len();
        match self.task {
            Task::Classification => {
                let mut counts = vec![0.0; self.n_classes];
                for &i in rows {
                    counts[self.y[i] as usize] += 1.0;
                }
                let value = argmax(counts.iter().copied()) as f64;
                let distribution = counts.iter().map(|c| c / n as f64).collect();
                Node::Leaf {
                    value,
                    distribution,
                    n_samples: n,
                }
            }
            Task::Regression => Node::Leaf {
                value: rows.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64,
                distribution: Vec::new(),
                n_samples: n,
            },
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Candidate> {
        let d = self.x.ncols();
        let Some(sampler) = self.sampler.as_mut() else {
            return self.best_among(rows, 0..d);
        };
        let per_split = sampler.per_split;
        let order = sampler.rng.permutation(d);
        let mut first: Vec<usize> = order[..per_split].to_vec();
        first.sort_unstable();
        if let Some(best) = self.best_among(rows, first) {
            return Some(best);
        }
        // no usable split among the drawn features: keep drawing
        order[per_split..]
            .iter()
            .find_map(|&f| self.best_among(rows, [f]))
    }

    /// Best split over `features` (visited in the given order). Strict `>`
    /// keeps the earliest feature and lowest threshold among equal gains.
    fn best_among(
        &self,
        rows: &[usize],
        features: impl IntoIterator<Item = usize>,
    ) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for feature in features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| (self.x[[i, feature]], i)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let found = match self.task {
                Task::Classification => self.scan_gini(&sorted),
                Task::Regression => self.scan_squared_error(&sorted),
            };
            if let Some((gain, threshold)) = found {
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        gain,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn scan_gini(&self, sorted: &[(f64, usize)]) -> Option<(f64, f64)> {
        let n = sorted.len();
        let c = self.n_classes;
        let mut right = vec![0usize; c];
        for &(_, i) in sorted {
            right[self.y[i] as usize] += 1;
        }
        let parent = gini(&right, n);
        let mut left = vec![0usize; c];
        let mut best: Option<(f64, f64)> = None;
        for pos in 0..n - 1 {
            let label = self.y[sorted[pos].1] as usize;
            left[label] += 1;
            right[label] -= 1;
            let (a, b) = (sorted[pos].0, sorted[pos + 1].0);
            if a == b {
                continue;
            }
            let nl = pos + 1;
            let nr = n - nl;
            let weighted = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            let gain = parent - weighted;
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, midpoint(a, b)));
            }
        }
        best
    }

    fn scan_squared_error(&self, sorted: &[(f64, usize)]) -> Option<(f64, f64)> {
        let n = sorted.len();
        let shift = sorted.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / n as f64;
        let (mut total, mut total_sq) = (0.0, 0.0);
        for &(_, i) in sorted {
            let v = self.y[i] - shift;
            total += v;
            total_sq += v * v;
        }
        let parent = sse(total, total_sq, n);
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        let mut best: Option<(f64, f64)> = None;
        for pos in 0..n - 1 {
            let v = self.y[sorted[pos].1] - shift;
            sum_l += v;
            sq_l += v * v;
            let (a, b) = (sorted[pos].0, sorted[pos + 1].0);
            if a == b {
                continue;
            }
            let nl = pos + 1;
            let nr = n - nl;
            let children = sse(sum_l, sq_l, nl) + sse(total - sum_l, total_sq - sq_l, nr);
            let gain = (parent - children) / n as f64;
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, midpoint(a, b)));
            }
        }
        best
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    sum_sq - sum * sum / n as f64
}

/// Midpoint of `a < b`, kept strictly below `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

impl DecisionTree {
    pub fn fit(params: &TreeParams, data: Samples) -> Result<Self> {
        let rows: Vec<usize> = (0..data.n_samples()).collect();
        Ok(TreeBuilder::new(data, params, None).build(rows))
    }

    pub(crate) fn leaf_for(&self, row: ArrayView1<f64>) -> &Node {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                leaf => return leaf,
            }
        }
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        match self.leaf_for(row) {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (r, row) in x.rows().into_iter().enumerate() {
            if let Node::Leaf { distribution, .. } = self.leaf_for(row) {
                for (c, p) in distribution.iter().enumerate() {
                    out[[r, c]] = *p;
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}
