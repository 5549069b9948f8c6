//! One-hidden-layer perceptron trained with Adam.
//!
//! Architecture: `x -> ReLU(x W1 + b1) -> (· W2 + b2)`, followed by a
//! softmax with cross-entropy loss for classification (one output per
//! class) or the identity with loss `0.5 · mean((ŷ - y)²)` for regression.
//! Weights start uniform in `±1/sqrt(fan_in)`, biases at zero; each epoch
//! visits the rows in a fresh seeded permutation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::{argmax_rows, softmax_rows, TrainingInfo};
use crate::dataset::{Samples, Task};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// `None` means `min(200, n)`.
    pub batch_size: Option<usize>,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 100,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Gradients share the layout of the weights.
pub type MlpGradients = MlpWeights;

impl MlpWeights {
    pub fn init(inputs: usize, hidden: usize, outputs: usize, rng: &mut SeededRng) -> Self {
        let mut uniform = |fan_in: usize, shape: (usize, usize)| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_simple_fn(shape, || rng.uniform_range(-bound, bound))
        };
        let w1 = uniform(inputs, (inputs, hidden));
        let w2 = uniform(hidden, (hidden, outputs));
        Self {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(outputs),
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            w1: Array2::zeros(other.w1.raw_dim()),
            b1: Array1::zeros(other.b1.raw_dim()),
            w2: Array2::zeros(other.w2.raw_dim()),
            b2: Array1::zeros(other.b2.raw_dim()),
        }
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters in the order `w1, b1, w2, b2` (row-major).
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Hidden activations and raw outputs.
    fn forward(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let hidden = (x.dot(&self.w1) + &self.b1).mapv_into(|v| v.max(0.0));
        let out = hidden.dot(&self.w2) + &self.b2;
        (hidden, out)
    }

    /// Mean loss over the batch and its gradient.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        y: &[f64],
        task: Task,
    ) -> (f64, MlpGradients) {
        let m = x.nrows() as f64;
        let (hidden, out) = self.forward(x);
        let mut delta;
        let loss;
        match task {
            Task::Classification => {
                let mut total = 0.0;
                for (row, &label) in out.rows().into_iter().zip(y) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    total += lse - row[label as usize];
                }
                loss = total / m;
                delta = out;
                softmax_rows(&mut delta);
                for (i, &label) in y.iter().enumerate() {
                    delta[[i, label as usize]] -= 1.0;
                }
            }
            Task::Regression => {
                delta = out;
                for (i, &target) in y.iter().enumerate() {
                    delta[[i, 0]] -= target;
                }
                loss = 0.5 * delta.iter().map(|v| v * v).sum::<f64>() / m;
            }
        }
        delta /= m;
        let w2 = hidden.t().dot(&delta);
        let b2 = delta.sum_axis(Axis(0));
        let mut back = delta.dot(&self.w2.t());
        Zip::from(&mut back).and(&hidden).for_each(|g, &h| {
            if h <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = x.t().dot(&back);
        let b1 = back.sum_axis(Axis(0));
        (loss, MlpGradients { w1, b1, w2, b2 })
    }
}

struct Adam {
    first: MlpWeights,
    second: MlpWeights,
    step: i32,
}

impl Adam {
    fn new(like: &MlpWeights) -> Self {
        Self {
            first: MlpWeights::zeros_like(like),
            second: MlpWeights::zeros_like(like),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut MlpWeights, grads: &MlpGradients, p: &MlpParams) {
        self.step += 1;
        let c1 = 1.0 - p.beta1.powi(self.step);
        let c2 = 1.0 - p.beta2.powi(self.step);
        for (((w, g), m), v) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = p.beta1 * *m + (1.0 - p.beta1) * g;
            *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
            *w -= p.learning_rate * (*m / c1) / ((*v / c2).sqrt() + p.epsilon);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub weights: MlpWeights,
    pub task: Task,
    pub n_classes: usize,
    pub info: TrainingInfo,
}

impl Mlp {
    pub fn fit(params: &MlpParams, data: Samples, seed: u64) -> Result<Self> {
        let n = data.n_samples();
        let outputs = match data.task {
            Task::Classification => data.n_classes,
            Task::Regression => 1,
        };
        let mut rng = SeededRng::new(seed);
        let mut weights = MlpWeights::init(data.n_features(), params.hidden, outputs, &mut rng);
        let mut adam = Adam::new(&weights);
        let batch = params.batch_size.unwrap_or(200).min(n).max(1);
        let mut history = Vec::with_capacity(params.epochs);

        for epoch in 0..params.epochs {
            let order = rng.permutation(n);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let xb = data.x.select(Axis(0), chunk);
                let yb: Vec<f64> = chunk.iter().map(|&i| data.y[i]).collect();
                let (loss, grads) = weights.loss_and_gradients(xb.view(), &yb, data.task);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "MLP loss became {loss} in epoch {epoch}"
                    )));
                }
                epoch_loss += loss * chunk.len() as f64;
                adam.update(&mut weights, &grads, params);
            }
            history.push(epoch_loss / n as f64);
        }
        if !weights.is_finite() {
            return Err(Error::Diverged("MLP weights are not finite".into()));
        }
        Ok(Self {
            weights,
            task: data.task,
            n_classes: data.n_classes,
            info: TrainingInfo {
                iterations: params.epochs,
                final_loss: history.last().copied(),
                loss_history: history,
            },
        })
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (_, mut out) = self.weights.forward(x);
        softmax_rows(&mut out);
        out
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        match self.task {
            Task::Classification => argmax_rows(&self.predict_proba(x)),
            Task::Regression => self.weights.forward(x).1.column(0).to_vec(),
        }
    }
}
