use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{standardize_fit, LearnerError, Matrix, MlpConfig, StandardizationParams};
use crate::record::Class;
use crate::rng::seeded;

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: alloc::vec![0.0; inputs * outputs],
            bias: alloc::vec![0.0; outputs],
        }
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

/// Sigmoid hidden layers and a single sigmoid output giving P(abnormal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    scaling: StandardizationParams,
    layers: Vec<Dense>,
}

/// Gradient of the mean cross-entropy, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub layers: Vec<Dense>,
}

impl MlpGradient {
    pub fn norm(&self) -> f64 {
        libm::sqrt(
            self.layers
                .iter()
                .flat_map(|l| l.params())
                .map(|g| g * g)
                .sum(),
        )
    }
}

fn target(y: Class) -> f64 {
    match y {
        Class::Normal => 0.0,
        Class::Abnormal => 1.0,
    }
}

/// Activations of every layer for one standardized input; the last entry
/// holds the output pre-activation (logit) rather than its sigmoid.
fn forward_all(layers: &[Dense], input: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input.to_vec());
    for (i, layer) in layers.iter().enumerate() {
        let z = layer.forward(acts.last().expect("input pushed"));
        if i + 1 == layers.len() {
            acts.push(z);
        } else {
            acts.push(z.into_iter().map(sigmoid).collect());
        }
    }
    acts
}

fn logit(layers: &[Dense], input: &[f64]) -> f64 {
    forward_all(layers, input)
        .pop()
        .expect("at least one layer")[0]
}

/// Accumulates the mean gradient over `(standardized row, target)` pairs.
fn backprop<'a>(layers: &[Dense], batch: impl Iterator<Item = (&'a [f64], f64)>) -> Vec<Dense> {
    let mut grads: Vec<Dense> = layers
        .iter()
        .map(|l| Dense::zeros(l.inputs, l.outputs))
        .collect();
    let mut n = 0usize;
    for (row, t) in batch {
        n += 1;
        let acts = forward_all(layers, row);
        // sigmoid + cross-entropy: dL/dlogit = p - t
        let mut delta = alloc::vec![sigmoid(acts[layers.len()][0]) - t];
        for li in (0..layers.len()).rev() {
            let input = &acts[li];
            let g = &mut grads[li];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                for (gw, x) in g.weights[o * g.inputs..(o + 1) * g.inputs]
                    .iter_mut()
                    .zip(input)
                {
                    *gw += d * x;
                }
            }
            if li > 0 {
                let layer = &layers[li];
                delta = (0..layer.inputs)
                    .map(|j| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(o, d)| d * layer.weights[o * layer.inputs + j])
                            .sum();
                        let a = input[j];
                        back * a * (1.0 - a)
                    })
                    .collect();
            }
        }
    }
    let scale = 1.0 / n.max(1) as f64;
    for g in &mut grads {
        g.params_mut().for_each(|v| *v *= scale);
    }
    grads
}

impl MlpModel {
    pub(super) fn fit(cfg: &MlpConfig, x: &Matrix, y: &[Class]) -> Result<Self, LearnerError> {
        let scaling = standardize_fit(x)?;
        let z = scaling.apply_matrix(x);
        let targets: Vec<f64> = y.iter().map(|&c| target(c)).collect();

        let mut rng = seeded(cfg.seed);
        let mut sizes = alloc::vec![x.cols()];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let mut layers: Vec<Dense> = sizes
            .windows(2)
            .map(|w| {
                let mut layer = Dense::zeros(w[0], w[1]);
                layer
                    .params_mut()
                    .for_each(|p| *p = rng.random_range(-cfg.init_scale..=cfg.init_scale));
                layer
            })
            .collect();

        let mut order: Vec<usize> = (0..z.rows()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let grads = backprop(&layers, batch.iter().map(|&i| (z.row(i), targets[i])));
                for (layer, g) in layers.iter_mut().zip(&grads) {
                    for (p, d) in layer.params_mut().zip(g.params()) {
                        *p -= cfg.learning_rate * d;
                    }
                }
            }
        }
        if layers
            .iter()
            .flat_map(|l| l.params())
            .any(|p| !p.is_finite())
        {
            return Err(LearnerError::NonFinite);
        }
        Ok(MlpModel { scaling, layers })
    }

    /// Model with explicit layers and no input scaling.
    pub fn from_layers(layers: Vec<Dense>) -> Self {
        let n = layers.first().map_or(0, |l| l.inputs);
        MlpModel {
            scaling: StandardizationParams {
                mean: alloc::vec![0.0; n],
                std: alloc::vec![1.0; n],
            },
            layers,
        }
    }

    pub fn n_features(&self) -> usize {
        self.scaling.mean.len()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(logit(&self.layers, &self.scaling.apply(row)))
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        if self.probability(row) >= 0.5 {
            Class::Abnormal
        } else {
            Class::Normal
        }
    }
}

/// Mean binary cross-entropy of the model on `(x, y)`.
pub fn mlp_loss(model: &MlpModel, x: &Matrix, y: &[Class]) -> f64 {
    let total: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, &c)| {
            let z = logit(&model.layers, &model.scaling.apply(row));
            softplus(z) - target(c) * z
        })
        .sum();
    total / x.rows() as f64
}

/// Exact gradient of [`mlp_loss`] with respect to every weight and bias.
pub fn mlp_gradient(model: &MlpModel, x: &Matrix, y: &[Class]) -> MlpGradient {
    let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| model.scaling.apply(r)).collect();
    MlpGradient {
        layers: backprop(
            &model.layers,
            rows.iter()
                .map(|r| r.as_slice())
                .zip(y.iter().map(|&c| target(c))),
        ),
    }
}
