// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::network::{sigmoid, Architecture, Head, Layer, Network};
use super::preprocess::Preprocess;
use crate::error::{CpdError, Result};
use crate::rng::{child_seed, tagged_seed};
use crate::simgen::{LabelSpace, LabeledDataset};

/// `lr / (1 + rate · step / steps)`, `step` counting optimiser updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseTimeDecay {
    pub decay_steps: f64,
    pub decay_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default)]
    pub decay: Option<InverseTimeDecay>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            decay: None,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CpdError::param("epochs and batch size must be positive"));
        }
        if !pos(self.learning_rate) || !pos(self.epsilon) {
            return Err(CpdError::param("learning rate and epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CpdError::param("Adam moment decays must lie in [0, 1)"));
        }
        if let Some(d) = self.decay {
            if !pos(d.decay_steps) || !(d.decay_rate >= 0.0 && d.decay_rate.is_finite()) {
                return Err(CpdError::param("invalid inverse time decay"));
            }
        }
        Ok(())
    }

    fn rate_at(&self, step: usize) -> f64 {
        match self.decay {
            None => self.learning_rate,
            Some(d) => self.learning_rate / (1.0 + d.decay_rate * step as f64 / d.decay_steps),
        }
    }
}

/// Same shapes as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(net: &Network) -> Self {
        Gradient { layers: net.layers().iter().map(|l| Layer::zeros(l.rows(), l.cols())).collect() }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.params())
    }
}

fn target_index(head: Head, label: usize, outputs: usize) -> Result<usize> {
    match head {
        Head::Threshold { .. } if label <= 1 => Ok(label),
        Head::Softmax if (1..=outputs).contains(&label) => Ok(label - 1),
        _ => Err(CpdError::Training(format!("label {label} does not fit a network with {outputs} output(s)"))),
    }
}

/// Mean cross-entropy over the columns of `inputs` and its exact gradient.
/// The threshold head uses `σ(s − λ)` as the change probability.
pub fn loss_and_gradient(net: &Network, inputs: &DMatrix<f64>, labels: &[usize]) -> Result<(f64, Gradient)> {
    let b = inputs.ncols();
    if b == 0 {
        return Err(CpdError::Training("empty batch".into()));
    }
    if labels.len() != b {
        return Err(CpdError::ShapeMismatch { expected: b, got: labels.len() });
    }
    if inputs.nrows() != net.architecture().input_dim {
        return Err(CpdError::ShapeMismatch { expected: net.architecture().input_dim, got: inputs.nrows() });
    }
    let layers = net.layers();
    let last = layers.len() - 1;

    // forward, keeping each layer's input
    let mut acts: Vec<DMatrix<f64>> = Vec::with_capacity(layers.len() + 1);
    acts.push(inputs.clone());
    for (l, layer) in layers.iter().enumerate() {
        let mut z = &layer.weights * &acts[l];
        for mut col in z.column_iter_mut() {
            col -= &layer.bias;
        }
        if l < last {
            z.apply(|v| *v = v.max(0.0));
        }
        acts.push(z);
    }
    let scores = &acts[last + 1];
    let k = scores.nrows();
    let inv_b = 1.0 / b as f64;

    let mut loss = 0.0;
    let mut delta = DMatrix::zeros(k, b);
    for j in 0..b {
        let t = target_index(net.head(), labels[j], k)?;
        match net.head() {
            Head::Threshold { lambda } => {
                let z = scores[(0, j)] - lambda;
                let y = t as f64;
                loss += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
                delta[(0, j)] = (sigmoid(z) - y) * inv_b;
            }
            Head::Softmax => {
                let col = scores.column(j);
                let m = col.max();
                let sum: f64 = col.iter().map(|s| (s - m).exp()).sum();
                let lse = m + sum.ln();
                loss += lse - col[t];
                for i in 0..k {
                    let p = (col[i] - lse).exp();
                    delta[(i, j)] = (p - if i == t { 1.0 } else { 0.0 }) * inv_b;
                }
            }
        }
    }
    loss *= inv_b;
    if !loss.is_finite() {
        return Err(CpdError::Training(format!("non-finite loss {loss} on a batch of {b}")));
    }

    let mut grad = Gradient::zeros_like(net);
    for l in (0..=last).rev() {
        let g = &mut grad.layers[l];
        g.weights = &delta * acts[l].transpose();
        g.bias = -delta.column_sum();
        if l > 0 {
            let mut prev = layers[l].weights.transpose() * &delta;
            // ReLU derivative, taken as 0 at the kink
            prev.zip_apply(&acts[l], |d, a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            delta = prev;
        }
    }
    Ok((loss, grad))
}

/// Preprocessed inputs as columns, and labels.
pub fn design_matrix(net: &Network, data: &LabeledDataset) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let inputs = net.input_matrix(data.series())?;
    Ok((inputs, data.label_vec()))
}

fn check_labels(net: &Network, data: &LabeledDataset) -> Result<()> {
    let outputs = net.architecture().output_dim;
    match (data.labels, net.head()) {
        (LabelSpace::Binary, Head::Threshold { .. }) => Ok(()),
        (LabelSpace::Multiclass { classes }, Head::Softmax) if classes == outputs => Ok(()),
        (labels, _) => Err(CpdError::param(format!(
            "dataset labels {labels:?} do not match a network with {outputs} output(s)"
        ))),
    }
}

/// Per-epoch mean training loss alongside the final network.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub epoch_losses: Vec<f64>,
}

/// Trains a freshly initialised network.
pub fn train(data: &LabeledDataset, arch: &Architecture, preprocess: &Preprocess, cfg: &TrainConfig) -> Result<Network> {
    Ok(train_logged(data, arch, preprocess, cfg)?.network)
}

pub fn train_logged(
    data: &LabeledDataset,
    arch: &Architecture,
    preprocess: &Preprocess,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let expected = preprocess.output_dim(data.n);
    if arch.input_dim != expected {
        return Err(CpdError::ShapeMismatch { expected, got: arch.input_dim });
    }
    let init = Network::init(arch.clone(), preprocess.clone(), tagged_seed(cfg.seed, "init"))?;
    train_from(data, init, cfg)
}

/// Continues training from `init` (Adam state starts fresh).
pub fn train_from(data: &LabeledDataset, init: Network, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(CpdError::param("training set is empty"));
    }
    check_labels(&init, data)?;
    let (inputs, labels) = design_matrix(&init, data)?;
    let mut net = init;
    let n_examples = inputs.ncols();
    let d = inputs.nrows();

    let mut m = Gradient::zeros_like(&net);
    let mut v = Gradient::zeros_like(&net);
    let shuffle_base = tagged_seed(cfg.seed, "shuffle");
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n_examples).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        crate::simgen::shuffle_in_place(&mut order, child_seed(shuffle_base, epoch as u64));
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch = DMatrix::zeros(d, chunk.len());
            let mut batch_labels = Vec::with_capacity(chunk.len());
            for (j, &i) in chunk.iter().enumerate() {
                batch.set_column(j, &inputs.column(i));
                batch_labels.push(labels[i]);
            }
            let (loss, grad) = loss_and_gradient(&net, &batch, &batch_labels)
                .map_err(|e| CpdError::Training(format!("epoch {epoch}, batch {bi}: {e}")))?;
            total += loss * chunk.len() as f64;

            step += 1;
            let lr = cfg.rate_at(step - 1);
            let c1 = 1.0 - cfg.beta1.powi(step as i32);
            let c2 = 1.0 - cfg.beta2.powi(step as i32);
            for ((layer, g), (ml, vl)) in
                net.layers_mut().iter_mut().zip(&grad.layers).zip(m.layers.iter_mut().zip(v.layers.iter_mut()))
            {
                for (((p, g), mi), vi) in layer.params_mut().zip(g.params()).zip(ml.params_mut()).zip(vl.params_mut())
                {
                    *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
                    *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
                    *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + cfg.epsilon);
                }
            }
        }
        if !net.params_finite() {
            return Err(CpdError::Training(format!("parameters diverged during epoch {epoch}")));
        }
        epoch_losses.push(total / n_examples as f64);
    }
    Ok(TrainOutcome { network: net, epoch_losses })
}
