// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::Preprocess;
use crate::error::{CpdError, Result};
use crate::rng::rng_from_seed;
use crate::series::Series;

pub const NETWORK_FORMAT: &str = "cpdnet-network";
pub const NETWORK_SCHEMA_VERSION: u32 = 1;

/// Layer widths `m₀ = n, m₁..m_L, m_{L+1} = outputs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub output_dim: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, widths: &[usize], output_dim: usize) -> Result<Self> {
        let arch = Architecture { input_dim, widths: widths.to_vec(), output_dim };
        arch.validate()?;
        Ok(arch)
    }

    /// `L` hidden layers of equal width.
    pub fn uniform(input_dim: usize, depth: usize, width: usize, output_dim: usize) -> Result<Self> {
        Architecture::new(input_dim, &vec![width; depth], output_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(CpdError::param("input and output dimensions must be positive"));
        }
        if self.widths.is_empty() {
            return Err(CpdError::param("a network needs at least one hidden layer"));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(CpdError::param(format!("hidden widths must be positive, got {:?}", self.widths)));
        }
        if self.output_dim == 2 {
            return Err(CpdError::param("use output_dim 1 for binary problems"));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// `[m₀, m₁, …, m_{L+1}]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.widths.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.widths);
        d.push(self.output_dim);
        d
    }

    pub fn num_params(&self) -> usize {
        self.dims().windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

/// `z = W a − b`; hidden layers then apply `max(z, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer { weights: DMatrix::zeros(rows, cols), bias: DVector::zeros(rows) }
    }

    pub fn rows(&self) -> usize {
        self.weights.nrows()
    }

    pub fn cols(&self) -> usize {
        self.weights.ncols()
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// How output scores become a label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// One score `s`; label `1{s > λ}`, probability `σ(s − λ)`.
    Threshold { lambda: f64 },
    /// `K` scores; label `1 + argmax` (first index on ties), softmax probabilities.
    Softmax,
}

/// Result of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub scores: Vec<f64>,
    /// `0/1` for a threshold head, `1..=K` for softmax.
    pub label: usize,
    /// `[P(change)]` for a threshold head, class probabilities for softmax.
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct Network {
    arch: Architecture,
    preprocess: Preprocess,
    layers: Vec<Layer>,
    head: Head,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl Network {
    pub fn new(arch: Architecture, preprocess: Preprocess, layers: Vec<Layer>, head: Head) -> Result<Self> {
        arch.validate()?;
        preprocess.validate()?;
        let dims = arch.dims();
        if layers.len() != dims.len() - 1 {
            return Err(CpdError::ShapeMismatch { expected: dims.len() - 1, got: layers.len() });
        }
        for (layer, w) in layers.iter().zip(dims.windows(2)) {
            if layer.cols() != w[0] {
                return Err(CpdError::ShapeMismatch { expected: w[0], got: layer.cols() });
            }
            if layer.rows() != w[1] || layer.bias.len() != w[1] {
                return Err(CpdError::ShapeMismatch { expected: w[1], got: layer.rows().min(layer.bias.len()) });
            }
            if layer.params().any(|v| !v.is_finite()) {
                return Err(CpdError::param("network parameters must be finite"));
            }
        }
        match head {
            Head::Threshold { lambda } => {
                if arch.output_dim != 1 {
                    return Err(CpdError::param("a threshold head needs output_dim 1"));
                }
                if !lambda.is_finite() {
                    return Err(CpdError::InvalidThreshold(format!("output threshold must be finite, got {lambda}")));
                }
            }
            Head::Softmax => {
                if arch.output_dim < 3 {
                    return Err(CpdError::param("a softmax head needs at least 3 outputs"));
                }
            }
        }
        Ok(Network { arch, preprocess, layers, head })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Architecture, preprocess: Preprocess, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng_from_seed(seed);
        let layers = arch
            .dims()
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Layer::zeros(fan_out, fan_in);
                // row-major fill order keeps the draw sequence independent of storage layout
                for r in 0..fan_out {
                    for c in 0..fan_in {
                        layer.weights[(r, c)] = rng.random_range(-limit..=limit);
                    }
                }
                layer
            })
            .collect();
        let head = if arch.output_dim == 1 { Head::Threshold { lambda: 0.0 } } else { Head::Softmax };
        Network::new(arch, preprocess, layers, head)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn preprocess_spec(&self) -> &Preprocess {
        &self.preprocess
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn with_head(mut self, head: Head) -> Result<Self> {
        self.head = head;
        Network::new(self.arch, self.preprocess, self.layers, self.head)
    }

    pub fn num_params(&self) -> usize {
        self.arch.num_params()
    }

    /// Raw series length accepted by [`Network::classify`].
    pub fn series_len(&self) -> usize {
        self.arch.input_dim / self.preprocess.channels.len()
    }

    pub(crate) fn params_finite(&self) -> bool {
        self.layers.iter().all(|l| l.params().all(|v| v.is_finite()))
    }

    /// Preprocessed input for a raw series.
    pub fn input_for(&self, x: &Series) -> Result<Vec<f64>> {
        if self.preprocess.output_dim(x.len()) != self.arch.input_dim {
            return Err(CpdError::ShapeMismatch { expected: self.series_len(), got: x.len() });
        }
        Ok(self.preprocess.apply(x))
    }

    /// Output scores, one column per input column.
    pub fn scores_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.nrows() != self.arch.input_dim {
            return Err(CpdError::ShapeMismatch { expected: self.arch.input_dim, got: inputs.nrows() });
        }
        let last = self.layers.len() - 1;
        let mut a = inputs.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &a;
            for mut col in z.column_iter_mut() {
                col -= &layer.bias;
            }
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            a = z;
        }
        Ok(a)
    }

    pub fn decide(&self, scores: &[f64]) -> Forward {
        match self.head {
            Head::Threshold { lambda } => Forward {
                scores: scores.to_vec(),
                label: usize::from(scores[0] > lambda),
                probabilities: vec![sigmoid(scores[0] - lambda)],
            },
            Head::Softmax => Forward {
                scores: scores.to_vec(),
                label: argmax_first(scores) + 1,
                probabilities: softmax(scores),
            },
        }
    }

    /// Forward pass on an already preprocessed input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Forward> {
        let col = DMatrix::from_column_slice(input.len(), 1, input);
        let s = self.scores_batch(&col)?;
        Ok(self.decide(s.as_slice()))
    }

    pub fn predict(&self, x: &Series) -> Result<Forward> {
        self.forward(&self.input_for(x)?)
    }

    pub fn classify(&self, x: &Series) -> Result<usize> {
        Ok(self.predict(x)?.label)
    }

    /// Predictions for many series, evaluated in column blocks.
    pub fn predict_many(&self, xs: &[&Series]) -> Result<Vec<Forward>> {
        const BLOCK: usize = 256;
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(BLOCK) {
            let inputs = self.input_matrix(chunk.iter().copied())?;
            let s = self.scores_batch(&inputs)?;
            out.extend(s.column_iter().map(|c| self.decide(c.as_slice())));
        }
        Ok(out)
    }

    pub(crate) fn input_matrix<'a>(&self, xs: impl ExactSizeIterator<Item = &'a Series>) -> Result<DMatrix<f64>> {
        let d = self.arch.input_dim;
        let mut m = DMatrix::zeros(d, xs.len());
        for (j, x) in xs.enumerate() {
            let v = self.input_for(x)?;
            m.column_mut(j).copy_from_slice(&v);
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Network::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    /// Row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    schema_version: u32,
    architecture: Architecture,
    preprocess: Preprocess,
    head: Head,
    layers: Vec<LayerFile>,
}

impl From<Network> for NetworkFile {
    fn from(net: Network) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerFile {
                rows: l.rows(),
                cols: l.cols(),
                weights: l.weights.transpose().as_slice().to_vec(),
                bias: l.bias.as_slice().to_vec(),
            })
            .collect();
        NetworkFile {
            format: NETWORK_FORMAT.to_string(),
            schema_version: NETWORK_SCHEMA_VERSION,
            architecture: net.arch,
            preprocess: net.preprocess,
            head: net.head,
            layers,
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = CpdError;

    fn try_from(f: NetworkFile) -> Result<Self> {
        if f.format != NETWORK_FORMAT {
            return Err(CpdError::Schema(format!("expected format `{NETWORK_FORMAT}`, got `{}`", f.format)));
        }
        if f.schema_version != NETWORK_SCHEMA_VERSION {
            return Err(CpdError::Schema(format!(
                "unsupported network schema version {} (expected {NETWORK_SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        let layers = f
            .layers
            .into_iter()
            .map(|l| {
                if l.weights.len() != l.rows * l.cols {
                    return Err(CpdError::ShapeMismatch { expected: l.rows * l.cols, got: l.weights.len() });
                }
                Ok(Layer {
                    weights: DMatrix::from_row_slice(l.rows, l.cols, &l.weights),
                    bias: DVector::from_vec(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(f.architecture, f.preprocess, layers, f.head)
    }
}
