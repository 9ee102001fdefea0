// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{CpdError, Result};
use crate::robust::truncate_values;
use crate::series::Series;

/// Elementwise transform applied to the whole series, in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    /// `(x − min)/(max − min)`; constant input becomes all zeros.
    UnitScale,
    Square,
    /// `x_t x_{t+1}`, zero-padded at the end to keep length `n`.
    LagProduct,
    /// Clip to mean ± z population sd.
    Truncate { z: f64 },
}

/// One block of the network input, computed from the transformed series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Identity,
    Square,
    LagProduct,
}

/// Input pipeline: `steps` in order, then the `channels` concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub steps: Vec<Step>,
    pub channels: Vec<Channel>,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess::unit_scale()
    }
}

impl Preprocess {
    /// Raw values, one channel.
    pub fn identity() -> Self {
        Preprocess { steps: Vec::new(), channels: vec![Channel::Identity] }
    }

    /// Standardise onto `[0, 1]`.
    pub fn unit_scale() -> Self {
        Preprocess { steps: vec![Step::UnitScale], channels: vec![Channel::Identity] }
    }

    pub fn then(mut self, step: Step) -> Self {
        self.steps.push(step);
        self
    }

    pub fn with_channels(mut self, channels: &[Channel]) -> Self {
        self.channels = channels.to_vec();
        self
    }

    pub fn output_dim(&self, n: usize) -> usize {
        n * self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(CpdError::param("preprocess needs at least one channel"));
        }
        for s in &self.steps {
            if let Step::Truncate { z } = s {
                if !(*z > 0.0 && z.is_finite()) {
                    return Err(CpdError::param(format!("truncation level must be positive, got {z}")));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for step in &self.steps {
            v = match *step {
                Step::UnitScale => unit_scale_values(&v),
                Step::Square => v.iter().map(|a| a * a).collect(),
                Step::LagProduct => lag_product(&v),
                Step::Truncate { z } => truncate_values(&v, z),
            };
        }
        let mut out = Vec::with_capacity(self.output_dim(v.len()));
        for ch in &self.channels {
            match ch {
                Channel::Identity => out.extend_from_slice(&v),
                Channel::Square => out.extend(v.iter().map(|a| a * a)),
                Channel::LagProduct => out.extend(lag_product(&v)),
            }
        }
        out
    }
}

fn unit_scale_values(x: &[f64]) -> Vec<f64> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - lo) / range).collect()
}

fn lag_product(x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x.windows(2).map(|w| w[0] * w[1]).collect();
    out.push(0.0);
    out
}

/// Min–max standardisation onto `[0, 1]`.
pub fn unit_scale(x: &Series) -> Series {
    Series::new(unit_scale_values(x)).expect("scaling preserves length and finiteness")
}

pub fn preprocess(x: &Series, spec: &Preprocess) -> Vec<f64> {
    spec.apply(x)
}
