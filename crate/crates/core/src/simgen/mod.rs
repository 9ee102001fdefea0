// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic datasets.
//!
//! Every generator is a pure function of its spec and a `u64` seed. Example `k`
//! of a dataset draws from its own child stream, so any single example can be
//! regenerated from the seed stored in its metadata.

mod changetype;
mod multiclass;
mod piecewise;
mod scenario;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use changetype::{gen_changetype, ChangeParams, ChangeTypeKind};
pub use multiclass::{
    gen_multiclass, gen_simultaneous, MulticlassSpec, ParamRange, Regime, SimultaneousSpec, MEAN_NOISE_SD,
    SLOPE_NOISE_SD,
};
pub use piecewise::{gen_piecewise, gen_single_change_long, NoiseSpec, PiecewiseSeries, SnrBand};
pub use scenario::{
    gen_ar_change, gen_scenario, scenario_noise, snr_base, ArChangeSpec, Role, Scenario, ScenarioSpec,
};

use crate::series::Series;

/// How labels are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSpace {
    /// 0 = no change, 1 = change.
    Binary,
    /// Labels `1..=classes`.
    Multiclass { classes: usize },
}

impl LabelSpace {
    pub fn num_outputs(&self) -> usize {
        match self {
            LabelSpace::Binary => 1,
            LabelSpace::Multiclass { classes } => *classes,
        }
    }

    /// All admissible labels in ascending order.
    pub fn labels(&self) -> Vec<usize> {
        match self {
            LabelSpace::Binary => vec![0, 1],
            LabelSpace::Multiclass { classes } => (1..=*classes).collect(),
        }
    }

    pub fn contains(&self, label: usize) -> bool {
        match self {
            LabelSpace::Binary => label <= 1,
            LabelSpace::Multiclass { classes } => (1..=*classes).contains(&label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMeta {
    /// 1-based change location, `None` when there is no change.
    pub tau: Option<usize>,
    /// Generating parameters by name.
    pub params: BTreeMap<String, f64>,
    /// Seed of the example's own random stream.
    pub seed: u64,
}

impl ExampleMeta {
    pub fn new(tau: Option<usize>, seed: u64) -> Self {
        ExampleMeta { tau, params: BTreeMap::new(), seed }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub series: Series,
    pub label: usize,
    pub meta: ExampleMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub n: usize,
    pub labels: LabelSpace,
    pub examples: Vec<Example>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn series(&self) -> impl ExactSizeIterator<Item = &Series> {
        self.examples.iter().map(|e| &e.series)
    }

    pub fn label_vec(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// SHA-256 over labels, change locations and the bit patterns of every
    /// value; first 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for e in &self.examples {
            h.update((e.label as u64).to_le_bytes());
            h.update(e.meta.tau.map_or(u64::MAX, |t| t as u64).to_le_bytes());
            for v in e.series.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn concat(mut self, other: LabeledDataset) -> Self {
        assert_eq!(self.n, other.n, "cannot concatenate datasets of different series length");
        self.examples.extend(other.examples);
        self
    }
}

/// Seeded Fisher–Yates shuffle.
pub(crate) fn shuffle_in_place<T>(items: &mut [T], seed: u64) {
    use rand::seq::SliceRandom;
    let mut rng = crate::rng::rng_from_seed(seed);
    items.shuffle(&mut rng);
}
