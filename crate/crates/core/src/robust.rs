// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rank-based change statistic and z-score truncation for heavy-tailed data.

use serde::{Deserialize, Serialize};

use crate::error::{CpdError, Result};
use crate::series::Series;

/// Number of population standard deviations kept by [`zscore_truncate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    z: f64,
}

impl TruncationSpec {
    pub fn new(z: f64) -> Result<Self> {
        if z > 0.0 && z.is_finite() {
            Ok(TruncationSpec { z })
        } else {
            Err(CpdError::param(format!("truncation level must be positive, got {z}")))
        }
    }

    pub fn z(&self) -> f64 {
        self.z
    }
}

/// Scaled statistic for split `k` given the signed pair sum
/// `Σ_{i≤k<j} (1{x_i<x_j} − 1/2)`. Both evaluation routes go through here so
/// they agree bit for bit.
#[inline]
pub fn wilcoxon_scaled(k: usize, n: usize, pair_sum: f64) -> f64 {
    let (kf, nf) = (k as f64, n as f64);
    (2.0 * (kf * (nf - kf)).sqrt() / nf * pair_sum / nf.powf(1.5)).abs()
}

/// Fenwick tree of counts over compressed ranks.
struct Counts {
    tree: Vec<u32>,
}

impl Counts {
    fn new(len: usize) -> Self {
        Counts { tree: vec![0; len + 1] }
    }

    fn add(&mut self, rank: usize, delta: i32) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    /// Number of stored ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut acc = 0u64;
        while i > 0 {
            acc += u64::from(self.tree[i]);
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Wilcoxon cumulative-sum statistic `T_n` and its smallest maximising split,
/// in O(n log n).
pub fn wilcoxon_statistic(x: &Series) -> (f64, usize) {
    let n = x.len();
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    let ranks: Vec<usize> = x
        .iter()
        .map(|v| sorted.binary_search_by(|p| p.total_cmp(v)).expect("value present"))
        .collect();

    let mut left = Counts::new(sorted.len());
    let mut right = Counts::new(sorted.len());
    for &r in &ranks {
        right.add(r, 1);
    }
    // pairs (i <= k, j > k) with x_i < x_j
    let mut concordant: i64 = 0;
    let mut right_len = n as u64;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for k in 1..n {
        let r = ranks[k - 1];
        right.add(r, -1);
        right_len -= 1;
        let less_before = left.below(r) as i64;
        let greater_after = (right_len - right.below(r + 1)) as i64;
        concordant += greater_after - less_before;
        left.add(r, 1);

        let pair_sum = concordant as f64 - (k * (n - k)) as f64 / 2.0;
        let t = wilcoxon_scaled(k, n, pair_sum);
        if t > best.0 {
            best = (t, k);
        }
    }
    best
}

/// `1{T_n > threshold}`.
pub fn wilcoxon_classify(x: &Series, threshold: f64) -> Result<u8> {
    if !(threshold > 0.0) {
        return Err(CpdError::InvalidThreshold(format!("threshold must be positive, got {threshold}")));
    }
    Ok(u8::from(wilcoxon_statistic(x).0 > threshold))
}

/// Clips every entry to `x̄ ± Zσ_x` (population standard deviation).
/// A constant series is returned unchanged.
pub fn zscore_truncate(x: &Series, spec: TruncationSpec) -> Series {
    Series::new(truncate_values(x, spec.z)).expect("clipping preserves length and finiteness")
}

pub(crate) fn truncate_values(x: &[f64], z: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return x.to_vec();
    }
    let (lo, hi) = (mean - z * sd, mean + z * sd);
    x.iter()
        .map(|&v| if (v - mean).abs() > z * sd { v.clamp(lo, hi) } else { v })
        .collect()
}
