// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sliding-window localisation of multiple changes from a window classifier.

use serde::{Deserialize, Serialize};

use crate::cusum::{centred_prefix, contrast_from_prefix, cusum_star_statistic_on, dyadic_grid, DyadicGrid};
use crate::error::{CpdError, Result};
use crate::nn::{Forward, Head, Network};
use crate::par;
use crate::series::Series;

/// Decides whether a window of fixed length contains a change.
pub trait WindowClassifier: Sync {
    fn window_len(&self) -> usize;

    /// `(label, probability of a change)`.
    fn classify_window(&self, window: &[f64]) -> Result<(u8, f64)>;
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Full CUSUM scan at threshold λ.
#[derive(Debug, Clone)]
pub struct CusumWindow {
    n: usize,
    lambda: f64,
}

impl CusumWindow {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        if n < 4 {
            return Err(CpdError::InvalidLength(format!("window length must be >= 4, got {n}")));
        }
        if !(lambda > 0.0) {
            return Err(CpdError::InvalidThreshold(format!("lambda must be positive, got {lambda}")));
        }
        Ok(CusumWindow { n, lambda })
    }
}

impl WindowClassifier for CusumWindow {
    fn window_len(&self) -> usize {
        self.n
    }

    fn classify_window(&self, w: &[f64]) -> Result<(u8, f64)> {
        let prefix = centred_prefix(w);
        let stat = (1..self.n).map(|t| contrast_from_prefix(&prefix, self.n, t).abs()).fold(0.0, f64::max);
        Ok((u8::from(stat > self.lambda), logistic(stat - self.lambda)))
    }
}

/// CUSUM restricted to the dyadic grid, threshold λ*.
#[derive(Debug, Clone)]
pub struct CusumStarWindow {
    grid: DyadicGrid,
    lambda: f64,
}

impl CusumStarWindow {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        if n < 4 {
            return Err(CpdError::InvalidLength(format!("window length must be >= 4, got {n}")));
        }
        if !(lambda > 0.0) {
            return Err(CpdError::InvalidThreshold(format!("lambda must be positive, got {lambda}")));
        }
        Ok(CusumStarWindow { grid: dyadic_grid(n)?, lambda })
    }
}

impl WindowClassifier for CusumStarWindow {
    fn window_len(&self) -> usize {
        self.grid.n()
    }

    fn classify_window(&self, w: &[f64]) -> Result<(u8, f64)> {
        let (stat, _) = cusum_star_statistic_on(w, &self.grid);
        Ok((u8::from(stat > self.lambda), logistic(stat - self.lambda)))
    }
}

/// A binary network applied to each raw window.
impl WindowClassifier for Network {
    fn window_len(&self) -> usize {
        self.series_len()
    }

    fn classify_window(&self, w: &[f64]) -> Result<(u8, f64)> {
        if !matches!(self.head(), Head::Threshold { .. }) {
            return Err(CpdError::param("window classification needs a binary network"));
        }
        let Forward { label, probabilities, .. } = self.predict(&Series::new(w.to_vec())?)?;
        Ok((label as u8, probabilities[0]))
    }
}

/// Any function of a window.
pub struct FnWindow<F> {
    n: usize,
    f: F,
}

impl<F> FnWindow<F>
where
    F: Fn(&[f64]) -> (u8, f64) + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnWindow { n, f }
    }
}

impl<F> WindowClassifier for FnWindow<F>
where
    F: Fn(&[f64]) -> (u8, f64) + Sync,
{
    fn window_len(&self) -> usize {
        self.n
    }

    fn classify_window(&self, w: &[f64]) -> Result<(u8, f64)> {
        Ok((self.f)(w))
    }
}

/// Labels and probabilities for every window start `i = 1..=n*−n+1`.
pub fn sliding_labels(x: &Series, psi: &dyn WindowClassifier) -> Result<(Vec<u8>, Vec<f64>)> {
    let n = psi.window_len();
    let total = x.len();
    if total < n {
        return Err(CpdError::InvalidLength(format!("series of length {total} shorter than the window {n}")));
    }
    let out = par::try_map_range(total - n + 1, |i| psi.classify_window(&x[i..i + n]))?;
    Ok(out.into_iter().unzip())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalisationResult {
    /// Estimated change-points (1-based, last index before the change).
    pub taus: Vec<usize>,
    /// Maximal runs `[s, e]` with `L̄ ≥ γ`, 1-based.
    pub segments: Vec<(usize, usize)>,
    pub window: usize,
    /// `L̄_i` for `i = window ..= n* − window + 1`.
    pub running_mean: Vec<f64>,
    pub labels: Vec<u8>,
    pub probabilities: Vec<f64>,
}

impl LocalisationResult {
    pub fn count(&self) -> usize {
        self.taus.len()
    }

    /// `L̄_i` for a 1-based index inside the computed range.
    pub fn running_mean_at(&self, i: usize) -> Option<f64> {
        i.checked_sub(self.window).and_then(|k| self.running_mean.get(k).copied())
    }
}

/// Sliding-window vote aggregation. `γ ∈ (0, 1]`.
pub fn localise(x: &Series, psi: &dyn WindowClassifier, gamma: f64) -> Result<LocalisationResult> {
    let n = psi.window_len();
    let total = x.len();
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(CpdError::param(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if total < 2 * n {
        return Err(CpdError::InvalidLength(format!("series length {total} must be at least twice the window {n}")));
    }
    let (labels, probabilities) = sliding_labels(x, psi)?;

    // window counts over L_{i−n+1..=i}, i = n..=n*−n+1 (1-based)
    let last = total - n + 1;
    let mut counts = Vec::with_capacity(last - n + 1);
    let mut c: usize = labels[..n].iter().map(|&l| usize::from(l)).sum();
    counts.push(c);
    for i in (n + 1)..=last {
        c += usize::from(labels[i - 1]);
        c -= usize::from(labels[i - n - 1]);
        counts.push(c);
    }
    let running_mean: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

    let mut segments = Vec::new();
    let mut taus = Vec::new();
    let mut k = 0;
    while k < counts.len() {
        if running_mean[k] < gamma {
            k += 1;
            continue;
        }
        let start = k;
        let mut best = k;
        while k < counts.len() && running_mean[k] >= gamma {
            if counts[k] > counts[best] {
                best = k;
            }
            k += 1;
        }
        segments.push((start + n, k - 1 + n));
        taus.push(best + n);
    }
    Ok(LocalisationResult { taus, segments, window: n, running_mean, labels, probabilities })
}
