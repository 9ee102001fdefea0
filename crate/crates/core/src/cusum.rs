// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM contrasts, the CUSUM and dyadic-grid (CUSUM*) classifiers, their
//! thresholds and the closed-form classifier-error terms.
//!
//! Change locations are 1-based throughout: a change at `tau` means the first
//! segment is `x[0..tau]` in slice terms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{CpdError, Result};
use crate::series::Series;

/// The `n - 1` unit contrast vectors of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumBasis {
    n: usize,
    /// Row `i - 1` holds `v_i`, row-major.
    vectors: Vec<f64>,
}

impl CusumBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CpdError::InvalidLength(format!("CUSUM basis needs n >= 2, got {n}")));
        }
        let nf = n as f64;
        let mut vectors = vec![0.0; (n - 1) * n];
        for i in 1..n {
            let fi = i as f64;
            let left = ((nf - fi) / (fi * nf)).sqrt();
            let right = -(fi / ((nf - fi) * nf)).sqrt();
            let row = &mut vectors[(i - 1) * n..i * n];
            row[..i].fill(left);
            row[i..].fill(right);
        }
        Ok(CusumBasis { n, vectors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `v_i` for `i` in `1..n`.
    pub fn vector(&self, i: usize) -> &[f64] {
        assert!(i >= 1 && i < self.n, "contrast index {i} out of 1..{}", self.n);
        &self.vectors[(i - 1) * self.n..i * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.n)
    }
}

/// Shared, lazily built basis for length `n`.
pub fn cusum_basis(n: usize) -> Result<Arc<CusumBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CusumBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("basis cache poisoned").get(&n) {
        return Ok(Arc::clone(b));
    }
    let basis = Arc::new(CusumBasis::new(n)?);
    let mut guard = cache.lock().expect("basis cache poisoned");
    Ok(Arc::clone(guard.entry(n).or_insert(basis)))
}

/// Prefix sums of the centred series. Centring first keeps the
/// left-minus-right contrasts free of the cancellation a large level would cause.
pub(crate) fn centred_prefix(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v - mean;
        prefix.push(acc);
    }
    prefix
}

#[inline]
pub(crate) fn contrast_from_prefix(prefix: &[f64], n: usize, i: usize) -> f64 {
    let (nf, fi) = (n as f64, i as f64);
    let left = prefix[i];
    let right = prefix[n] - prefix[i];
    ((nf - fi) / (fi * nf)).sqrt() * left - (fi / ((nf - fi) * nf)).sqrt() * right
}

/// `(v_1ᵀx, …, v_{n-1}ᵀx)` in O(n).
pub fn cusum_transform(x: &Series) -> Vec<f64> {
    let n = x.len();
    let prefix = centred_prefix(x);
    (1..n).map(|i| contrast_from_prefix(&prefix, n, i)).collect()
}

/// `‖𝒞(x)‖∞` with the smallest maximising location.
pub fn cusum_statistic(x: &Series) -> (f64, usize) {
    argmax_abs(cusum_transform(x).into_iter().enumerate().map(|(k, v)| (k + 1, v)))
}

pub(crate) fn argmax_abs(values: impl Iterator<Item = (usize, f64)>) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (loc, v) in values {
        if v.abs() > best.0 {
            best = (v.abs(), loc);
        }
    }
    best
}

fn check_threshold(lambda: f64) -> Result<()> {
    if lambda > 0.0 && !lambda.is_nan() {
        Ok(())
    } else {
        Err(CpdError::InvalidThreshold(format!("threshold must be positive, got {lambda}")))
    }
}

/// `1{‖𝒞(x)‖∞ > λ}`.
pub fn cusum_classify(x: &Series, lambda: f64) -> Result<u8> {
    check_threshold(lambda)?;
    Ok(u8::from(cusum_statistic(x).0 > lambda))
}

/// The dyadic scan grid `{2^q} ∪ {n - 2^q}`, `0 <= q <= ⌊log₂(n/2)⌋`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGrid {
    n: usize,
    indices: Vec<usize>,
}

impl DyadicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CpdError::InvalidLength(format!("dyadic grid needs n >= 2, got {n}")));
        }
        let mut indices = Vec::new();
        let mut p = 1usize;
        // 2^q <= n/2  <=>  2^(q+1) <= n
        while 2 * p <= n {
            indices.push(p);
            indices.push(n - p);
            p *= 2;
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(DyadicGrid { n, indices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn dyadic_grid(n: usize) -> Result<DyadicGrid> {
    DyadicGrid::new(n)
}

/// `max_{t∈T₀} |v_tᵀx|` with the smallest maximising grid point.
pub fn cusum_star_statistic(x: &Series) -> Result<(f64, usize)> {
    let grid = DyadicGrid::new(x.len())?;
    Ok(cusum_star_statistic_on(x, &grid))
}

pub(crate) fn cusum_star_statistic_on(x: &[f64], grid: &DyadicGrid) -> (f64, usize) {
    debug_assert_eq!(x.len(), grid.n);
    let prefix = centred_prefix(x);
    argmax_abs(grid.indices.iter().map(|&t| (t, contrast_from_prefix(&prefix, grid.n, t))))
}

/// `1{max_{t∈T₀} |v_tᵀx| > λ*}`.
pub fn cusum_star_classify(x: &Series, lambda_star: f64) -> Result<u8> {
    check_threshold(lambda_star)?;
    Ok(u8::from(cusum_star_statistic(x)?.0 > lambda_star))
}

/// Which threshold to compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdKind {
    /// `√(2 log(n/ε))`: null false-positive rate at most ε.
    Null { eps: f64 },
    /// `B√n/2`: the Θ(B) threshold for full CUSUM.
    Corollary { b: f64 },
    /// `B√(3n)/6`: the Θ(B) threshold for CUSUM*.
    Star { b: f64 },
}

pub fn threshold(n: usize, kind: ThresholdKind) -> Result<f64> {
    if n < 2 {
        return Err(CpdError::InvalidLength(format!("n must be >= 2, got {n}")));
    }
    let nf = n as f64;
    match kind {
        ThresholdKind::Null { eps } => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(CpdError::param(format!("eps must lie in (0,1), got {eps}")));
            }
            Ok((2.0 * (nf / eps).ln()).sqrt())
        }
        ThresholdKind::Corollary { b } => Ok(check_b(b)? * nf.sqrt() / 2.0),
        ThresholdKind::Star { b } => Ok(check_b(b)? * (3.0 * nf).sqrt() / 6.0),
    }
}

fn check_b(b: f64) -> Result<f64> {
    if b > 0.0 && b.is_finite() {
        Ok(b)
    } else {
        Err(CpdError::param(format!("B must be positive and finite, got {b}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Cusum,
    Star,
}

/// Classifier-error term of the Θ(B) bounds: `n e^{-nB²/8}` for CUSUM at
/// `B√n/2`, `2⌊log₂ n⌋ e^{-nB²/24}` for CUSUM* at `B√(3n)/6`.
pub fn error_bound(n: usize, b: f64, kind: BoundKind) -> Result<f64> {
    let b = check_b(b)?;
    let nf = n as f64;
    match kind {
        BoundKind::Cusum => {
            if n < 2 {
                return Err(CpdError::InvalidLength(format!("n must be >= 2, got {n}")));
            }
            Ok(nf * (-nf * b * b / 8.0).exp())
        }
        BoundKind::Star => {
            if n < 4 {
                return Err(CpdError::InvalidLength(format!("n must be >= 4, got {n}")));
            }
            Ok(2.0 * f64::from(n.ilog2()) * (-nf * b * b / 24.0).exp())
        }
    }
}

/// A single mean change of a length-`n` step signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub n: usize,
    pub tau: usize,
    pub mu_left: f64,
    pub mu_right: f64,
}

impl SnrSpec {
    pub fn new(n: usize, tau: usize, mu_left: f64, mu_right: f64) -> Result<Self> {
        if tau < 1 || tau >= n {
            return Err(CpdError::param(format!("tau must lie in 1..{n}, got {tau}")));
        }
        Ok(SnrSpec { n, tau, mu_left, mu_right })
    }

    pub fn eta(&self) -> f64 {
        self.tau as f64 / self.n as f64
    }

    /// The noiseless step signal.
    pub fn signal(&self) -> Vec<f64> {
        (1..=self.n)
            .map(|i| if i <= self.tau { self.mu_left } else { self.mu_right })
            .collect()
    }
}

/// `|μ_L − μ_R| √(τ(n−τ)) / n`.
pub fn snr(spec: &SnrSpec) -> f64 {
    let (n, t) = (spec.n as f64, spec.tau as f64);
    (spec.mu_left - spec.mu_right).abs() * (t * (n - t)).sqrt() / n
}

/// Closed-form `|v_iᵀμ|` for a step signal with jump `delta` at `tau`,
/// `i = 1..n-1`.
pub fn step_contrast_profile(n: usize, tau: usize, delta: f64) -> Vec<f64> {
    let nf = n as f64;
    let eta = tau as f64 / nf;
    let d = delta.abs();
    (1..n)
        .map(|i| {
            let fi = i as f64;
            if i <= tau {
                d * (1.0 - eta) * (nf * fi / (nf - fi)).sqrt()
            } else {
                d * eta * (nf * (nf - fi) / fi).sqrt()
            }
        })
        .collect()
}

/// Smallest `|v_tᵀμ| / ‖𝒞(μ)‖∞` over integer `t` with
/// `|t − τ| ≤ min(τ, n − τ)/2`, for a step signal changing after `tau`.
pub fn grid_neighbourhood_ratio(n: usize, tau: usize) -> Result<f64> {
    if tau < 1 || tau >= n {
        return Err(CpdError::param(format!("tau must lie in 1..{n}, got {tau}")));
    }
    let a = step_contrast_profile(n, tau, 1.0);
    let peak = a[tau - 1];
    let half = tau.min(n - tau);
    Ok((1..n)
        .filter(|&t| 2 * t.abs_diff(tau) <= half)
        .map(|t| a[t - 1] / peak)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn s(v: &[f64]) -> Series {
        Series::new(v.to_vec()).unwrap()
    }

    #[test]
    fn grid_neighbourhood_small_cases() {
        // equality at τ = n/2, t = τ/2
        let r = grid_neighbourhood_ratio(16, 8).unwrap();
        assert_abs_diff_eq!(r, 3f64.sqrt() / 3.0, epsilon = 1e-12);
        assert_eq!(grid_neighbourhood_ratio(16, 1).unwrap(), 1.0);
        assert!(grid_neighbourhood_ratio(16, 16).is_err());
    }

    #[test]
    fn basis_small_cases() {
        let b2 = CusumBasis::new(2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(b2.vector(1)[0], h, epsilon = 1e-15);
        assert_abs_diff_eq!(b2.vector(1)[1], -h, epsilon = 1e-15);

        let b4 = CusumBasis::new(4).unwrap();
        for (got, want) in b4.vector(2).iter().zip([0.5, 0.5, -0.5, -0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert!(matches!(CusumBasis::new(1), Err(CpdError::InvalidLength(_))));
    }

    #[test]
    fn basis_unit_norm_and_sign_pattern() {
        for n in 2..=512 {
            let b = cusum_basis(n).unwrap();
            for (k, v) in b.iter().enumerate() {
                let i = k + 1;
                let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() <= 1e-12, "n={n} i={i} norm={norm}");
                assert!(v[..i].iter().all(|&a| a > 0.0 && a == v[0]));
                assert!(v[i..].iter().all(|&a| a < 0.0 && a == v[i]));
            }
        }
    }

    #[test]
    fn transform_matches_dot_products() {
        let x = s(&[0.3, -1.2, 4.0, 2.2, 0.0, -0.7, 1.1]);
        let basis = CusumBasis::new(x.len()).unwrap();
        let c = cusum_transform(&x);
        for (i, v) in basis.iter().enumerate() {
            let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(c[i], dot, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_examples() {
        assert!(cusum_transform(&s(&[2.5; 9])).iter().all(|v| v.abs() < 1e-15));
        let c = cusum_transform(&s(&[1.0, 0.0]));
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c[0], 0.70711, epsilon = 1e-5);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(cusum_classify(&s(&[4.0; 6]), 0.1).unwrap(), 0);
        let x = s(&[3.0, 0.0]);
        assert_abs_diff_eq!(cusum_statistic(&x).0, 2.1213, epsilon = 1e-4);
        assert_eq!(cusum_classify(&x, 1.0).unwrap(), 1);
        assert_eq!(cusum_classify(&x, 3.0).unwrap(), 0);
        assert!(matches!(cusum_classify(&x, 0.0), Err(CpdError::InvalidThreshold(_))));
        assert!(matches!(cusum_classify(&x, -1.0), Err(CpdError::InvalidThreshold(_))));
    }

    #[test]
    fn tie_at_threshold_is_no_change() {
        // statistic of (1, -1) is exactly sqrt(2)
        let x = s(&[1.0, -1.0]);
        let stat = cusum_statistic(&x).0;
        assert_eq!(cusum_classify(&x, stat).unwrap(), 0);
    }

    #[test]
    fn dyadic_grid_examples() {
        let g = dyadic_grid(100).unwrap();
        assert_eq!(g.indices(), &[1, 2, 4, 8, 16, 32, 68, 84, 92, 96, 98, 99]);
        assert_eq!(g.len(), 2 * 100usize.ilog2() as usize);
        assert_eq!(dyadic_grid(8).unwrap().indices(), &[1, 2, 4, 6, 7]);
        assert_eq!(dyadic_grid(4).unwrap().indices(), &[1, 2, 3]);
        assert_eq!(dyadic_grid(3).unwrap().indices(), &[1, 2]);
        assert_eq!(dyadic_grid(2).unwrap().indices(), &[1]);
        assert!(matches!(dyadic_grid(1), Err(CpdError::InvalidLength(_))));
    }

    #[test]
    fn dyadic_grid_membership_and_size() {
        for n in 4..=2048usize {
            let g = dyadic_grid(n).unwrap();
            let q_max = (n / 2).ilog2();
            assert!(g.len() <= 2 * n.ilog2() as usize);
            assert!(g.indices().windows(2).all(|w| w[0] < w[1]));
            for &t in g.indices() {
                assert!((0..=q_max).any(|q| t == 1 << q || t == n - (1 << q)), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn star_examples() {
        assert_eq!(cusum_star_classify(&s(&[1.0; 8]), 0.5).unwrap(), 0);
        let mut v = vec![0.0; 8];
        v[0] = 5.0;
        let x = s(&v);
        // brute force over every location
        let full = cusum_transform(&x);
        let (best, at) = full
            .iter()
            .enumerate()
            .fold((0.0f64, 0usize), |acc, (k, c)| if c.abs() > acc.0 { (c.abs(), k + 1) } else { acc });
        assert_eq!(at, 1);
        let (star, t) = cusum_star_statistic(&x).unwrap();
        assert_eq!(t, 1);
        assert_abs_diff_eq!(star, best, epsilon = 1e-14);
    }

    #[test]
    fn threshold_examples() {
        assert_abs_diff_eq!(threshold(100, ThresholdKind::Null { eps: 0.05 }).unwrap(), 3.8990, epsilon = 1e-4);
        assert_abs_diff_eq!(threshold(100, ThresholdKind::Corollary { b: 1.0 }).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(threshold(100, ThresholdKind::Star { b: 1.0 }).unwrap(), 2.8868, epsilon = 1e-4);
        assert!(threshold(100, ThresholdKind::Null { eps: 1.0 }).is_err());
        assert!(threshold(100, ThresholdKind::Null { eps: 0.0 }).is_err());
        assert!(threshold(100, ThresholdKind::Star { b: -2.0 }).is_err());
    }

    #[test]
    fn error_bound_examples() {
        assert_abs_diff_eq!(error_bound(100, 1.0, BoundKind::Cusum).unwrap(), 3.727e-4, epsilon = 1e-7);
        assert_abs_diff_eq!(error_bound(100, 1.0, BoundKind::Star).unwrap(), 0.18605, epsilon = 1e-5);
        let mut prev = f64::INFINITY;
        for k in 1..30 {
            let v = error_bound(100, 0.25 * k as f64, BoundKind::Cusum).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-100);
        assert!(error_bound(3, 1.0, BoundKind::Star).is_err());
        assert!(error_bound(100, 0.0, BoundKind::Cusum).is_err());
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr(&SnrSpec::new(100, 30, 1.0, 1.0).unwrap()), 0.0);
        assert_abs_diff_eq!(snr(&SnrSpec::new(100, 50, 0.0, 1.0).unwrap()), 0.5, epsilon = 1e-15);
        let a = snr(&SnrSpec::new(100, 1, 0.0, 2.0).unwrap());
        let b = snr(&SnrSpec::new(100, 99, 0.0, 2.0).unwrap());
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        assert!(SnrSpec::new(10, 0, 0.0, 1.0).is_err());
        assert!(SnrSpec::new(10, 10, 0.0, 1.0).is_err());
    }

    #[test]
    fn step_profile_matches_transform() {
        for (n, tau) in [(16, 3), (17, 8), (40, 39), (64, 1)] {
            let spec = SnrSpec::new(n, tau, 0.5, -1.25).unwrap();
            let c = cusum_transform(&Series::new(spec.signal()).unwrap());
            let a = step_contrast_profile(n, tau, 1.75);
            for (x, y) in c.iter().zip(&a) {
                assert_abs_diff_eq!(x.abs(), *y, epsilon = 1e-12);
            }
            let peak = a.iter().cloned().fold(0.0, f64::max);
            assert_abs_diff_eq!(peak, 1.75 * (n as f64 * spec.eta() * (1.0 - spec.eta())).sqrt(), epsilon = 1e-12);
        }
    }

    fn series_strategy() -> impl Strategy<Value = Vec<f64>> {
        (2usize..64).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n))
    }

    proptest! {
        #[test]
        fn linear_and_shift_invariant(x in series_strategy(), a in -5.0f64..5.0, c in -50.0f64..50.0, seed in any::<u64>()) {
            let n = x.len();
            let y: Vec<f64> = (0..n).map(|i| ((seed >> (i % 64)) & 1) as f64 - 0.5 * i as f64 / n as f64).collect();
            let cx = cusum_transform(&Series::new(x.clone()).unwrap());
            let cy = cusum_transform(&Series::new(y.clone()).unwrap());
            let sum: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
            let csum = cusum_transform(&Series::new(sum).unwrap());
            for i in 0..n - 1 {
                prop_assert!((csum[i] - cx[i] - cy[i]).abs() <= 1e-12);
            }
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            let cs = cusum_transform(&Series::new(scaled).unwrap());
            for i in 0..n - 1 {
                prop_assert!((cs[i] - a * cx[i]).abs() <= 1e-12);
            }
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let csh = cusum_transform(&Series::new(shifted).unwrap());
            for i in 0..n - 1 {
                prop_assert!((csh[i] - cx[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn star_never_exceeds_full(x in (4usize..80).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n))) {
            let s = Series::new(x).unwrap();
            let full = cusum_statistic(&s).0;
            let star = cusum_star_statistic(&s).unwrap().0;
            prop_assert!(star <= full);
        }
    }
}
