// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generalised likelihood-ratio scans for a single change in a regression
//! model `X = Zβ + c_τ φ + Γξ`, plus the Gaussian variance-change scan and the
//! BIC-based change-type classifier.
//!
//! The likelihood-ratio statistic for a change at `τ` is a monotone function of
//! `|v_τᵀx|`, where `v_τ` is the whitened change covariate projected off the
//! whitened base covariates, normalised, and mapped back through `Γ⁻¹`. A scan is
//! therefore a single-hidden-layer network with `±v_τ` as first-layer rows.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cusum::{argmax_abs, cusum_statistic};
use crate::error::{CpdError, Result};
use crate::series::Series;

const DEGENERATE_RTOL: f64 = 1e-10;
const RANK_RTOL: f64 = 1e-10;
/// Floor on ML variance estimates.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// A change-in-regression design.
#[derive(Debug, Clone)]
pub struct ChangeDesign {
    n: usize,
    base: DMatrix<f64>,
    change_covariates: BTreeMap<usize, DVector<f64>>,
    noise: Option<DMatrix<f64>>,
}

impl ChangeDesign {
    /// `noise = None` means `Γ = I`.
    pub fn new(
        base: DMatrix<f64>,
        change_covariates: BTreeMap<usize, DVector<f64>>,
        noise: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = base.nrows();
        if n < 2 || base.ncols() == 0 {
            return Err(CpdError::Design(format!(
                "base covariates must be n x p with n >= 2, p >= 1; got {n} x {}",
                base.ncols()
            )));
        }
        if let Some((tau, c)) = change_covariates.iter().find(|(_, c)| c.len() != n) {
            return Err(CpdError::Design(format!(
                "change covariate for tau={tau} has length {}, expected {n}",
                c.len()
            )));
        }
        if let Some(g) = &noise {
            if g.nrows() != n || g.ncols() != n {
                return Err(CpdError::Design(format!(
                    "noise matrix must be {n} x {n}, got {} x {}",
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        Ok(ChangeDesign { n, base, change_covariates, noise })
    }

    /// Change in mean: `Z = 1`, `c_τ = 1{i > τ}`, `τ ∈ 1..n`.
    pub fn mean_change(n: usize) -> Result<Self> {
        Self::check_len(n, 2)?;
        let base = DMatrix::from_element(n, 1, 1.0);
        let cov = (1..n)
            .map(|tau| (tau, DVector::from_fn(n, |i, _| if i + 1 > tau { 1.0 } else { 0.0 })))
            .collect();
        ChangeDesign::new(base, cov, None)
    }

    /// Continuous change in slope: `Z = [1, i]`, `c_τ = max(0, i − τ)`,
    /// `τ ∈ 2..=n-2`.
    pub fn slope_change(n: usize) -> Result<Self> {
        Self::check_len(n, 4)?;
        let base = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i + 1) as f64 });
        let cov = (2..=n - 2)
            .map(|tau| (tau, DVector::from_fn(n, |i, _| ((i + 1) as f64 - tau as f64).max(0.0))))
            .collect();
        ChangeDesign::new(base, cov, None)
    }

    pub fn with_noise(mut self, gamma: DMatrix<f64>) -> Result<Self> {
        let design = ChangeDesign::new(self.base, std::mem::take(&mut self.change_covariates), Some(gamma))?;
        Ok(design)
    }

    fn check_len(n: usize, min: usize) -> Result<()> {
        if n < min {
            Err(CpdError::InvalidLength(format!("design needs n >= {min}, got {n}")))
        } else {
            Ok(())
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &DMatrix<f64> {
        &self.base
    }
}

/// One scan direction per candidate change location.
#[derive(Debug, Clone)]
pub struct GlrDirections {
    n: usize,
    taus: Vec<usize>,
    /// `v_τ`, acting on the raw series; `None` when the change is not
    /// identifiable from the base covariates.
    raw: Vec<Option<Vec<f64>>>,
    /// Unit direction in whitened coordinates.
    whitened: Vec<Option<Vec<f64>>>,
}

impl GlrDirections {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn taus(&self) -> &[usize] {
        &self.taus
    }

    pub fn direction(&self, tau: usize) -> Option<&[f64]> {
        let k = self.taus.binary_search(&tau).ok()?;
        self.raw[k].as_deref()
    }

    pub fn whitened_direction(&self, tau: usize) -> Option<&[f64]> {
        let k = self.taus.binary_search(&tau).ok()?;
        self.whitened[k].as_deref()
    }

    pub fn is_degenerate(&self, tau: usize) -> bool {
        self.direction(tau).is_none()
    }

    /// `(τ, v_τᵀx)` for every non-degenerate `τ`.
    pub fn contrasts<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.taus.iter().zip(&self.raw).filter_map(move |(&tau, v)| {
            v.as_ref().map(|v| (tau, v.iter().zip(x).map(|(a, b)| a * b).sum()))
        })
    }
}

/// Builds the scan directions of `design`.
pub fn glr_directions(design: &ChangeDesign) -> Result<GlrDirections> {
    let n = design.n;
    let lu = design.noise.as_ref().map(|g| g.clone().lu());
    if let Some(lu) = &lu {
        if !lu.is_invertible() {
            return Err(CpdError::Design("noise matrix is singular".into()));
        }
    }
    let whiten = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        match &lu {
            Some(lu) => lu.solve(m).ok_or_else(|| CpdError::Design("noise matrix is singular".into())),
            None => Ok(m.clone()),
        }
    };

    let base_w = whiten(&design.base)?;
    let qr = base_w.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || r.diagonal().iter().any(|v| v.abs() <= RANK_RTOL * scale) {
        return Err(CpdError::Design("base covariates are rank deficient".into()));
    }
    let q = qr.q();

    let gamma_t_lu = design.noise.as_ref().map(|g| g.transpose().lu());

    let mut taus = Vec::with_capacity(design.change_covariates.len());
    let mut raw = Vec::with_capacity(taus.capacity());
    let mut whitened = Vec::with_capacity(taus.capacity());
    for (&tau, c) in &design.change_covariates {
        taus.push(tau);
        let c_w = match &lu {
            Some(lu) => lu
                .solve(c)
                .ok_or_else(|| CpdError::Design("noise matrix is singular".into()))?,
            None => c.clone(),
        };
        let resid = &c_w - &q * (q.transpose() * &c_w);
        let norm = resid.norm();
        if norm < DEGENERATE_RTOL * c_w.norm() || norm == 0.0 {
            raw.push(None);
            whitened.push(None);
            continue;
        }
        let unit = resid / norm;
        let v = match &gamma_t_lu {
            Some(lu) => lu
                .solve(&unit)
                .ok_or_else(|| CpdError::Design("noise matrix is singular".into()))?,
            None => unit.clone(),
        };
        raw.push(Some(v.as_slice().to_vec()));
        whitened.push(Some(unit.as_slice().to_vec()));
    }
    Ok(GlrDirections { n, taus, raw, whitened })
}

/// `max_τ |v_τᵀx|` over non-degenerate locations, smallest maximiser on ties.
pub fn glr_statistic(x: &Series, dirs: &GlrDirections) -> Result<(f64, usize)> {
    if x.len() != dirs.n {
        return Err(CpdError::ShapeMismatch { expected: dirs.n, got: x.len() });
    }
    let (stat, tau) = argmax_abs(dirs.contrasts(x));
    if tau == 0 {
        return Err(CpdError::EmptyScan);
    }
    Ok((stat, tau))
}

fn cached_slope_directions(n: usize) -> Result<Arc<GlrDirections>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlrDirections>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(d) = cache.lock().expect("direction cache poisoned").get(&n) {
        return Ok(Arc::clone(d));
    }
    let dirs = Arc::new(glr_directions(&ChangeDesign::slope_change(n)?)?);
    let mut guard = cache.lock().expect("direction cache poisoned");
    Ok(Arc::clone(guard.entry(n).or_insert(dirs)))
}

/// Single variance change around one global mean: returns
/// `max_{τ∈[2,n−2]} n log σ̂₀² − τ log σ̂₁² − (n−τ) log σ̂₂²` and its
/// smallest maximiser.
pub fn lr_variance_scan(x: &Series) -> Result<(f64, usize)> {
    let n = x.len();
    if n < 4 {
        return Err(CpdError::InvalidLength(format!("variance scan needs n >= 4, got {n}")));
    }
    let (stat, tau, _) = variance_scan_parts(x);
    Ok((stat, tau))
}

/// Returns (statistic, argmax τ, max log-likelihood of the change model).
fn variance_scan_parts(x: &[f64]) -> (f64, usize, f64) {
    let n = x.len();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += (v - mean) * (v - mean);
        prefix.push(acc);
    }
    let total = prefix[n];
    let s0 = (total / nf).max(VARIANCE_FLOOR);
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
    for tau in 2..=n - 2 {
        let t = tau as f64;
        let s1 = (prefix[tau] / t).max(VARIANCE_FLOOR);
        let s2 = ((total - prefix[tau]) / (nf - t)).max(VARIANCE_FLOOR);
        let stat = nf * s0.ln() - t * s1.ln() - (nf - t) * s2.ln();
        if stat > best.0 {
            let loglik = -0.5 * (nf * (2.0 * PI).ln() + t * s1.ln() + (nf - t) * s2.ln() + nf);
            best = (stat, tau, loglik);
        }
    }
    (best.0.max(0.0), best.1, best.2)
}

fn gaussian_loglik(rss: f64, n: usize) -> f64 {
    let nf = n as f64;
    let s2 = (rss / nf).max(VARIANCE_FLOOR);
    -0.5 * nf * ((2.0 * PI * s2).ln() + 1.0)
}

fn rss_about_mean(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean) * (v - mean)).sum()
}

fn rss_linear(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let tbar = (n + 1.0) / 2.0;
    let xbar = x.iter().sum::<f64>() / n;
    let (mut sxt, mut stt) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let dt = (i + 1) as f64 - tbar;
        sxt += dt * (v - xbar);
        stt += dt * dt;
    }
    (rss_about_mean(x) - sxt * sxt / stt).max(0.0)
}

/// Maximised Gaussian log-likelihood of each candidate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFits {
    pub constant: f64,
    pub mean_change: f64,
    pub variance_change: f64,
    pub linear: f64,
    pub slope_change: f64,
}

/// Free-parameter counts, σ counted once per model.
pub const BIC_PARAMS: [usize; 5] = [2, 4, 4, 3, 5];

pub fn model_fits(x: &Series) -> Result<ModelFits> {
    let n = x.len();
    if n < 4 {
        return Err(CpdError::InvalidLength(format!("model fits need n >= 4, got {n}")));
    }
    let rss0 = rss_about_mean(x);
    let (cusum_max, _) = cusum_statistic(x);
    let rss_mean = (rss0 - cusum_max * cusum_max).max(0.0);
    let (_, _, var_loglik) = variance_scan_parts(x);
    let rss_lin = rss_linear(x);
    let (slope_max, _) = glr_statistic(x, &*cached_slope_directions(n)?)?;
    let rss_slope = (rss_lin - slope_max * slope_max).max(0.0);
    Ok(ModelFits {
        constant: gaussian_loglik(rss0, n),
        mean_change: gaussian_loglik(rss_mean, n),
        variance_change: var_loglik,
        linear: gaussian_loglik(rss_lin, n),
        slope_change: gaussian_loglik(rss_slope, n),
    })
}

/// BIC values for classes 1..=5 (constant, mean change, variance change,
/// linear trend, slope change).
pub fn bic_values(x: &Series) -> Result<[f64; 5]> {
    let fits = model_fits(x)?;
    let ll = [fits.constant, fits.mean_change, fits.variance_change, fits.linear, fits.slope_change];
    let ln_n = (x.len() as f64).ln();
    Ok(std::array::from_fn(|k| -2.0 * ll[k] + BIC_PARAMS[k] as f64 * ln_n))
}

/// Minimum-BIC change type, as a class label in `1..=5`.
pub fn adaptive_classify(x: &Series) -> Result<usize> {
    let bic = bic_values(x)?;
    let mut best = 0;
    for k in 1..5 {
        if bic[k] < bic[best] {
            best = k;
        }
    }
    Ok(best + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Mean,
    Variance,
    Slope,
}

/// The type-specific scan statistic used by the oracle classifier.
pub fn oracle_statistic(x: &Series, kind: ChangeKind) -> Result<f64> {
    match kind {
        ChangeKind::Mean => Ok(cusum_statistic(x).0),
        ChangeKind::Variance => Ok(lr_variance_scan(x)?.0),
        ChangeKind::Slope => {
            if x.len() < 4 {
                return Err(CpdError::InvalidLength(format!("slope scan needs n >= 4, got {}", x.len())));
            }
            Ok(glr_statistic(x, &*cached_slope_directions(x.len())?)?.0)
        }
    }
}

/// `1{statistic > threshold}` for a pre-specified change type.
pub fn oracle_classify(x: &Series, kind: ChangeKind, threshold: f64) -> Result<u8> {
    if !(threshold > 0.0) {
        return Err(CpdError::InvalidThreshold(format!("threshold must be positive, got {threshold}")));
    }
    Ok(u8::from(oracle_statistic(x, kind)? > threshold))
}
