// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gen_changetype, shuffle_in_place, ChangeParams, Example, LabelSpace, LabeledDataset};
use crate::error::{CpdError, Result};
use crate::par;
use crate::rng::{child_seed, rng_from_seed, tagged_seed, CpdRng};

const MAX_ATTEMPTS: usize = 1_000_000;

/// Noise sd for the mean-change and no-change classes.
pub const MEAN_NOISE_SD: f64 = 0.7;
/// Noise sd for the slope classes.
pub const SLOPE_NOISE_SD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Weak,
    Strong,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weak" => Ok(Regime::Weak),
            "strong" => Ok(Regime::Strong),
            other => Err(CpdError::param(format!("unknown regime `{other}`"))),
        }
    }
}

/// Values drawn from `U(lower, upper)`, pairs constrained to
/// `diff_lower ≤ |a − b| ≤ diff_upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lower: f64,
    pub upper: f64,
    pub diff_lower: f64,
    pub diff_upper: f64,
}

impl ParamRange {
    pub const fn new(lower: f64, upper: f64, diff_lower: f64, diff_upper: f64) -> Self {
        ParamRange { lower, upper, diff_lower, diff_upper }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.lower < self.upper
            && self.diff_lower < self.diff_upper
            && self.diff_lower >= 0.0
            && self.diff_lower < self.upper - self.lower
            && [self.lower, self.upper, self.diff_lower, self.diff_upper].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(CpdError::param(format!("invalid {name} range {self:?}")))
        }
    }

    fn single(&self, rng: &mut CpdRng) -> f64 {
        rng.random_range(self.lower..self.upper)
    }

    fn pair(&self, rng: &mut CpdRng) -> Result<(f64, f64)> {
        for _ in 0..MAX_ATTEMPTS {
            let a = self.single(rng);
            let b = self.single(rng);
            let d = (a - b).abs();
            if d >= self.diff_lower && d <= self.diff_upper {
                return Ok((a, b));
            }
        }
        Err(CpdError::Generation(format!("no admissible pair for {self:?} after {MAX_ATTEMPTS} attempts")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSpec {
    pub regime: Regime,
    pub n: usize,
    /// Examples per class.
    pub n_sub: usize,
    /// τ is drawn from `margin + 1 ..= n − margin`.
    pub margin: usize,
    pub mean: ParamRange,
    pub sigma: ParamRange,
    pub phi: ParamRange,
}

impl MulticlassSpec {
    /// Standard ranges with `n = 400`, margin 40.
    pub fn table(regime: Regime, n_sub: usize) -> Self {
        let (mean, sigma, phi) = match regime {
            Regime::Weak => (
                ParamRange::new(-5.0, 5.0, 0.25, 0.5),
                ParamRange::new(0.3, 0.7, 0.12, 0.24),
                ParamRange::new(-0.025, 0.025, 0.006, 0.012),
            ),
            Regime::Strong => (
                ParamRange::new(-5.0, 5.0, 0.6, 1.2),
                ParamRange::new(0.3, 0.7, 0.2, 0.4),
                ParamRange::new(-0.025, 0.025, 0.015, 0.03),
            ),
        };
        MulticlassSpec { regime, n: 400, n_sub, margin: 40, mean, sigma, phi }
    }

    pub fn with_n(mut self, n: usize, margin: usize) -> Self {
        self.n = n;
        self.margin = margin;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_sub == 0 {
            return Err(CpdError::param("n_sub must be positive"));
        }
        if self.margin < 1 || 2 * self.margin >= self.n {
            return Err(CpdError::param(format!("margin {} invalid for n = {}", self.margin, self.n)));
        }
        self.mean.validate("mean")?;
        self.sigma.validate("sigma")?;
        self.phi.validate("phi")?;
        if self.sigma.lower <= 0.0 {
            return Err(CpdError::param("sigma range must be positive"));
        }
        Ok(())
    }
}

/// Labels: 1 no change, 2 mean change, 3 variance change, 4 constant
/// non-zero slope, 5 slope change.
pub fn gen_multiclass(spec: &MulticlassSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let base = tagged_seed(seed, "multiclass");
    let total = 5 * spec.n_sub;
    let mut examples = par::try_map_range(total, |k| {
        let label = k / spec.n_sub + 1;
        let ex_seed = child_seed(base, k as u64);
        let mut rng = rng_from_seed(ex_seed);
        let tau = rng.random_range(spec.margin + 1..=spec.n - spec.margin);
        let n = spec.n;
        let params = match label {
            1 => {
                let mu = spec.mean.single(&mut rng);
                ChangeParams::Mean { n, tau: None, mu_left: mu, mu_right: mu, noise_sd: MEAN_NOISE_SD }
            }
            2 => {
                let (l, r) = spec.mean.pair(&mut rng)?;
                ChangeParams::Mean { n, tau: Some(tau), mu_left: l, mu_right: r, noise_sd: MEAN_NOISE_SD }
            }
            3 => {
                let (s1, s2) = spec.sigma.pair(&mut rng)?;
                ChangeParams::Variance { n, tau: Some(tau), mu: 0.0, sigma1: s1, sigma2: s2 }
            }
            4 => {
                let phi = spec.phi.single(&mut rng);
                ChangeParams::Slope { n, tau: None, phi1: phi, phi2: phi, noise_sd: SLOPE_NOISE_SD }
            }
            _ => {
                let (p1, p2) = spec.phi.pair(&mut rng)?;
                ChangeParams::Slope { n, tau: Some(tau), phi1: p1, phi2: p2, noise_sd: SLOPE_NOISE_SD }
            }
        };
        let (series, mut meta) = gen_changetype(&params, child_seed(ex_seed, 1))?;
        meta.seed = ex_seed;
        Ok::<_, CpdError>(Example { series, label, meta })
    })?;
    shuffle_in_place(&mut examples, tagged_seed(seed, "multiclass-shuffle"));
    Ok(LabeledDataset { n: spec.n, labels: LabelSpace::Multiclass { classes: 5 }, examples })
}

/// Class 1: `N(μ_L, σ₁²)` throughout. Class 2: mean and variance both change
/// at τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousSpec {
    pub n: usize,
    pub per_class: usize,
    pub tau_min: usize,
    pub tau_max: usize,
    pub mean: ParamRange,
    pub sigma: ParamRange,
}

impl SimultaneousSpec {
    /// `n = 400`, τ ~ U{40..n−41}, mean and sigma ranges from the multiclass table.
    pub fn table(regime: Regime, per_class: usize) -> Self {
        let t = MulticlassSpec::table(regime, 1);
        SimultaneousSpec { n: 400, per_class, tau_min: 40, tau_max: 400 - 41, mean: t.mean, sigma: t.sigma }
    }
}

pub fn gen_simultaneous(spec: &SimultaneousSpec, seed: u64) -> Result<LabeledDataset> {
    if spec.per_class == 0 {
        return Err(CpdError::param("per_class must be positive"));
    }
    if !(1 <= spec.tau_min && spec.tau_min <= spec.tau_max && spec.tau_max < spec.n) {
        return Err(CpdError::param("change range must satisfy 1 <= tau_min <= tau_max < n"));
    }
    spec.mean.validate("mean")?;
    spec.sigma.validate("sigma")?;
    let base = tagged_seed(seed, "simultaneous");
    let mut examples = par::try_map_range(2 * spec.per_class, |k| {
        let label = k / spec.per_class + 1;
        let ex_seed = child_seed(base, k as u64);
        let mut rng = rng_from_seed(ex_seed);
        let tau = rng.random_range(spec.tau_min..=spec.tau_max);
        let (mu_left, mu_right) = spec.mean.pair(&mut rng)?;
        let (sigma1, sigma2) = spec.sigma.pair(&mut rng)?;
        let params = if label == 1 {
            ChangeParams::Simultaneous { n: spec.n, tau: None, mu_left, mu_right: mu_left, sigma1, sigma2: sigma1 }
        } else {
            ChangeParams::Simultaneous { n: spec.n, tau: Some(tau), mu_left, mu_right, sigma1, sigma2 }
        };
        let (series, mut meta) = gen_changetype(&params, child_seed(ex_seed, 1))?;
        meta.seed = ex_seed;
        Ok::<_, CpdError>(Example { series, label, meta })
    })?;
    shuffle_in_place(&mut examples, tagged_seed(seed, "simultaneous-shuffle"));
    Ok(LabeledDataset { n: spec.n, labels: LabelSpace::Multiclass { classes: 2 }, examples })
}
