// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cusum::{
    centred_prefix, contrast_from_prefix, error_bound, threshold, BoundKind, ThresholdKind,
};
use crate::error::{CpdError, Result};
use crate::localise::{localise, CusumStarWindow};
use crate::par;
use crate::rng::{child_seed, rng_from_seed, CpdRng};
use crate::simgen::{gen_piecewise, NoiseSpec};

/// Fewest replications accepted by the single-series checks.
pub const MIN_REPS: usize = 1000;
/// Fewest replications accepted by the localisation check (each rep is a long series).
pub const MIN_LOCALISATION_REPS: usize = 100;

/// Which tolerance `|τ̂_r − τ_r|` the localisation check applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalisationBound {
    /// `2B²/Δ_r²`.
    Literal,
    /// `2nB²/Δ_r²`, the same bound measured in window units.
    WindowScaled,
}

/// One replication: `ν` changes spread evenly over `n_star` with uniform
/// jitter, jumps `±U[lo·B, hi·B]` with random signs, N(0,1) noise, then
/// Algorithm 1 with CUSUM* at `B√(3n)/6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalisationTrial {
    pub window: usize,
    pub b: f64,
    pub n_star: usize,
    pub nu: usize,
    /// Jump magnitudes as multiples of B.
    pub jump_multiples: (f64, f64),
    pub jitter: usize,
    pub gamma: f64,
    pub bound: LocalisationBound,
}

impl LocalisationTrial {
    pub fn standard() -> Self {
        LocalisationTrial {
            window: 100,
            b: 1.79,
            n_star: 1000,
            nu: 3,
            jump_multiples: (6.0, 7.0),
            jitter: 25,
            gamma: 0.5,
            bound: LocalisationBound::Literal,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.jump_multiples;
        if !(lo > 2.0 * std::f64::consts::SQRT_2 && lo <= hi && hi.is_finite()) {
            return Err(CpdError::param(format!("jump multiples must satisfy 2√2 < lo <= hi, got ({lo}, {hi})")));
        }
        if self.nu == 0 {
            return Err(CpdError::param("need at least one change"));
        }
        let spacing = self.n_star / (self.nu + 1);
        if spacing < 2 * self.window + 2 * self.jitter {
            return Err(CpdError::param(format!(
                "n* = {} leaves segments shorter than 2n = {} after jitter {}",
                self.n_star,
                2 * self.window,
                self.jitter
            )));
        }
        Ok(())
    }

    fn tolerance(&self, jump: f64) -> f64 {
        let base = 2.0 * self.b * self.b / (jump * jump);
        match self.bound {
            LocalisationBound::Literal => base,
            LocalisationBound::WindowScaled => self.window as f64 * base,
        }
    }

    /// `true` when `ν̂ = ν` and every `|τ̂_r − τ_r|` is within tolerance.
    pub fn run(&self, psi: &CusumStarWindow, seed: u64) -> Result<bool> {
        let mut rng = rng_from_seed(seed);
        let spacing = self.n_star / (self.nu + 1);
        let j = self.jitter as i64;
        let taus: Vec<usize> =
            (1..=self.nu).map(|r| (r * spacing) as i64 + rng.random_range(-j..=j)).map(|t| t as usize).collect();
        let (lo, hi) = self.jump_multiples;
        let mut means = vec![0.0];
        for _ in 0..self.nu {
            let size = self.b * rng.random_range(lo..=hi);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            means.push(means.last().unwrap() + sign * size);
        }
        let p = gen_piecewise(self.n_star, &taus, &means, NoiseSpec::Gaussian { sd: 1.0 }, 2 * self.window, rng.random())?;
        let est = localise(&p.series, psi, self.gamma)?;
        if est.taus.len() != self.nu {
            return Ok(false);
        }
        Ok(est
            .taus
            .iter()
            .zip(&p.taus)
            .zip(p.jumps())
            .all(|((&hat, &tau), d)| (hat.abs_diff(tau) as f64) <= self.tolerance(d)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundCheck {
    /// False-positive rate on N(0, I_n) at `λ` (default `√(2 log(n/ε))`); bound ε.
    Lemma3a { n: usize, eps: f64, lambda: Option<f64> },
    /// Miss rate at `SNR = factor·√(8 log(n/ε)/n)` (τ uniform, random sign); bound ε.
    Lemma3b { n: usize, eps: f64, snr_factor: f64 },
    /// Misclassification at `λ = B√n/2` over a Θ(B) prior: half null, half
    /// with SNR just above B; bound `n e^{−nB²/8}`.
    Corollary1 { n: usize, b: f64 },
    /// Failure rate of Algorithm 1; bound `2n*⌊log₂ n⌋ e^{−nB²/24}`.
    TheoremLocalisation(LocalisationTrial),
}

impl BoundCheck {
    pub fn name(&self) -> &'static str {
        match self {
            BoundCheck::Lemma3a { .. } => "lemma3a",
            BoundCheck::Lemma3b { .. } => "lemma3b",
            BoundCheck::Corollary1 { .. } => "corollary1",
            BoundCheck::TheoremLocalisation(_) => "theorem_localisation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: String,
    pub check: BoundCheck,
    /// Fraction of failing replications.
    pub empirical: f64,
    pub failures: usize,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
    pub reps: usize,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

/// Multiplier on the binomial standard error.
const SIGMAS: f64 = 3.0;

/// SNR excess over B used by the Θ(B) prior.
const PRIOR_MARGIN: f64 = 1.001;

fn gaussian(n: usize, rng: &mut CpdRng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn cusum_max(x: &[f64]) -> f64 {
    let n = x.len();
    let prefix = centred_prefix(x);
    (1..n).map(|i| contrast_from_prefix(&prefix, n, i).abs()).fold(0.0, f64::max)
}

/// A step of SNR `snr` at a uniform `τ` with a random sign, plus N(0,1) noise.
fn noisy_step(n: usize, snr: f64, rng: &mut CpdRng) -> Vec<f64> {
    let tau = rng.random_range(1..n);
    let eta = tau as f64 / n as f64;
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let delta = sign * snr / (eta * (1.0 - eta)).sqrt();
    let mut x = gaussian(n, rng);
    for v in &mut x[tau..] {
        *v += delta;
    }
    x
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(CpdError::InvalidLength(format!("n must be >= 2, got {n}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CpdError::param(format!("eps must lie in (0,1), got {eps}")));
    }
    Ok(())
}

/// Runs `reps` seeded replications and compares the failure rate with the
/// closed-form bound plus a one-sided 3σ binomial slack.
pub fn monte_carlo_bound_check(kind: &BoundCheck, reps: usize, seed: u64) -> Result<BoundReport> {
    let min = match kind {
        BoundCheck::TheoremLocalisation(_) => MIN_LOCALISATION_REPS,
        _ => MIN_REPS,
    };
    if reps < min {
        return Err(CpdError::param(format!("{} needs at least {min} replications, got {reps}", kind.name())));
    }
    let mut params = BTreeMap::new();
    let rep_seed = |r: usize| child_seed(seed, r as u64);

    let (failures, bound) = match *kind {
        BoundCheck::Lemma3a { n, eps, lambda } => {
            check_n(n)?;
            check_eps(eps)?;
            let lam = match lambda {
                Some(l) if l > 0.0 && !l.is_nan() => l,
                Some(l) => return Err(CpdError::InvalidThreshold(format!("lambda must be positive, got {l}"))),
                None => threshold(n, ThresholdKind::Null { eps })?,
            };
            params.insert("lambda".into(), lam);
            let hits = par::map_range(reps, |r| cusum_max(&gaussian(n, &mut rng_from_seed(rep_seed(r)))) > lam);
            (hits.into_iter().filter(|&h| h).count(), eps)
        }
        BoundCheck::Lemma3b { n, eps, snr_factor } => {
            check_n(n)?;
            check_eps(eps)?;
            if !(snr_factor > 1.0 && snr_factor.is_finite()) {
                return Err(CpdError::param(format!("snr factor must exceed 1, got {snr_factor}")));
            }
            let lam = threshold(n, ThresholdKind::Null { eps })?;
            let snr = snr_factor * (8.0 * (n as f64 / eps).ln() / n as f64).sqrt();
            params.insert("lambda".into(), lam);
            params.insert("snr".into(), snr);
            let misses = par::map_range(reps, |r| {
                cusum_max(&noisy_step(n, snr, &mut rng_from_seed(rep_seed(r)))) <= lam
            });
            (misses.into_iter().filter(|&m| m).count(), eps)
        }
        BoundCheck::Corollary1 { n, b } => {
            check_n(n)?;
            let lam = threshold(n, ThresholdKind::Corollary { b })?;
            let bound = error_bound(n, b, BoundKind::Cusum)?;
            params.insert("lambda".into(), lam);
            params.insert("b".into(), b);
            let wrong = par::map_range(reps, |r| {
                let mut rng = rng_from_seed(rep_seed(r));
                if rng.random_bool(0.5) {
                    cusum_max(&noisy_step(n, PRIOR_MARGIN * b, &mut rng)) <= lam
                } else {
                    cusum_max(&gaussian(n, &mut rng)) > lam
                }
            });
            (wrong.into_iter().filter(|&w| w).count(), bound)
        }
        BoundCheck::TheoremLocalisation(trial) => {
            trial.validate()?;
            let n = trial.window;
            let lam = threshold(n, ThresholdKind::Star { b: trial.b })?;
            let psi = CusumStarWindow::new(n, lam)?;
            let bound = 2.0 * trial.n_star as f64 * f64::from(n.ilog2()) * (-(n as f64) * trial.b * trial.b / 24.0).exp();
            params.insert("lambda_star".into(), lam);
            params.insert("b".into(), trial.b);
            let ok = par::try_map_range(reps, |r| trial.run(&psi, rep_seed(r)))?;
            (ok.into_iter().filter(|&s| !s).count(), bound)
        }
    };

    let empirical = failures as f64 / reps as f64;
    let b = bound.clamp(0.0, 1.0);
    let slack = SIGMAS * (b * (1.0 - b) / reps as f64).sqrt();
    Ok(BoundReport {
        kind: kind.name().into(),
        check: *kind,
        empirical,
        failures,
        bound,
        slack,
        pass: empirical <= bound + slack,
        reps,
        seed,
        params,
    })
}
