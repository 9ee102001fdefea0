// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::cusum::{
    cusum_basis, cusum_star_statistic, cusum_statistic, grid_neighbourhood_ratio, threshold, ThresholdKind,
};
use crate::error::Result;
use crate::eval::{monte_carlo_bound_check, BoundCheck, BoundReport, LocalisationBound, LocalisationTrial};
use crate::glr::{glr_directions, ChangeDesign};
use crate::nn::{embed_cusum, grad_check, Architecture, CusumVariant, Network, Preprocess};
use crate::par;
use crate::rng::{child_seed, rng_from_seed, tagged_seed};
use crate::series::Series;

/// Inputs closer than this to the threshold are not compared.
pub const EMBED_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingRow {
    pub n: usize,
    pub lambda: f64,
    pub inputs: usize,
    pub positives: usize,
    pub full_disagreements: usize,
    pub full_skipped: usize,
    pub star_disagreements: usize,
    pub star_skipped: usize,
    /// Largest `min(|d − v|, |d + v|)` between GLR mean directions and CUSUM vectors.
    pub glr_max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub seed: u64,
    pub rows: Vec<EmbeddingRow>,
}

pub const EMBEDDING_LENGTHS: [usize; 3] = [2, 10, 100];
pub const EMBEDDING_INPUTS: usize = 10_000;

/// Noise plus a random step; step sizes are spread so that both labels occur.
fn embedding_input(n: usize, lambda: f64, seed: u64) -> Series {
    let mut rng = rng_from_seed(seed);
    let tau = rng.random_range(1..n);
    let delta = rng.random_range(-2.0..2.0) * 2.0 * lambda / (n as f64).sqrt();
    Series::new(
        (1..=n).map(|t| Distribution::<f64>::sample(&StandardNormal, &mut rng) + if t > tau { delta } else { 0.0 }).collect::<Vec<f64>>(),
    )
    .expect("finite input")
}

pub fn embedding(seed: u64) -> Result<EmbeddingReport> {
    let mut rows = Vec::new();
    for n in EMBEDDING_LENGTHS {
        let lambda = threshold(n, ThresholdKind::Null { eps: 0.05 })?;
        let full = embed_cusum(n, lambda, CusumVariant::Full)?;
        let star = embed_cusum(n, lambda, CusumVariant::Star)?;
        let base = child_seed(seed, n as u64);
        let outcomes = par::try_map_range(EMBEDDING_INPUTS, |k| {
            let x = embedding_input(n, lambda, child_seed(base, k as u64));
            let s_full = cusum_statistic(&x).0;
            let s_star = cusum_star_statistic(&x)?.0;
            let compare = |stat: f64, net: &Network| -> Result<Option<bool>> {
                if (stat - lambda).abs() <= EMBED_MARGIN {
                    return Ok(None);
                }
                Ok(Some(net.classify(&x)? == usize::from(stat > lambda)))
            };
            Ok::<_, crate::CpdError>((s_full > lambda, compare(s_full, &full)?, compare(s_star, &star)?))
        })?;
        let count = |f: &dyn Fn(&(bool, Option<bool>, Option<bool>)) -> bool| outcomes.iter().filter(|o| f(o)).count();

        let basis = cusum_basis(n)?;
        let dirs = glr_directions(&ChangeDesign::mean_change(n)?)?;
        let mut dev = 0.0f64;
        for tau in 1..n {
            let d = dirs.direction(tau).expect("mean directions are never degenerate");
            let v = basis.vector(tau);
            let same = d.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let flip = d.iter().zip(v).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            dev = dev.max(same.min(flip));
        }
        rows.push(EmbeddingRow {
            n,
            lambda,
            inputs: EMBEDDING_INPUTS,
            positives: count(&|o| o.0),
            full_disagreements: count(&|o| o.1 == Some(false)),
            full_skipped: count(&|o| o.1.is_none()),
            star_disagreements: count(&|o| o.2 == Some(false)),
            star_skipped: count(&|o| o.2.is_none()),
            glr_max_deviation: dev,
        });
    }
    Ok(EmbeddingReport { seed, rows })
}

pub const MC_REPS: usize = 20_000;

#[derive(Debug, Clone, Serialize)]
pub struct Lemma3Report {
    pub seed: u64,
    pub null_false_positive: BoundReport,
    pub alternative_miss: BoundReport,
}

pub fn lemma3(seed: u64) -> Result<Lemma3Report> {
    let a = BoundCheck::Lemma3a { n: 100, eps: 0.05, lambda: None };
    let b = BoundCheck::Lemma3b { n: 100, eps: 0.05, snr_factor: 1.05 };
    Ok(Lemma3Report {
        seed,
        null_false_positive: monte_carlo_bound_check(&a, MC_REPS, tagged_seed(seed, "lemma3a"))?,
        alternative_miss: monte_carlo_bound_check(&b, MC_REPS, tagged_seed(seed, "lemma3b"))?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    pub seed: u64,
    pub check: BoundReport,
}

pub fn corollary1(seed: u64) -> Result<CorollaryReport> {
    let k = BoundCheck::Corollary1 { n: 100, b: 0.8 };
    Ok(CorollaryReport { seed, check: monte_carlo_bound_check(&k, MC_REPS, tagged_seed(seed, "corollary1"))? })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridLemmaRow {
    pub n: usize,
    pub worst_ratio: f64,
    pub worst_tau: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridLemmaReport {
    pub bound: f64,
    pub tolerance: f64,
    pub lengths_checked: usize,
    pub cases_checked: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    /// The worst case of each length that is a power of two.
    pub rows: Vec<GridLemmaRow>,
}

/// Relative slack allowed for the equality case `τ = n/2`.
pub const GRID_TOLERANCE: f64 = 1e-12;

pub fn grid_lemma() -> Result<GridLemmaReport> {
    let bound = 3f64.sqrt() / 3.0;
    let per_n = par::try_map_range(512 - 16 + 1, |k| {
        let n = 16 + k;
        let mut worst = (f64::INFINITY, 0);
        let mut violations = 0;
        for tau in 1..n {
            let r = grid_neighbourhood_ratio(n, tau)?;
            if r < bound * (1.0 - GRID_TOLERANCE) {
                violations += 1;
            }
            if r < worst.0 {
                worst = (r, tau);
            }
        }
        Ok::<_, crate::CpdError>((n, worst, violations))
    })?;
    Ok(GridLemmaReport {
        bound,
        tolerance: GRID_TOLERANCE,
        lengths_checked: per_n.len(),
        cases_checked: per_n.iter().map(|(n, _, _)| n - 1).sum(),
        violations: per_n.iter().map(|(_, _, v)| v).sum(),
        worst_ratio: per_n.iter().map(|(_, w, _)| w.0).fold(f64::INFINITY, f64::min),
        rows: per_n
            .iter()
            .filter(|(n, _, _)| n.is_power_of_two())
            .map(|&(n, (r, t), _)| GridLemmaRow { n, worst_ratio: r, worst_tau: t })
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub networks: usize,
    pub step: f64,
    pub max_relative_error: f64,
    pub over_tolerance: usize,
    pub errors: Vec<f64>,
}

pub const GRADCHECK_NETWORKS: usize = 100;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Random architecture, Glorot weights, N(0, 0.1²) biases, N(0,1) inputs.
fn random_case(seed: u64) -> Result<(Network, DMatrix<f64>, Vec<usize>)> {
    let mut rng = rng_from_seed(seed);
    let d = rng.random_range(2..=10);
    let depth = rng.random_range(1..=3);
    let widths: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=8)).collect();
    let out = if rng.random_bool(0.5) { 1 } else { rng.random_range(3..=4) };
    let mut net = Network::init(Architecture::new(d, &widths, out)?, Preprocess::identity(), rng.random())?;
    for layer in net.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
    }
    let batch = rng.random_range(3..=8);
    let x = DMatrix::from_fn(d, batch, |_, _| StandardNormal.sample(&mut rng));
    let labels = (0..batch).map(|_| if out == 1 { rng.random_range(0..=1) } else { rng.random_range(1..=out) }).collect();
    Ok((net, x, labels))
}

pub fn gradcheck(seed: u64) -> Result<GradcheckReport> {
    let step = 1e-5;
    let errors = par::try_map_range(GRADCHECK_NETWORKS, |k| {
        let (net, x, labels) = random_case(child_seed(seed, k as u64))?;
        grad_check(&net, &x, &labels, step)
    })?;
    Ok(GradcheckReport {
        seed,
        networks: GRADCHECK_NETWORKS,
        step,
        max_relative_error: errors.iter().copied().fold(0.0, f64::max),
        over_tolerance: errors.iter().filter(|&&e| e > GRADCHECK_TOLERANCE).count(),
        errors,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalisationReport {
    pub seed: u64,
    /// Tolerance `2B²/Δ²`, jumps in `[6B, 7B]`.
    pub literal: BoundReport,
    pub literal_success: f64,
    /// Tolerance `2nB²/Δ²`, jumps just above `2√2B`.
    pub window_scaled: BoundReport,
    pub window_scaled_success: f64,
}

pub const LOCALISATION_REPS: usize = 500;

pub fn thm_localisation(seed: u64) -> Result<LocalisationReport> {
    let literal = LocalisationTrial::standard();
    let scaled = LocalisationTrial {
        jump_multiples: (2.0 * std::f64::consts::SQRT_2 * 1.01, 2.0 * std::f64::consts::SQRT_2 * 1.5),
        bound: LocalisationBound::WindowScaled,
        ..literal
    };
    let a =
        monte_carlo_bound_check(&BoundCheck::TheoremLocalisation(literal), LOCALISATION_REPS, tagged_seed(seed, "literal"))?;
    let b = monte_carlo_bound_check(
        &BoundCheck::TheoremLocalisation(scaled),
        LOCALISATION_REPS,
        tagged_seed(seed, "window-scaled"),
    )?;
    Ok(LocalisationReport {
        seed,
        literal_success: 1.0 - a.empirical,
        literal: a,
        window_scaled_success: 1.0 - b.empirical,
        window_scaled: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lemma_has_no_violations() {
        let r = grid_lemma().unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.lengths_checked, 497);
        assert!((r.worst_ratio - r.bound).abs() < 1e-12);
    }

    #[test]
    fn random_gradchecks_small() {
        for k in 0..5 {
            let (net, x, labels) = random_case(k).unwrap();
            assert!(grad_check(&net, &x, &labels, 1e-5).unwrap() <= GRADCHECK_TOLERANCE);
        }
    }
}
