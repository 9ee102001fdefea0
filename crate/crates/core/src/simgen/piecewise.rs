// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::symmetric_uniform;
use super::{snr_base, Example, ExampleMeta, LabelSpace, LabeledDataset};
use crate::error::{CpdError, Result};
use crate::par;
use crate::rng::{child_seed, rng_from_seed, tagged_seed};
use crate::series::Series;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian { sd: f64 },
    Cauchy { scale: f64 },
}

impl NoiseSpec {
    fn sampler(&self) -> Result<Box<dyn Fn(&mut crate::rng::CpdRng) -> f64 + Send + Sync>> {
        match *self {
            NoiseSpec::Gaussian { sd } if sd > 0.0 && sd.is_finite() => {
                let d = Normal::new(0.0, sd).expect("valid normal");
                Ok(Box::new(move |r| d.sample(r)))
            }
            NoiseSpec::Cauchy { scale } if scale > 0.0 && scale.is_finite() => {
                let d = Cauchy::new(0.0, scale).expect("valid cauchy");
                Ok(Box::new(move |r| d.sample(r)))
            }
            other => Err(CpdError::param(format!("invalid noise spec {other:?}"))),
        }
    }
}

/// Piecewise-constant mean series. Segment `r` covers
/// `τ_{r−1} < t ≤ τ_r` (1-based), with `τ_0 = 0`, `τ_{ν+1} = n*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSeries {
    pub series: Series,
    pub taus: Vec<usize>,
    pub means: Vec<f64>,
    pub seed: u64,
}

impl PiecewiseSeries {
    /// `|μ^{(r)} − μ^{(r−1)}|` for each change.
    pub fn jumps(&self) -> Vec<f64> {
        self.means.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
    }
}

/// `min_spacing` is the smallest admissible segment length (2n for a
/// downstream window of length n).
pub fn gen_piecewise(
    n_star: usize,
    taus: &[usize],
    means: &[f64],
    noise: NoiseSpec,
    min_spacing: usize,
    seed: u64,
) -> Result<PiecewiseSeries> {
    if means.len() != taus.len() + 1 {
        return Err(CpdError::param(format!(
            "need {} segment means for {} changes, got {}",
            taus.len() + 1,
            taus.len(),
            means.len()
        )));
    }
    if means.iter().any(|m| !m.is_finite()) {
        return Err(CpdError::param("segment means must be finite"));
    }
    let mut prev = 0;
    for &t in taus.iter().chain(std::iter::once(&n_star)) {
        if t <= prev || t - prev < min_spacing.max(1) {
            return Err(CpdError::param(format!(
                "segment ({prev}, {t}] shorter than the required spacing {min_spacing}"
            )));
        }
        prev = t;
    }
    let sample = noise.sampler()?;
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n_star);
    let mut seg = 0;
    for t in 1..=n_star {
        if seg < taus.len() && t > taus[seg] {
            seg += 1;
        }
        values.push(means[seg] + sample(&mut rng));
    }
    Ok(PiecewiseSeries { series: Series::new(values)?, taus: taus.to_vec(), means: means.to_vec(), seed })
}

/// Jump multipliers of the long single-change series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrBand {
    /// `|μ_R| ∈ [0.5b, 1.5b]`.
    Weak,
    /// `|μ_R| ∈ [b, 3b]`.
    Strong,
}

impl SnrBand {
    pub fn multipliers(&self) -> (f64, f64) {
        match self {
            SnrBand::Weak => (0.5, 1.5),
            SnrBand::Strong => (1.0, 3.0),
        }
    }
}

/// `count` series of length `n_star` with one change at τ ~ U{lo..=hi},
/// `μ_L = 0`, `μ_R` from the band, and the given noise.
pub fn gen_single_change_long(
    n_star: usize,
    tau_range: (usize, usize),
    band: SnrBand,
    noise: NoiseSpec,
    count: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let (lo, hi) = tau_range;
    if !(1 <= lo && lo <= hi && hi < n_star) {
        return Err(CpdError::param(format!("invalid change range {lo}..={hi} for n* = {n_star}")));
    }
    let sample = noise.sampler()?;
    let base = tagged_seed(seed, "long");
    let examples = par::try_map_range(count, |k| {
        let ex_seed = child_seed(base, k as u64);
        let mut rng = rng_from_seed(ex_seed);
        let tau = rng.random_range(lo..=hi);
        let b = snr_base(n_star, tau)?;
        let (a, c) = band.multipliers();
        let mu_right = symmetric_uniform(&mut rng, a * b, c * b);
        let values: Vec<f64> =
            (1..=n_star).map(|t| if t > tau { mu_right } else { 0.0 } + sample(&mut rng)).collect();
        let meta = ExampleMeta::new(Some(tau), ex_seed).with("mu_left", 0.0).with("mu_right", mu_right).with("b", b);
        Ok::<_, CpdError>(Example { series: Series::new(values)?, label: 1, meta })
    })?;
    Ok(LabeledDataset { n: n_star, labels: LabelSpace::Binary, examples })
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: NoiseSpec = NoiseSpec::Gaussian { sd: 1.0 };

    #[test]
    fn single_segment_is_pure_noise() {
        let p = gen_piecewise(500, &[], &[2.0], G, 200, 1).unwrap();
        assert!(p.taus.is_empty());
        assert!((p.series.mean() - 2.0).abs() < 0.3);
    }

    #[test]
    fn metadata_round_trip() {
        let p = gen_piecewise(3500, &[990, 1691, 2733], &[0.0, 3.0, -1.0, 2.0], G, 200, 42).unwrap();
        assert_eq!(p.taus, vec![990, 1691, 2733]);
        assert_eq!(p.means, vec![0.0, 3.0, -1.0, 2.0]);
        assert_eq!(p.jumps(), vec![3.0, 4.0, 3.0]);
        let json = serde_json::to_string(&p).unwrap();
        let back: PiecewiseSeries = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert_eq!(p, gen_piecewise(3500, &[990, 1691, 2733], &[0.0, 3.0, -1.0, 2.0], G, 200, 42).unwrap());
    }

    #[test]
    fn segment_boundaries() {
        let p = gen_piecewise(40, &[20], &[0.0, 1000.0], NoiseSpec::Gaussian { sd: 1e-6 }, 10, 0).unwrap();
        assert!(p.series[19] < 1.0);
        assert!(p.series[20] > 999.0);
    }

    #[test]
    fn spacing_violations() {
        assert!(gen_piecewise(1000, &[100, 150], &[0.0, 1.0, 2.0], G, 100, 0).is_err());
        assert!(gen_piecewise(1000, &[950], &[0.0, 1.0], G, 100, 0).is_err());
        assert!(gen_piecewise(1000, &[500, 400], &[0.0, 1.0, 0.0], G, 10, 0).is_err());
        assert!(gen_piecewise(1000, &[500], &[0.0], G, 10, 0).is_err());
    }

    #[test]
    fn long_series_bands() {
        for band in [SnrBand::Weak, SnrBand::Strong] {
            let d = gen_single_change_long(2000, (750, 1250), band, G, 50, 3).unwrap();
            let (a, c) = band.multipliers();
            for e in &d.examples {
                let b = e.meta.param("b").unwrap();
                let m = e.meta.param("mu_right").unwrap().abs();
                assert!(m >= a * b - 1e-12 && m <= c * b + 1e-12);
                assert!((750..=1250).contains(&e.meta.tau.unwrap()));
            }
        }
    }
}
