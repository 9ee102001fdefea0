// SPDX-License-Identifier: MIT OR Apache-2.0

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ExampleMeta;
use crate::error::{CpdError, Result};
use crate::rng::rng_from_seed;
use crate::series::Series;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeTypeKind {
    Mean,
    Slope,
    Variance,
    Simultaneous,
    ArCoeff,
}

impl ChangeTypeKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mean" => Ok(ChangeTypeKind::Mean),
            "slope" => Ok(ChangeTypeKind::Slope),
            "variance" => Ok(ChangeTypeKind::Variance),
            "simultaneous" => Ok(ChangeTypeKind::Simultaneous),
            "ar_coeff" | "ar" => Ok(ChangeTypeKind::ArCoeff),
            other => Err(CpdError::param(format!("unknown change type `{other}`"))),
        }
    }
}

/// Parameters of one series. `tau = None` means no change; the pre-change
/// parameters then apply throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChangeParams {
    /// `μ_L` for `t ≤ τ`, `μ_R` after, plus `N(0, sd²)` noise.
    Mean { n: usize, tau: Option<usize>, mu_left: f64, mu_right: f64, noise_sd: f64 },
    /// `φ₁ t` for `t ≤ τ`, `(φ₁ − φ₂)τ + φ₂ t` after, plus `N(0, sd²)` noise.
    Slope { n: usize, tau: Option<usize>, phi1: f64, phi2: f64, noise_sd: f64 },
    /// `μ + N(0, σ₁²)` for `t ≤ τ`, `μ + N(0, σ₂²)` after.
    Variance { n: usize, tau: Option<usize>, mu: f64, sigma1: f64, sigma2: f64 },
    /// `N(μ_L, σ₁²)` for `t ≤ τ`, `N(μ_R, σ₂²)` after.
    Simultaneous { n: usize, tau: Option<usize>, mu_left: f64, mu_right: f64, sigma1: f64, sigma2: f64 },
    /// `x_t = α_t x_{t−1} + ε_t`, `α_t = α_before` for `t < τ`, `α_after` from `τ`.
    ArCoeff { n: usize, tau: Option<usize>, alpha_before: f64, alpha_after: f64, noise_sd: f64 },
}

impl ChangeParams {
    pub fn kind(&self) -> ChangeTypeKind {
        match self {
            ChangeParams::Mean { .. } => ChangeTypeKind::Mean,
            ChangeParams::Slope { .. } => ChangeTypeKind::Slope,
            ChangeParams::Variance { .. } => ChangeTypeKind::Variance,
            ChangeParams::Simultaneous { .. } => ChangeTypeKind::Simultaneous,
            ChangeParams::ArCoeff { .. } => ChangeTypeKind::ArCoeff,
        }
    }

    fn n_tau(&self) -> (usize, Option<usize>) {
        match *self {
            ChangeParams::Mean { n, tau, .. }
            | ChangeParams::Slope { n, tau, .. }
            | ChangeParams::Variance { n, tau, .. }
            | ChangeParams::Simultaneous { n, tau, .. }
            | ChangeParams::ArCoeff { n, tau, .. } => (n, tau),
        }
    }

    fn validate(&self) -> Result<()> {
        let (n, tau) = self.n_tau();
        if n < 4 {
            return Err(CpdError::InvalidLength(format!("change-type series need n >= 4, got {n}")));
        }
        if let Some(t) = tau {
            if !(1..n).contains(&t) {
                return Err(CpdError::param(format!("tau must lie in 1..{n}, got {t}")));
            }
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CpdError::param(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(CpdError::param(format!("{name} must be finite, got {v}")))
            }
        };
        match *self {
            ChangeParams::Mean { mu_left, mu_right, noise_sd, .. } => {
                finite("mu_left", mu_left)?;
                finite("mu_right", mu_right)?;
                positive("noise_sd", noise_sd)
            }
            ChangeParams::Slope { phi1, phi2, noise_sd, .. } => {
                finite("phi1", phi1)?;
                finite("phi2", phi2)?;
                positive("noise_sd", noise_sd)
            }
            ChangeParams::Variance { mu, sigma1, sigma2, .. } => {
                finite("mu", mu)?;
                positive("sigma1", sigma1)?;
                positive("sigma2", sigma2)
            }
            ChangeParams::Simultaneous { mu_left, mu_right, sigma1, sigma2, .. } => {
                finite("mu_left", mu_left)?;
                finite("mu_right", mu_right)?;
                positive("sigma1", sigma1)?;
                positive("sigma2", sigma2)
            }
            ChangeParams::ArCoeff { alpha_before, alpha_after, noise_sd, .. } => {
                if !(alpha_before.abs() < 1.0 && alpha_after.abs() < 1.0) {
                    return Err(CpdError::param("autoregressive coefficients must lie in (-1, 1)"));
                }
                positive("noise_sd", noise_sd)
            }
        }
    }

    /// Noiseless mean path `f_t`, `t = 1..=n` (zero for the AR model).
    pub fn signal(&self) -> Vec<f64> {
        let (n, tau) = self.n_tau();
        let after = |t: usize| tau.is_some_and(|tau| t > tau);
        (1..=n)
            .map(|t| match *self {
                ChangeParams::Mean { mu_left, mu_right, .. }
                | ChangeParams::Simultaneous { mu_left, mu_right, .. } => {
                    if after(t) {
                        mu_right
                    } else {
                        mu_left
                    }
                }
                ChangeParams::Slope { phi1, phi2, .. } => match tau {
                    Some(tau) if t > tau => (phi1 - phi2) * tau as f64 + phi2 * t as f64,
                    _ => phi1 * t as f64,
                },
                ChangeParams::Variance { mu, .. } => mu,
                ChangeParams::ArCoeff { .. } => 0.0,
            })
            .collect()
    }

    /// Noise standard deviation at time `t` (1-based).
    fn sd_at(&self, t: usize) -> f64 {
        let (_, tau) = self.n_tau();
        let after = tau.is_some_and(|tau| t > tau);
        match *self {
            ChangeParams::Mean { noise_sd, .. }
            | ChangeParams::Slope { noise_sd, .. }
            | ChangeParams::ArCoeff { noise_sd, .. } => noise_sd,
            ChangeParams::Variance { sigma1, sigma2, .. }
            | ChangeParams::Simultaneous { sigma1, sigma2, .. } => {
                if after {
                    sigma2
                } else {
                    sigma1
                }
            }
        }
    }

    fn meta(&self, seed: u64) -> ExampleMeta {
        let (n, tau) = self.n_tau();
        let meta = ExampleMeta::new(tau, seed).with("n", n as f64);
        match *self {
            ChangeParams::Mean { mu_left, mu_right, noise_sd, .. } => {
                meta.with("mu_left", mu_left).with("mu_right", mu_right).with("noise_sd", noise_sd)
            }
            ChangeParams::Slope { phi1, phi2, noise_sd, .. } => {
                meta.with("phi1", phi1).with("phi2", phi2).with("noise_sd", noise_sd)
            }
            ChangeParams::Variance { mu, sigma1, sigma2, .. } => {
                meta.with("mu", mu).with("sigma1", sigma1).with("sigma2", sigma2)
            }
            ChangeParams::Simultaneous { mu_left, mu_right, sigma1, sigma2, .. } => meta
                .with("mu_left", mu_left)
                .with("mu_right", mu_right)
                .with("sigma1", sigma1)
                .with("sigma2", sigma2),
            ChangeParams::ArCoeff { alpha_before, alpha_after, noise_sd, .. } => meta
                .with("alpha_before", alpha_before)
                .with("alpha_after", alpha_after)
                .with("noise_sd", noise_sd),
        }
    }
}

/// One series of the requested change type.
pub fn gen_changetype(params: &ChangeParams, seed: u64) -> Result<(Series, ExampleMeta)> {
    params.validate()?;
    let (n, tau) = params.n_tau();
    let mut rng = rng_from_seed(seed);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let noise: Vec<f64> = (1..=n).map(|t| params.sd_at(t) * std.sample(&mut rng)).collect();

    let values = match *params {
        ChangeParams::ArCoeff { alpha_before, alpha_after, .. } => {
            let mut out = Vec::with_capacity(n);
            let mut prev = 0.0;
            for (i, e) in noise.iter().enumerate() {
                let t = i + 1;
                let alpha = if tau.is_some_and(|tau| t >= tau) { alpha_after } else { alpha_before };
                let x = if t == 1 { *e } else { alpha * prev + e };
                out.push(x);
                prev = x;
            }
            out
        }
        _ => params.signal().iter().zip(&noise).map(|(f, e)| f + e).collect(),
    };
    Ok((Series::new(values)?, params.meta(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_signal_continuous_at_tau() {
        let p = ChangeParams::Slope { n: 400, tau: Some(173), phi1: 0.021, phi2: -0.013, noise_sd: 0.5 };
        let f = p.signal();
        // continuation of the second piece back to t = τ equals the first piece there
        let tau = 173.0;
        let left = 0.021 * tau;
        let right = (0.021 - -0.013) * tau + -0.013 * tau;
        assert_eq!(left, f[172]);
        assert!((left - right).abs() < 1e-15);
        // increments change from φ₁ to φ₂
        assert!((f[172] - f[171] - 0.021).abs() < 1e-12);
        assert!((f[174] - f[173] - -0.013).abs() < 1e-12);
    }

    #[test]
    fn equal_sigmas_give_homogeneous_noise() {
        let p = ChangeParams::Variance { n: 100, tau: Some(50), mu: 0.0, sigma1: 0.5, sigma2: 0.5 };
        let q = ChangeParams::Variance { n: 100, tau: None, mu: 0.0, sigma1: 0.5, sigma2: 0.9 };
        assert_eq!(gen_changetype(&p, 3).unwrap().0, gen_changetype(&q, 3).unwrap().0);
    }

    #[test]
    fn mean_noise_level() {
        let p = ChangeParams::Mean { n: 4000, tau: None, mu_left: 1.0, mu_right: 1.0, noise_sd: 0.7 };
        let (s, meta) = gen_changetype(&p, 11).unwrap();
        let m = s.mean();
        let var = s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 4000.0;
        assert!((var - 0.49).abs() < 0.05, "{var}");
        assert_eq!(meta.tau, None);
        assert_eq!(meta.param("noise_sd"), Some(0.7));
    }

    #[test]
    fn ar_coefficient_switch() {
        let n = 4000;
        let p = ChangeParams::ArCoeff { n, tau: Some(2000), alpha_before: 0.2, alpha_after: 0.8, noise_sd: 0.25 };
        let (s, _) = gen_changetype(&p, 5).unwrap();
        let lag1 = |x: &[f64]| {
            let num: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
            let den: f64 = x.iter().map(|v| v * v).sum();
            num / den
        };
        assert!((lag1(&s[..2000]) - 0.2).abs() < 0.1);
        assert!((lag1(&s[2000..]) - 0.8).abs() < 0.1);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = [
            ChangeParams::Mean { n: 3, tau: None, mu_left: 0.0, mu_right: 0.0, noise_sd: 1.0 },
            ChangeParams::Mean { n: 10, tau: Some(10), mu_left: 0.0, mu_right: 0.0, noise_sd: 1.0 },
            ChangeParams::Variance { n: 10, tau: Some(5), mu: 0.0, sigma1: 0.0, sigma2: 1.0 },
            ChangeParams::ArCoeff { n: 10, tau: Some(5), alpha_before: 0.2, alpha_after: 1.0, noise_sd: 1.0 },
        ];
        for p in bad {
            assert!(gen_changetype(&p, 0).is_err(), "{p:?}");
        }
        assert_eq!(ChangeTypeKind::parse("ar-coeff").unwrap(), ChangeTypeKind::ArCoeff);
    }
}
