// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{shuffle_in_place, Example, ExampleMeta, LabelSpace, LabeledDataset};
use crate::error::{CpdError, Result};
use crate::par;
use crate::rng::{child_seed, rng_from_seed, tagged_seed, CpdRng};
use crate::series::Series;

/// Noise regimes for the single mean-change experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// i.i.d. N(0, 1).
    S1,
    /// AR(1) with ρ = 0.7, N(0, 1) innovations.
    S1Prime,
    /// AR(1) with ρ_t ~ U[0, 1] drawn afresh at every t, N(0, 2) innovations
    /// (variance 2).
    S2,
    /// i.i.d. Cauchy, location 0, scale 0.3.
    S3,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S1Prime => "S1'",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(Scenario::S1),
            "S1'" | "S1P" | "S1PRIME" | "S1′" => Ok(Scenario::S1Prime),
            "S2" => Ok(Scenario::S2),
            "S3" => Ok(Scenario::S3),
            other => Err(CpdError::param(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Jump sizes in `±[0.5b, 1.5b]`.
    Train,
    /// Jump sizes in `±[0.25b, 1.75b]`.
    Test,
}

impl Role {
    fn jump_range(&self) -> (f64, f64) {
        match self {
            Role::Train => (0.5, 1.5),
            Role::Test => (0.25, 1.75),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    /// Dataset size; half with a change, half without.
    pub size: usize,
    pub role: Role,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n: usize, size: usize, role: Role) -> Result<Self> {
        if n < 4 {
            return Err(CpdError::InvalidLength(format!("scenario series need n >= 4, got {n}")));
        }
        if size == 0 || size % 2 != 0 {
            return Err(CpdError::param(format!("dataset size must be even and positive, got {size}")));
        }
        Ok(ScenarioSpec { scenario, n, size, role })
    }
}

/// `b = √(8n log(20n) / (τ(n−τ)))`.
pub fn snr_base(n: usize, tau: usize) -> Result<f64> {
    if tau < 1 || tau >= n {
        return Err(CpdError::param(format!("tau must lie in 1..{n}, got {tau}")));
    }
    let (nf, t) = (n as f64, tau as f64);
    Ok((8.0 * nf * (20.0 * nf).ln() / (t * (nf - t))).sqrt())
}

/// Uniform on `[-hi, -lo] ∪ [lo, hi]`.
pub(crate) fn symmetric_uniform(rng: &mut CpdRng, lo: f64, hi: f64) -> f64 {
    let mag = rng.random_range(lo..=hi);
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Autocorrelations `ρ_t` and innovations `ξ_t` of one noise path.
pub fn scenario_noise(scenario: Scenario, n: usize, rng: &mut CpdRng) -> (Vec<f64>, Vec<f64>) {
    let mut rho = vec![0.0; n];
    let mut xi = vec![0.0; n];
    match scenario {
        Scenario::S1 | Scenario::S1Prime => {
            let rho_value = if scenario == Scenario::S1 { 0.0 } else { 0.7 };
            let normal = Normal::new(0.0, 1.0).expect("valid normal");
            for t in 0..n {
                rho[t] = rho_value;
                xi[t] = normal.sample(rng);
            }
        }
        Scenario::S2 => {
            let normal = Normal::new(0.0, 2f64.sqrt()).expect("valid normal");
            for t in 0..n {
                rho[t] = rng.random_range(0.0..=1.0);
                xi[t] = normal.sample(rng);
            }
        }
        Scenario::S3 => {
            let cauchy = Cauchy::new(0.0, 0.3).expect("valid cauchy");
            for t in 0..n {
                xi[t] = cauchy.sample(rng);
            }
        }
    }
    // ρ_1 plays no role
    rho[0] = 0.0;
    (rho, xi)
}

/// `ε_1 = ξ_1`, `ε_t = ρ_t ε_{t−1} + ξ_t`.
pub(crate) fn ar_recursion(rho: &[f64], xi: &[f64]) -> Vec<f64> {
    let mut eps = Vec::with_capacity(xi.len());
    let mut prev = 0.0;
    for (t, (&r, &x)) in rho.iter().zip(xi).enumerate() {
        let e = if t == 0 { x } else { r * prev + x };
        eps.push(e);
        prev = e;
    }
    eps
}

/// Generates one example from its own seed. Exposed so tests and tools can
/// regenerate a single example from stored metadata.
pub(crate) fn scenario_example(spec: &ScenarioSpec, change: bool, seed: u64) -> Result<Example> {
    let n = spec.n;
    let mut rng = rng_from_seed(seed);
    let tau = rng.random_range(2..=n - 2);
    let b = snr_base(n, tau)?;
    let (lo, hi) = spec.role.jump_range();
    let jump = symmetric_uniform(&mut rng, lo * b, hi * b);
    let mu_left = 0.0;
    let mu_right = if change { mu_left + jump } else { mu_left };
    let (rho, xi) = scenario_noise(spec.scenario, n, &mut rng);
    let eps = ar_recursion(&rho, &xi);
    let values: Vec<f64> = eps
        .iter()
        .enumerate()
        .map(|(t, e)| if t + 1 <= tau { mu_left } else { mu_right } + e)
        .collect();
    let meta = ExampleMeta::new(change.then_some(tau), seed)
        .with("mu_left", mu_left)
        .with("mu_right", mu_right)
        .with("b", b);
    Ok(Example { series: Series::new(values)?, label: usize::from(change), meta })
}

/// Balanced, shuffled binary dataset for one scenario.
pub fn gen_scenario(spec: &ScenarioSpec, seed: u64) -> Result<LabeledDataset> {
    let half = spec.size / 2;
    let examples_seed = tagged_seed(seed, "examples");
    let mut examples = par::try_map_range(spec.size, |k| {
        scenario_example(spec, k < half, child_seed(examples_seed, k as u64))
    })?;
    shuffle_in_place(&mut examples, tagged_seed(seed, "shuffle"));
    Ok(LabeledDataset { n: spec.n, labels: LabelSpace::Binary, examples })
}

/// Change in autoregressive coefficient: `x_t = α_t x_{t−1} + ε_t`,
/// `α_t = α_before` for `t < τ` and `α_after` from `τ` on, `ε ~ N(0, sd²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArChangeSpec {
    pub n: usize,
    pub size: usize,
    pub tau_min: usize,
    pub tau_max: usize,
    pub alpha_before: f64,
    pub alpha_after: f64,
    pub noise_sd: f64,
}

impl ArChangeSpec {
    /// `n = 100`, τ ~ U{10..89}, α 0.2 → 0.8, ε ~ N(0, 0.25²).
    pub fn standard(size: usize) -> Self {
        ArChangeSpec { n: 100, size, tau_min: 10, tau_max: 89, alpha_before: 0.2, alpha_after: 0.8, noise_sd: 0.25 }
    }
}

/// Balanced AR-coefficient change dataset; no-change examples keep
/// `α_before` throughout.
pub fn gen_ar_change(spec: &ArChangeSpec, seed: u64) -> Result<LabeledDataset> {
    if spec.size == 0 || spec.size % 2 != 0 {
        return Err(CpdError::param("dataset size must be even and positive"));
    }
    if !(2 <= spec.tau_min && spec.tau_min <= spec.tau_max && spec.tau_max < spec.n) {
        return Err(CpdError::param("change range must satisfy 2 <= tau_min <= tau_max < n"));
    }
    let half = spec.size / 2;
    let base = tagged_seed(seed, "ar-examples");
    let mut examples = par::try_map_range(spec.size, |k| {
        let change = k < half;
        let ex_seed = child_seed(base, k as u64);
        let mut rng = rng_from_seed(ex_seed);
        let tau = rng.random_range(spec.tau_min..=spec.tau_max);
        let params = super::ChangeParams::ArCoeff {
            n: spec.n,
            tau: change.then_some(tau),
            alpha_before: spec.alpha_before,
            alpha_after: spec.alpha_after,
            noise_sd: spec.noise_sd,
        };
        let (series, mut meta) = super::gen_changetype(&params, child_seed(ex_seed, 1))?;
        meta.seed = ex_seed;
        Ok::<_, CpdError>(Example { series, label: usize::from(change), meta })
    })?;
    shuffle_in_place(&mut examples, tagged_seed(seed, "ar-shuffle"));
    Ok(LabeledDataset { n: spec.n, labels: LabelSpace::Binary, examples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn snr_base_examples() {
        assert_abs_diff_eq!(snr_base(100, 50).unwrap(), 1.5596, epsilon = 1e-4);
        for tau in 1..100 {
            assert_abs_diff_eq!(snr_base(100, tau).unwrap(), snr_base(100, 100 - tau).unwrap(), epsilon = 1e-12);
            assert!(snr_base(100, tau).unwrap() >= snr_base(100, 50).unwrap());
        }
        assert!(snr_base(100, 0).is_err());
        assert!(snr_base(100, 100).is_err());
    }

    #[test]
    fn balanced_and_deterministic() {
        let spec = ScenarioSpec::new(Scenario::S1, 100, 200, Role::Train).unwrap();
        let a = gen_scenario(&spec, 7).unwrap();
        let b = gen_scenario(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label_vec().iter().sum::<usize>(), 100);
        assert_ne!(a.fingerprint(), gen_scenario(&spec, 8).unwrap().fingerprint());
        assert!(ScenarioSpec::new(Scenario::S1, 100, 7, Role::Train).is_err());
    }

    #[test]
    fn no_change_series_centred() {
        let spec = ScenarioSpec::new(Scenario::S1, 100, 2000, Role::Train).unwrap();
        let d = gen_scenario(&spec, 3).unwrap();
        let nulls: Vec<_> = d.examples.iter().filter(|e| e.label == 0).collect();
        let ok = nulls.iter().filter(|e| e.series.mean().abs() <= 4.0 / 10.0).count();
        assert!(ok as f64 >= 0.99 * nulls.len() as f64);
    }

    #[test]
    fn jump_ranges_follow_role() {
        for (role, lo, hi) in [(Role::Train, 0.5, 1.5), (Role::Test, 0.25, 1.75)] {
            let spec = ScenarioSpec::new(Scenario::S2, 60, 400, role).unwrap();
            let d = gen_scenario(&spec, 1).unwrap();
            for e in &d.examples {
                let jump = (e.meta.param("mu_right").unwrap() - e.meta.param("mu_left").unwrap()).abs();
                let b = e.meta.param("b").unwrap();
                match e.meta.tau {
                    Some(tau) => {
                        assert!((2..=58).contains(&tau));
                        assert!(jump >= lo * b - 1e-12 && jump <= hi * b + 1e-12);
                    }
                    None => assert_eq!(jump, 0.0),
                }
            }
        }
    }

    #[test]
    fn ar_noise_regenerates_from_metadata() {
        for scenario in [Scenario::S1, Scenario::S1Prime, Scenario::S2, Scenario::S3] {
            let spec = ScenarioSpec::new(scenario, 50, 20, Role::Test).unwrap();
            let d = gen_scenario(&spec, 12).unwrap();
            for e in &d.examples {
                let mut rng = rng_from_seed(e.meta.seed);
                let tau: usize = rng.random_range(2..=48);
                let _ = symmetric_uniform(&mut rng, 0.0, 1.0);
                let (rho, xi) = scenario_noise(scenario, 50, &mut rng);
                let eps = ar_recursion(&rho, &xi);
                let mu_r = e.meta.param("mu_right").unwrap();
                for (t, (x, ep)) in e.series.iter().zip(&eps).enumerate() {
                    let mean = if t + 1 <= tau { 0.0 } else { mu_r };
                    assert_eq!(*x, mean + ep);
                }
                if scenario == Scenario::S1Prime {
                    assert!(rho[1..].iter().all(|&r| r == 0.7));
                }
                if scenario == Scenario::S2 {
                    assert!(rho.iter().all(|&r| (0.0..=1.0).contains(&r)));
                }
            }
        }
    }

    #[test]
    fn ar_change_dataset() {
        let d = gen_ar_change(&ArChangeSpec::standard(40), 5).unwrap();
        assert_eq!(d.len(), 40);
        assert_eq!(d.label_vec().iter().sum::<usize>(), 20);
        for e in &d.examples {
            if let Some(t) = e.meta.tau {
                assert!((10..=89).contains(&t));
            }
        }
    }

    #[test]
    fn scenario_names_parse() {
        for s in [Scenario::S1, Scenario::S1Prime, Scenario::S2, Scenario::S3] {
            assert_eq!(Scenario::parse(s.name()).unwrap(), s);
        }
        assert!(Scenario::parse("S9").is_err());
    }
}
