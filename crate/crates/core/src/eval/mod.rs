// SPDX-License-Identifier: MIT OR Apache-2.0

//! Misclassification rates, threshold tuning and Monte-Carlo checks.

mod bounds;
mod rmse;

use serde::{Deserialize, Serialize};

pub use bounds::{monte_carlo_bound_check, BoundCheck, BoundReport, LocalisationBound, LocalisationTrial};
pub use rmse::{localisation_rmse, RmseReport};

use crate::error::{CpdError, Result};
use crate::nn::{Head, Network};
use crate::par;
use crate::series::Series;
use crate::simgen::{gen_scenario, LabelSpace, LabeledDataset, Role, Scenario, ScenarioSpec};

/// Anything that maps a series to a label.
pub trait Classifier: Sync {
    fn label_space(&self) -> LabelSpace;

    fn classify(&self, x: &Series) -> Result<usize>;

    fn classify_all(&self, xs: &[&Series]) -> Result<Vec<usize>> {
        par::try_map_range(xs.len(), |i| self.classify(xs[i]))
    }
}

impl Classifier for Network {
    fn label_space(&self) -> LabelSpace {
        match self.head() {
            Head::Threshold { .. } => LabelSpace::Binary,
            Head::Softmax => LabelSpace::Multiclass { classes: self.architecture().output_dim },
        }
    }

    fn classify(&self, x: &Series) -> Result<usize> {
        Network::classify(self, x)
    }

    fn classify_all(&self, xs: &[&Series]) -> Result<Vec<usize>> {
        const CHUNK: usize = 256;
        let blocks = par::try_map_range(xs.len().div_ceil(CHUNK), |b| {
            let part = &xs[b * CHUNK..((b + 1) * CHUNK).min(xs.len())];
            Ok::<_, CpdError>(self.predict_many(part)?.into_iter().map(|f| f.label).collect::<Vec<_>>())
        })?;
        Ok(blocks.concat())
    }
}

/// `1{stat(x) > threshold}`.
pub struct Thresholded<F> {
    pub stat: F,
    pub threshold: f64,
}

impl<F> Thresholded<F>
where
    F: Fn(&Series) -> Result<f64> + Sync,
{
    pub fn new(stat: F, threshold: f64) -> Self {
        Thresholded { stat, threshold }
    }
}

impl<F> Classifier for Thresholded<F>
where
    F: Fn(&Series) -> Result<f64> + Sync,
{
    fn label_space(&self) -> LabelSpace {
        LabelSpace::Binary
    }

    fn classify(&self, x: &Series) -> Result<usize> {
        Ok(usize::from((self.stat)(x)? > self.threshold))
    }
}

/// A labelling function with a declared label space.
pub struct FnClassifier<F> {
    pub space: LabelSpace,
    pub f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&Series) -> Result<usize> + Sync,
{
    pub fn new(space: LabelSpace, f: F) -> Self {
        FnClassifier { space, f }
    }
}

impl<F> Classifier for FnClassifier<F>
where
    F: Fn(&Series) -> Result<usize> + Sync,
{
    fn label_space(&self) -> LabelSpace {
        self.space
    }

    fn classify(&self, x: &Series) -> Result<usize> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub label: usize,
    pub support: usize,
    /// Fraction of this class predicted correctly; `None` with no support.
    pub tpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mer: f64,
    pub accuracy: f64,
    pub size: usize,
    pub errors: usize,
    pub labels: Vec<usize>,
    /// Rows are true labels, columns predictions, both in `labels` order.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassRate>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub fingerprint: String,
}

impl EvalReport {
    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Report from true labels and predictions.
pub fn report_from_predictions(
    space: LabelSpace,
    truth: &[usize],
    predicted: &[usize],
    fingerprint: String,
) -> Result<EvalReport> {
    if truth.is_empty() {
        return Err(CpdError::param("cannot evaluate on an empty dataset"));
    }
    if truth.len() != predicted.len() {
        return Err(CpdError::ShapeMismatch { expected: truth.len(), got: predicted.len() });
    }
    let labels = space.labels();
    let index = |l: usize, what: &str| {
        labels
            .iter()
            .position(|&k| k == l)
            .ok_or_else(|| CpdError::param(format!("{what} label {l} outside {space:?}")))
    };
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[index(t, "true")?][index(p, "predicted")?] += 1;
    }
    let size = truth.len();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let errors = size - correct;
    let per_class = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let support: usize = confusion[i].iter().sum();
            let tpr = (support > 0).then(|| confusion[i][i] as f64 / support as f64);
            ClassRate { label, support, tpr }
        })
        .collect();
    Ok(EvalReport {
        mer: errors as f64 / size as f64,
        accuracy: correct as f64 / size as f64,
        size,
        errors,
        labels,
        confusion,
        per_class,
        threshold: None,
        seed: None,
        fingerprint,
    })
}

/// Misclassification rate with per-class true-positive rates.
pub fn mer(classifier: &dyn Classifier, data: &LabeledDataset) -> Result<EvalReport> {
    if classifier.label_space() != data.labels {
        return Err(CpdError::param(format!(
            "classifier labels {:?} do not match dataset labels {:?}",
            classifier.label_space(),
            data.labels
        )));
    }
    let xs: Vec<&Series> = data.series().collect();
    let predicted = classifier.classify_all(&xs)?;
    report_from_predictions(data.labels, &data.label_vec(), &predicted, data.fingerprint())
}

/// Candidate thresholds for [`tune_threshold`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdGrid {
    /// Evenly spaced over `[min, max]` of the training statistics.
    Linspace { points: usize },
    /// Empirical quantiles of the training statistics.
    Quantiles { points: usize },
    /// Every distinct statistic value (exact training-error minimiser).
    Exhaustive,
    Explicit { values: Vec<f64> },
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid::Linspace { points: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub train_mer: f64,
}

/// Threshold minimising the training error of `1{stat > t}` over the grid;
/// smallest threshold on ties.
pub fn tune_threshold(stats: &[f64], labels: &[usize], grid: &ThresholdGrid) -> Result<ThresholdFit> {
    if stats.is_empty() {
        return Err(CpdError::param("cannot tune a threshold on an empty dataset"));
    }
    if stats.len() != labels.len() {
        return Err(CpdError::ShapeMismatch { expected: stats.len(), got: labels.len() });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(CpdError::param("threshold tuning needs binary labels"));
    }
    if stats.iter().any(|s| s.is_nan()) {
        return Err(CpdError::param("statistics contain NaN"));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mut candidates: Vec<f64> = match grid {
        ThresholdGrid::Linspace { points } | ThresholdGrid::Quantiles { points } if *points == 0 => {
            return Err(CpdError::param("threshold grid is empty"));
        }
        ThresholdGrid::Linspace { points } => {
            if *points == 1 {
                vec![lo]
            } else {
                (0..*points).map(|k| lo + (hi - lo) * k as f64 / (*points - 1) as f64).collect()
            }
        }
        ThresholdGrid::Quantiles { points } => {
            let m = sorted.len() - 1;
            (0..*points)
                .map(|k| sorted[if *points == 1 { 0 } else { (k * m + (*points - 1) / 2) / (*points - 1) }])
                .collect()
        }
        ThresholdGrid::Exhaustive => {
            let mut v = sorted.clone();
            v.dedup();
            // a threshold just below the minimum flags everything
            v.insert(0, f64::from_bits(lo.to_bits().wrapping_sub(1)).min(lo - lo.abs() * f64::EPSILON));
            v
        }
        ThresholdGrid::Explicit { values } => {
            if values.is_empty() {
                return Err(CpdError::param("threshold grid is empty"));
            }
            values.clone()
        }
    };
    candidates.retain(|t| !t.is_nan());
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // positives and negatives sorted by statistic; errors(t) = #{neg > t} + #{pos ≤ t}
    let mut neg: Vec<f64> = stats.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(s, _)| *s).collect();
    let mut pos: Vec<f64> = stats.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(s, _)| *s).collect();
    neg.sort_by(f64::total_cmp);
    pos.sort_by(f64::total_cmp);
    let count_le = |v: &[f64], t: f64| v.partition_point(|&s| s <= t);
    let mut best = (usize::MAX, f64::NAN);
    for &t in &candidates {
        let errors = (neg.len() - count_le(&neg, t)) + count_le(&pos, t);
        if errors < best.0 {
            best = (errors, t);
        }
    }
    Ok(ThresholdFit { threshold: best.1, train_mer: best.0 as f64 / stats.len() as f64 })
}

/// Computes the statistic on every training series (in parallel) and tunes.
pub fn tune_threshold_on<F>(stat: F, train: &LabeledDataset, grid: &ThresholdGrid) -> Result<ThresholdFit>
where
    F: Fn(&Series) -> Result<f64> + Sync,
{
    let xs: Vec<&Series> = train.series().collect();
    let stats = par::try_map_range(xs.len(), |i| stat(xs[i]))?;
    tune_threshold(&stats, &train.label_vec(), grid)
}

/// Evaluates a classifier on a freshly generated test set of another scenario.
pub fn cross_scenario(
    classifier: &dyn Classifier,
    scenario: Scenario,
    n: usize,
    size: usize,
    seed: u64,
) -> Result<EvalReport> {
    let test = gen_scenario(&ScenarioSpec::new(scenario, n, size, Role::Test)?, seed)?;
    Ok(mer(classifier, &test)?.with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusum::{cusum_statistic, threshold, ThresholdKind};
    use crate::simgen::{gen_scenario, ScenarioSpec};

    fn s1(size: usize, seed: u64, role: Role) -> LabeledDataset {
        gen_scenario(&ScenarioSpec::new(Scenario::S1, 100, size, role).unwrap(), seed).unwrap()
    }

    #[test]
    fn oracle_and_constant_classifiers() {
        let d = s1(400, 1, Role::Test);
        let oracle = FnClassifier::new(LabelSpace::Binary, |_x: &Series| Ok(0usize));
        let r = mer(&oracle, &d).unwrap();
        assert_eq!(r.mer, 0.5);
        assert_eq!(r.per_class[0].tpr, Some(1.0));
        assert_eq!(r.per_class[1].tpr, Some(0.0));
        let labels = d.label_vec();
        let truth = report_from_predictions(LabelSpace::Binary, &labels, &labels, d.fingerprint()).unwrap();
        assert_eq!(truth.mer, 0.0);
        assert_eq!(truth.confusion.iter().flatten().sum::<usize>(), 400);
    }

    #[test]
    fn cusum_null_threshold_mer() {
        let d = s1(2000, 2, Role::Test);
        let lam = threshold(100, ThresholdKind::Null { eps: 0.05 }).unwrap();
        let c = Thresholded::new(|x: &Series| Ok(cusum_statistic(x).0), lam);
        let r = mer(&c, &d).unwrap();
        assert!(r.mer > 0.0 && r.mer < 0.5, "{}", r.mer);
        assert_eq!(r, mer(&c, &d).unwrap());
    }

    #[test]
    fn mer_is_permutation_invariant() {
        let d = s1(300, 3, Role::Test);
        let c = Thresholded::new(|x: &Series| Ok(cusum_statistic(x).0), 3.5);
        let mut e = d.clone();
        e.examples.reverse();
        assert_eq!(mer(&c, &d).unwrap().mer, mer(&c, &e).unwrap().mer);
    }

    #[test]
    fn label_space_mismatch() {
        let d = s1(10, 3, Role::Test);
        let c = FnClassifier::new(LabelSpace::Multiclass { classes: 5 }, |_x: &Series| Ok(1usize));
        assert!(mer(&c, &d).is_err());
    }

    #[test]
    fn tuning_rules() {
        let fit = tune_threshold(&[0.1, 0.2, 0.9, 1.0], &[0, 0, 1, 1], &ThresholdGrid::default()).unwrap();
        assert_eq!(fit.train_mer, 0.0);
        // 0.2 and 0.5 both separate perfectly; the smaller wins
        let grid = ThresholdGrid::Explicit { values: vec![0.5, 0.2, 0.95] };
        let fit = tune_threshold(&[0.1, 0.2, 0.9, 1.0], &[0, 0, 1, 1], &grid).unwrap();
        assert_eq!(fit.threshold, 0.2);
        assert!(tune_threshold(&[], &[], &grid).is_err());
        let all = tune_threshold(&[1.0, 2.0], &[1, 1], &ThresholdGrid::Exhaustive).unwrap();
        assert_eq!(all.train_mer, 0.0);
    }

    #[test]
    fn tuned_threshold_is_grid_optimal() {
        let d = s1(1000, 5, Role::Train);
        let stats: Vec<f64> = d.series().map(|x| cusum_statistic(x).0).collect();
        let labels = d.label_vec();
        let grid = ThresholdGrid::default();
        let fit = tune_threshold(&stats, &labels, &grid).unwrap();
        let (lo, hi) = stats.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        for k in 0..200 {
            let t = lo + (hi - lo) * k as f64 / 199.0;
            let err = stats.iter().zip(&labels).filter(|(s, &l)| usize::from(**s > t) != l).count();
            assert!(fit.train_mer <= err as f64 / 1000.0 + 1e-15);
        }
        assert!((3.0..=4.5).contains(&fit.threshold), "{}", fit.threshold);
        let exact = tune_threshold(&stats, &labels, &ThresholdGrid::Exhaustive).unwrap();
        assert!(exact.train_mer <= fit.train_mer);
    }

    #[test]
    fn cross_scenario_runs() {
        let c = Thresholded::new(|x: &Series| Ok(cusum_statistic(x).0), 3.9);
        let r = cross_scenario(&c, Scenario::S3, 100, 200, 4).unwrap();
        assert!(r.mer.is_finite());
        let plain = mer(&c, &gen_scenario(&ScenarioSpec::new(Scenario::S1, 100, 200, Role::Test).unwrap(), 4).unwrap())
            .unwrap();
        assert_eq!(cross_scenario(&c, Scenario::S1, 100, 200, 4).unwrap().mer, plain.mer);
    }
}
