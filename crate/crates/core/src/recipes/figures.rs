// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::Serialize;

use super::median;
use crate::cusum::cusum_statistic;
use crate::error::{CpdError, Result};
use crate::eval::{mer, report_from_predictions, tune_threshold, tune_threshold_on, EvalReport, FnClassifier, ThresholdGrid, Thresholded};
use crate::glr::{adaptive_classify, oracle_statistic, ChangeKind};
use crate::nn::{train, Architecture, Channel, InverseTimeDecay, Preprocess, Step, TrainConfig};
use crate::par;
use crate::rng::{child_seed, tagged_seed};
use crate::robust::wilcoxon_statistic;
use crate::series::Series;
use crate::simgen::{gen_multiclass, gen_scenario, LabeledDataset, MulticlassSpec, Regime, Role, Scenario, ScenarioSpec};

pub const FIG_SEEDS: usize = 3;
pub const FIG_N: usize = 100;
pub const FIG_TEST_SIZE: usize = 5000;

fn cusum_stat(x: &Series) -> Result<f64> {
    Ok(cusum_statistic(x).0)
}

fn wilcoxon_stat(x: &Series) -> Result<f64> {
    Ok(wilcoxon_statistic(x).0)
}

struct Split {
    seed: u64,
    train: LabeledDataset,
    test: LabeledDataset,
}

fn split(scenario: Scenario, n_train: usize, seed: u64, k: usize) -> Result<Split> {
    let s = child_seed(seed, k as u64);
    Ok(Split {
        seed: s,
        train: gen_scenario(&ScenarioSpec::new(scenario, FIG_N, n_train, Role::Train)?, tagged_seed(s, "train"))?,
        test: gen_scenario(&ScenarioSpec::new(scenario, FIG_N, FIG_TEST_SIZE, Role::Test)?, tagged_seed(s, "test"))?,
    })
}

/// Tuned-threshold MER of a statistic, with the threshold.
fn tuned(stat: fn(&Series) -> Result<f64>, sp: &Split) -> Result<(f64, f64)> {
    let fit = tune_threshold_on(stat, &sp.train, &ThresholdGrid::Exhaustive)?;
    Ok((fit.threshold, mer(&Thresholded::new(stat, fit.threshold), &sp.test)?.mer))
}

/// `H_{1,2n−2}` trained with the standard configuration.
fn net_mer(sp: &Split, preprocess: &Preprocess, tag: &str) -> Result<f64> {
    let arch = Architecture::new(preprocess.output_dim(FIG_N), &[2 * FIG_N - 2], 1)?;
    let cfg = TrainConfig::default().with_seed(tagged_seed(sp.seed, tag));
    let net = train(&sp.train, &arch, preprocess, &cfg)?;
    Ok(mer(&net, &sp.test)?.mer)
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Seed {
    pub seed: u64,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub cusum_threshold: f64,
    pub cusum_mer: f64,
    /// Raw series as input.
    pub net_mer: f64,
    /// Series standardised onto [0, 1] first.
    pub net_unit_scale_mer: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Report {
    pub scenario: String,
    pub n: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub hidden_width: usize,
    pub seeds: Vec<Fig1Seed>,
    pub median_cusum_mer: f64,
    pub median_net_mer: f64,
    pub median_net_unit_scale_mer: f64,
}

/// Tuned CUSUM against trained single-hidden-layer networks.
pub fn fig1(scenario: Scenario, n_train: usize, seed: u64) -> Result<Fig1Report> {
    let splits = par::try_map_range(FIG_SEEDS, |k| split(scenario, n_train, seed, k))?;
    // seeds × {cusum, raw net, unit-scale net}
    let cells = par::try_map_range(3 * FIG_SEEDS, |j| {
        let sp = &splits[j / 3];
        match j % 3 {
            0 => tuned(cusum_stat, sp),
            1 => Ok((f64::NAN, net_mer(sp, &Preprocess::identity(), "net")?)),
            _ => Ok((f64::NAN, net_mer(sp, &Preprocess::unit_scale(), "net-unit-scale")?)),
        }
    })?;
    let seeds: Vec<Fig1Seed> = splits
        .iter()
        .enumerate()
        .map(|(k, sp)| Fig1Seed {
            seed: sp.seed,
            train_fingerprint: sp.train.fingerprint(),
            test_fingerprint: sp.test.fingerprint(),
            cusum_threshold: cells[3 * k].0,
            cusum_mer: cells[3 * k].1,
            net_mer: cells[3 * k + 1].1,
            net_unit_scale_mer: cells[3 * k + 2].1,
        })
        .collect();
    let col = |f: fn(&Fig1Seed) -> f64| median(&seeds.iter().map(f).collect::<Vec<_>>());
    Ok(Fig1Report {
        scenario: scenario.name().to_string(),
        n: FIG_N,
        train_size: n_train,
        test_size: FIG_TEST_SIZE,
        hidden_width: 2 * FIG_N - 2,
        median_cusum_mer: col(|s| s.cusum_mer),
        median_net_mer: col(|s| s.net_mer),
        median_net_unit_scale_mer: col(|s| s.net_unit_scale_mer),
        seeds,
    })
}

/// Gaussian noise, N = 700.
pub fn fig1a(seed: u64) -> Result<Fig1Report> {
    fig1(Scenario::S1, 700, seed)
}

/// Cauchy noise, N = 1000.
pub fn fig1d(seed: u64) -> Result<Fig1Report> {
    fig1(Scenario::S3, 1000, seed)
}

pub const TRUNCATION_Z: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct FigB1Seed {
    pub seed: u64,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub wilcoxon_threshold: f64,
    pub wilcoxon_mer: f64,
    pub cusum_mer: f64,
    pub net_truncated_mer: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigB1Report {
    pub scenario: String,
    pub train_size: usize,
    pub test_size: usize,
    pub z: f64,
    pub seeds: Vec<FigB1Seed>,
    pub median_wilcoxon_mer: f64,
    pub median_cusum_mer: f64,
    pub median_net_truncated_mer: f64,
}

/// Cauchy noise: tuned Wilcoxon and CUSUM against a network fed z-score
/// truncated series.
pub fn figb1(seed: u64) -> Result<FigB1Report> {
    let n_train = 1000;
    let splits = par::try_map_range(FIG_SEEDS, |k| split(Scenario::S3, n_train, seed, k))?;
    let truncated = Preprocess::identity().then(Step::Truncate { z: TRUNCATION_Z });
    let cells = par::try_map_range(3 * FIG_SEEDS, |j| {
        let sp = &splits[j / 3];
        match j % 3 {
            0 => tuned(wilcoxon_stat, sp),
            1 => tuned(cusum_stat, sp),
            _ => Ok((f64::NAN, net_mer(sp, &truncated, "net-truncated")?)),
        }
    })?;
    let seeds: Vec<FigB1Seed> = splits
        .iter()
        .enumerate()
        .map(|(k, sp)| FigB1Seed {
            seed: sp.seed,
            train_fingerprint: sp.train.fingerprint(),
            test_fingerprint: sp.test.fingerprint(),
            wilcoxon_threshold: cells[3 * k].0,
            wilcoxon_mer: cells[3 * k].1,
            cusum_mer: cells[3 * k + 1].1,
            net_truncated_mer: cells[3 * k + 2].1,
        })
        .collect();
    let col = |f: fn(&FigB1Seed) -> f64| median(&seeds.iter().map(f).collect::<Vec<_>>());
    Ok(FigB1Report {
        scenario: Scenario::S3.name().to_string(),
        train_size: n_train,
        test_size: FIG_TEST_SIZE,
        z: TRUNCATION_Z,
        median_wilcoxon_mer: col(|s| s.wilcoxon_mer),
        median_cusum_mer: col(|s| s.cusum_mer),
        median_net_truncated_mer: col(|s| s.net_truncated_mer),
        seeds,
    })
}

pub const TABLE1_TRAIN_PER_CLASS: usize = 400;
pub const TABLE1_TEST_PER_CLASS: usize = 500;
pub const TABLE1_DEPTH: usize = 5;
pub const TABLE1_WIDTH: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub seed: u64,
    pub regime: String,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Tuned threshold of each change family's test.
    pub oracle_thresholds: BTreeMap<String, f64>,
    pub oracle: EvalReport,
    pub adaptive: EvalReport,
    pub mlp_depth: usize,
    pub mlp_width: usize,
    pub mlp: EvalReport,
}

/// Which single-change test the oracle applies to a series of a given class,
/// and the (no-change, change) labels it chooses between.
fn oracle_family(label: usize) -> (ChangeKind, usize, usize) {
    match label {
        1 | 2 => (ChangeKind::Mean, 1, 2),
        3 => (ChangeKind::Variance, 1, 3),
        _ => (ChangeKind::Slope, 4, 5),
    }
}

/// Strong-SNR five-class task: oracle and BIC-adaptive likelihood-ratio
/// classifiers against a five-hidden-layer MLP on `(x, x²)`.
pub fn table1(seed: u64) -> Result<Table1Report> {
    let regime = Regime::Strong;
    let train_d = gen_multiclass(&MulticlassSpec::table(regime, TABLE1_TRAIN_PER_CLASS), tagged_seed(seed, "train"))?;
    let test_d = gen_multiclass(&MulticlassSpec::table(regime, TABLE1_TEST_PER_CLASS), tagged_seed(seed, "test"))?;

    let mut thresholds = BTreeMap::new();
    for (kind, null, alt) in [(ChangeKind::Mean, 1, 2), (ChangeKind::Variance, 1, 3), (ChangeKind::Slope, 4, 5)] {
        let ex: Vec<_> = train_d.examples.iter().filter(|e| e.label == null || e.label == alt).collect();
        let stats = par::try_map_range(ex.len(), |i| oracle_statistic(&ex[i].series, kind))?;
        let labels: Vec<usize> = ex.iter().map(|e| usize::from(e.label == alt)).collect();
        thresholds.insert(kind, tune_threshold(&stats, &labels, &ThresholdGrid::Exhaustive)?.threshold);
    }
    let predicted = par::try_map_range(test_d.len(), |i| {
        let e = &test_d.examples[i];
        let (kind, null, alt) = oracle_family(e.label);
        Ok::<_, CpdError>(if oracle_statistic(&e.series, kind)? > thresholds[&kind] { alt } else { null })
    })?;
    let oracle = report_from_predictions(test_d.labels, &test_d.label_vec(), &predicted, test_d.fingerprint())?
        .with_seed(seed);
    let adaptive = mer(&FnClassifier::new(test_d.labels, adaptive_classify), &test_d)?.with_seed(seed);

    let pre = Preprocess::identity().with_channels(&[Channel::Identity, Channel::Square]);
    let arch = Architecture::uniform(pre.output_dim(train_d.n), TABLE1_DEPTH, TABLE1_WIDTH, 5)?;
    let steps_per_epoch = train_d.len().div_ceil(64) as f64;
    let cfg = TrainConfig {
        batch_size: 64,
        decay: Some(InverseTimeDecay { decay_steps: steps_per_epoch, decay_rate: 0.05 }),
        ..TrainConfig::default().with_seed(tagged_seed(seed, "mlp"))
    };
    let net = train(&train_d, &arch, &pre, &cfg)?;
    let mlp = mer(&net, &test_d)?.with_seed(seed);

    let name = |k: ChangeKind| match k {
        ChangeKind::Mean => "mean",
        ChangeKind::Variance => "variance",
        ChangeKind::Slope => "slope",
    };
    Ok(Table1Report {
        seed,
        regime: "strong".into(),
        train_per_class: TABLE1_TRAIN_PER_CLASS,
        test_per_class: TABLE1_TEST_PER_CLASS,
        oracle_thresholds: thresholds.into_iter().map(|(k, t)| (name(k).to_string(), t)).collect(),
        oracle,
        adaptive,
        mlp_depth: TABLE1_DEPTH,
        mlp_width: TABLE1_WIDTH,
        mlp,
    })
}
