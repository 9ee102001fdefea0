// SPDX-License-Identifier: MIT OR Apache-2.0

mod config;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use cpdnet::cusum::{cusum_star_statistic, cusum_statistic, threshold, ThresholdKind};
use cpdnet::eval::{mer, tune_threshold_on, Classifier, FnClassifier, ThresholdGrid, Thresholded};
use cpdnet::glr::adaptive_classify;
use cpdnet::io::{fmt_f64, load_dataset, load_series, report_json, write_dataset, write_series, write_table};
use cpdnet::localise::{localise, CusumStarWindow, CusumWindow, WindowClassifier};
use cpdnet::nn::{train, Architecture, Channel, Network, Preprocess, Step, TrainConfig};
use cpdnet::recipes::{self, RECIPES};
use cpdnet::robust::wilcoxon_statistic;
use cpdnet::simgen::{
    gen_ar_change, gen_multiclass, gen_piecewise, gen_scenario, ArChangeSpec, LabelSpace, LabeledDataset,
    MulticlassSpec, NoiseSpec, Regime, Role, Scenario, ScenarioSpec,
};
use cpdnet::{CpdError, Series};
use serde::Serialize;

use config::*;

/// Exit status 2 marks bad input, 1 a failure while running.
struct Failure {
    code: u8,
    msg: String,
}

impl From<CpdError> for Failure {
    fn from(e: CpdError) -> Self {
        Failure { code: if e.is_config_error() { 2 } else { 1 }, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, msg: e.to_string() }
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn resolve(cli: Cli) -> Outcome<ExperimentConfig> {
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        // flags override the stored values
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if cli.threads.is_some() {
            cfg.threads = cli.threads;
        }
        return Ok(cfg);
    }
    let command = cli.command.ok_or_else(|| config_err("no subcommand given (see --help)"))?;
    Ok(ExperimentConfig { seed: cli.seed.unwrap_or(0), threads: cli.threads, command })
}

fn run(cli: Cli) -> Outcome {
    let print = cli.print_config;
    let cfg = resolve(cli)?;
    if print {
        let mut s = serde_json::to_string_pretty(&cfg).map_err(|e| Failure { code: 1, msg: e.to_string() })?;
        s.push('\n');
        std::io::stdout().write_all(s.as_bytes())?;
        return Ok(());
    }
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(config_err("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure { code: 1, msg: e.to_string() })?;
    }
    let seed = cfg.seed;
    match &cfg.command {
        Command::Simulate(a) => simulate(a, seed),
        Command::Train(a) => train_cmd(a, seed),
        Command::Detect(a) => detect(a),
        Command::Localise(a) => localise_cmd(a),
        Command::Evaluate(a) => evaluate(a, seed),
        Command::Reproduce(a) => reproduce(a, seed),
    }
}

/// Writes to `out`, or stdout when absent.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Outcome {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn parse_role(s: &str) -> Outcome<Role> {
    match s.trim().to_ascii_lowercase().as_str() {
        "train" => Ok(Role::Train),
        "test" => Ok(Role::Test),
        other => Err(config_err(format!("unknown role `{other}` (expected train or test)"))),
    }
}

fn simulate(a: &SimulateArgs, seed: u64) -> Outcome {
    let data = match a.kind {
        DataKind::Scenario => {
            let spec = ScenarioSpec::new(Scenario::parse(&a.scenario)?, a.n, a.size, parse_role(&a.role)?)?;
            gen_scenario(&spec, seed)?
        }
        DataKind::MulticlassStrong | DataKind::MulticlassWeak => {
            let regime = if a.kind == DataKind::MulticlassStrong { Regime::Strong } else { Regime::Weak };
            gen_multiclass(&MulticlassSpec::table(regime, a.per_class), seed)?
        }
        DataKind::ArChange => gen_ar_change(&ArChangeSpec { n: a.n, ..ArChangeSpec::standard(a.size) }, seed)?,
        DataKind::Piecewise => {
            let p = gen_piecewise(a.n, &a.taus, &a.means, NoiseSpec::Gaussian { sd: a.noise_sd }, 1, seed)?;
            let mut mean = Vec::with_capacity(a.n);
            let mut seg = 0;
            for t in 1..=a.n {
                if seg < p.taus.len() && t > p.taus[seg] {
                    seg += 1;
                }
                mean.push(p.means[seg]);
            }
            let mut buf = Vec::new();
            write_series(&p.series, &[("mean", &mean)], &mut buf)?;
            return emit(a.out.as_deref(), &buf);
        }
    };
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf)?;
    emit(a.out.as_deref(), &buf)
}

fn train_cmd(a: &TrainArgs, seed: u64) -> Outcome {
    let data = load_dataset(&a.data)?;
    let mut pre = match a.scaling {
        InputScaling::UnitScale => Preprocess::unit_scale(),
        InputScaling::Identity => Preprocess::identity(),
    };
    if let Some(z) = a.truncate {
        // truncation acts on the raw values
        pre.steps.insert(0, Step::Truncate { z });
    }
    let channels: Vec<Channel> = a
        .channels
        .iter()
        .map(|c| match c {
            ChannelArg::Identity => Channel::Identity,
            ChannelArg::Square => Channel::Square,
            ChannelArg::LagProduct => Channel::LagProduct,
        })
        .collect();
    let pre = pre.with_channels(&channels);
    let widths = if a.widths.is_empty() { vec![2 * data.n - 2] } else { a.widths.clone() };
    let arch = Architecture::new(pre.output_dim(data.n), &widths, data.labels.num_outputs())?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        ..TrainConfig::default().with_seed(seed)
    };
    let net = train(&data, &arch, &pre, &cfg)?;
    net.save(&a.out)?;
    Ok(())
}

type Stat = fn(&Series) -> cpdnet::Result<f64>;

fn stat_of(kind: DetectorKind) -> Option<Stat> {
    match kind {
        DetectorKind::Cusum => Some(|x| Ok(cusum_statistic(x).0)),
        DetectorKind::CusumStar => Some(|x| Ok(cusum_star_statistic(x)?.0)),
        DetectorKind::Wilcoxon => Some(|x| Ok(wilcoxon_statistic(x).0)),
        DetectorKind::Adaptive | DetectorKind::Network => None,
    }
}

struct Detector {
    classifier: Box<dyn Classifier>,
    stat: Option<Stat>,
    network: Option<Network>,
    threshold: Option<f64>,
}

fn build_detector(a: &DetectorArgs, n: usize) -> Outcome<Detector> {
    if let Some(stat) = stat_of(a.detector) {
        let lambda = match (a.threshold, &a.tune_on) {
            (Some(t), _) => t,
            (None, Some(path)) => tune_threshold_on(stat, &load_dataset(path)?, &ThresholdGrid::Exhaustive)?.threshold,
            (None, None) if a.detector == DetectorKind::Cusum => threshold(n, ThresholdKind::Null { eps: 0.05 })?,
            (None, None) => return Err(config_err("this detector needs --threshold or --tune-on")),
        };
        return Ok(Detector {
            classifier: Box::new(Thresholded::new(stat, lambda)),
            stat: Some(stat),
            network: None,
            threshold: Some(lambda),
        });
    }
    match a.detector {
        DetectorKind::Adaptive => Ok(Detector {
            classifier: Box::new(FnClassifier::new(LabelSpace::Multiclass { classes: 5 }, adaptive_classify)),
            stat: None,
            network: None,
            threshold: None,
        }),
        _ => {
            let path = a.network.as_ref().ok_or_else(|| config_err("the network detector needs --network"))?;
            let net = Network::load(path)?;
            Ok(Detector { classifier: Box::new(net.clone()), stat: None, network: Some(net), threshold: None })
        }
    }
}

fn detect(a: &DetectArgs) -> Outcome {
    let data = load_dataset(&a.data)?;
    let det = build_detector(&a.detector, data.n)?;
    let xs: Vec<&Series> = data.series().collect();
    let predicted = det.classifier.classify_all(&xs)?;
    let score: Vec<Option<f64>> = match (det.stat, &det.network) {
        (Some(stat), _) => xs.iter().map(|x| stat(x).map(Some)).collect::<cpdnet::Result<_>>()?,
        (None, Some(net)) if net.architecture().output_dim == 1 => {
            net.predict_many(&xs)?.into_iter().map(|f| Some(f.probabilities[0])).collect()
        }
        _ => vec![None; xs.len()],
    };
    let rows: Vec<Vec<String>> = data
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                e.label.to_string(),
                predicted[i].to_string(),
                score[i].map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    let mut buf = Vec::new();
    write_table(&["index", "label", "predicted", "score"], &rows, &mut buf)?;
    emit(a.out.as_deref(), &buf)
}

fn evaluate(a: &EvaluateArgs, seed: u64) -> Outcome {
    let test: LabeledDataset = load_dataset(&a.test)?;
    let det = build_detector(&a.detector, test.n)?;
    let mut report = mer(det.classifier.as_ref(), &test)?.with_seed(seed);
    if let Some(t) = det.threshold {
        report = report.with_threshold(t);
    }
    emit(a.out.as_deref(), report_json("evaluate", &report)?.as_bytes())
}

#[derive(Serialize)]
struct LocaliseReport {
    detector: WindowKind,
    window: usize,
    lambda: Option<f64>,
    gamma: f64,
    series_len: usize,
    taus: Vec<usize>,
    segments: Vec<(usize, usize)>,
}

fn localise_cmd(a: &LocaliseArgs) -> Outcome {
    let x = load_series(&a.input, "x")?;
    let lambda = |kind: ThresholdKind| -> Outcome<f64> {
        match a.lambda {
            Some(l) => Ok(l),
            None => Ok(threshold(a.window, kind)?),
        }
    };
    let (psi, used): (Box<dyn WindowClassifier>, Option<f64>) = match a.detector {
        WindowKind::CusumStar => {
            let l = lambda(ThresholdKind::Star { b: a.b })?;
            (Box::new(CusumStarWindow::new(a.window, l)?), Some(l))
        }
        WindowKind::Cusum => {
            let l = lambda(ThresholdKind::Corollary { b: a.b })?;
            (Box::new(CusumWindow::new(a.window, l)?), Some(l))
        }
        WindowKind::Network => {
            let path = a.network.as_ref().ok_or_else(|| config_err("the network detector needs --network"))?;
            (Box::new(Network::load(path)?), None)
        }
    };
    let res = localise(&x, psi.as_ref(), a.gamma)?;
    if let Some(trace) = &a.trace {
        let rows: Vec<Vec<String>> = (0..res.labels.len())
            .map(|k| {
                let i = k + 1;
                vec![
                    i.to_string(),
                    res.labels[k].to_string(),
                    fmt_f64(res.probabilities[k]),
                    res.running_mean_at(i).map(fmt_f64).unwrap_or_default(),
                ]
            })
            .collect();
        let mut buf = Vec::new();
        write_table(&["start", "label", "probability", "running_mean"], &rows, &mut buf)?;
        fs::write(trace, buf)?;
    }
    let report = LocaliseReport {
        detector: a.detector,
        window: res.window,
        lambda: used,
        gamma: a.gamma,
        series_len: x.len(),
        taus: res.taus,
        segments: res.segments,
    };
    emit(a.out.as_deref(), report_json("localise", &report)?.as_bytes())
}

fn reproduce(a: &ReproduceArgs, seed: u64) -> Outcome {
    if a.recipe == "list" {
        let mut s = RECIPES.join("\n");
        s.push('\n');
        return emit(a.out.as_deref(), s.as_bytes());
    }
    let json = recipes::run(&a.recipe, seed)?;
    emit(a.out.as_deref(), json.as_bytes())
}
