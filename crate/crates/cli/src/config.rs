// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "cpdnet", version, about = "Offline change-point detection as classification")]
pub struct Cli {
    /// Master seed; falls back to CPD_SEED, then 0.
    #[arg(long, env = "CPD_SEED", global = true)]
    pub seed: Option<u64>,

    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Runs the experiment config stored in this JSON file instead of a subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Prints the resolved experiment config as JSON and exits.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

/// A complete, replayable run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Generates a labelled dataset or a long piecewise-constant series as CSV.
    Simulate(SimulateArgs),
    /// Trains a network on a dataset CSV and writes it as JSON.
    Train(TrainArgs),
    /// Runs a detector on every series of a dataset and writes per-series CSV.
    Detect(DetectArgs),
    /// Locates multiple changes in a long series.
    Localise(LocaliseArgs),
    /// Evaluates a detector on a labelled test set and writes a JSON report.
    Evaluate(EvaluateArgs),
    /// Runs a named experiment recipe end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Scenario,
    MulticlassStrong,
    MulticlassWeak,
    ArChange,
    Piecewise,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "scenario")]
    pub kind: DataKind,
    /// S1, S1', S2 or S3.
    #[arg(long, default_value = "S1")]
    pub scenario: String,
    /// Series length (total length for piecewise).
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Number of series.
    #[arg(long = "N", default_value_t = 700)]
    pub size: usize,
    /// train or test jump ranges.
    #[arg(long, default_value = "train")]
    pub role: String,
    /// Series per class for multiclass data.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Change-points of a piecewise series.
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<usize>,
    /// Segment means of a piecewise series.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub means: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputScaling {
    /// Per-series min-max scaling onto [0, 1].
    UnitScale,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelArg {
    Identity,
    Square,
    LagProduct,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Hidden widths, e.g. 64,64,64. Defaults to one layer of 2n−2.
    #[arg(long, value_delimiter = ',')]
    pub widths: Vec<usize>,
    #[arg(long, value_enum, default_value = "unit-scale")]
    pub scaling: InputScaling,
    /// z-score truncation level applied before scaling.
    #[arg(long)]
    pub truncate: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "identity")]
    pub channels: Vec<ChannelArg>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Cusum,
    CusumStar,
    Wilcoxon,
    /// BIC model selection over the five multiclass models.
    Adaptive,
    Network,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorArgs {
    #[arg(long, value_enum, default_value = "cusum")]
    pub detector: DetectorKind,
    /// Fixed threshold for a statistic detector.
    #[arg(long, conflicts_with = "tune_on")]
    pub threshold: Option<f64>,
    /// Tunes the threshold on this labelled dataset.
    #[arg(long)]
    pub tune_on: Option<PathBuf>,
    /// Network JSON for the network detector.
    #[arg(long)]
    pub network: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    Cusum,
    CusumStar,
    Network,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocaliseArgs {
    /// CSV with a column `x`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "cusum-star")]
    pub detector: WindowKind,
    #[arg(long, default_value_t = 100)]
    pub window: usize,
    /// Window threshold; defaults to the one implied by `--b`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Signal-strength level B.
    #[arg(long, default_value_t = 1.79)]
    pub b: f64,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Writes per-window labels and running means as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceArgs {
    /// Recipe name, or `list`.
    pub recipe: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_of(argv: &[&str]) -> ExperimentConfig {
        let cli = Cli::try_parse_from(std::iter::once("cpdnet").chain(argv.iter().copied())).unwrap();
        ExperimentConfig { seed: cli.seed.unwrap_or(0), threads: cli.threads, command: cli.command.unwrap() }
    }

    #[test]
    fn every_command_round_trips() {
        let cases: &[&[&str]] = &[
            &["simulate", "--scenario", "S3", "--n", "50", "--N", "20", "--seed", "4", "--out", "d.csv"],
            &["simulate", "--kind", "piecewise", "--n", "300", "--taus", "100,200", "--means", "0,-3,2"],
            &["train", "--data", "d.csv", "--widths", "8,8", "--channels", "identity,square", "--out", "n.json"],
            &["detect", "--data", "d.csv", "--detector", "wilcoxon", "--threshold", "2.5"],
            &["evaluate", "--test", "t.csv", "--tune-on", "d.csv", "--threads", "2"],
            &["localise", "--input", "p.csv", "--gamma", "0.7", "--trace", "tr.csv"],
            &["reproduce", "fig1a", "--seed", "9"],
        ];
        for argv in cases {
            let cfg = config_of(argv);
            let json = serde_json::to_string(&cfg).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, cfg, "{json}");
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = r#"{"seed":1,"command":{"name":"reproduce","recipe":"fig1a","out":null,"extra":1}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
    }

    #[test]
    fn negative_means_parse() {
        let cfg = config_of(&["simulate", "--kind", "piecewise", "--taus", "5", "--means", "-1,-2"]);
        let Command::Simulate(a) = cfg.command else { panic!() };
        assert_eq!(a.means, vec![-1.0, -2.0]);
    }
}
