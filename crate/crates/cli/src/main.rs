//! `astskin` command-line tool.
//!
//! Exit codes: 0 on success, 1 for I/O and domain errors (the message starts
//! with the error name), 2 for usage errors.

mod commands;
mod meta;

use std::path::PathBuf;
use std::process::ExitCode;

use astskin::dsp::Window;
use astskin::learn::Task;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "astskin", version, about = "Acoustic soft-skin calibration pipeline")]
pub struct Cli {
    /// Seed for every stochastic step; recorded in each run_meta sidecar.
    #[arg(long, global = true, env = "AST_SEED", default_value_t = 7)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the reference tone set to a 16-bit mono WAV file.
    Synth(SynthArgs),
    /// Frame a WAV capture and write one amplitude row per frame.
    Featurize(FeaturizeArgs),
    /// Generate a calibration CSV from a skin profile.
    Simulate(SimulateArgs),
    /// Train one model on the training side of a stratified holdout split.
    Train(TrainArgs),
    /// Compare models by k-fold cross-validation and report the winner.
    Select(SelectArgs),
    /// Predict force or location for feature vectors.
    Predict(PredictArgs),
    /// Score a trained model on the holdout rows of a calibration CSV.
    Evaluate(EvaluateArgs),
    /// Write amplitude-vs-force and tolerance-band charts (SVG + CSV).
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Sample rate in Hz.
    #[arg(long, default_value_t = astskin::dsp::DEFAULT_SAMPLE_RATE_HZ)]
    pub rate: u32,
    /// Duration in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub dur: f64,
    /// Tones as `freq:amplitude` pairs; defaults to 300/500/700/900 Hz at 0.6.
    #[arg(long, value_delimiter = ',')]
    pub tones: Vec<String>,
    /// Output WAV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Input WAV path.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Frame length in samples.
    #[arg(long, default_value_t = astskin::dsp::DEFAULT_FRAME_LEN)]
    pub frame: usize,
    /// Hop between frame starts in samples.
    #[arg(long, default_value_t = astskin::dsp::DEFAULT_FRAME_LEN)]
    pub hop: usize,
    /// Window applied before the DFT: `rect` or `hann`.
    #[arg(long, default_value = "rect")]
    pub window: Window,
    /// Output CSV path (`frame,a300,a500,a700,a900`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Profile JSON path or bundled profile name (ast1, ast2a, ..., ast4d).
    #[arg(long)]
    pub profile: String,
    /// Number of force levels spread evenly over [0, force_max].
    #[arg(long, default_value_t = 34)]
    pub levels: usize,
    /// Samples per force level and location.
    #[arg(long, default_value_t = 50)]
    pub per_level: usize,
    /// Override the profile's noise standard deviation.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Output calibration CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Calibration CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// `force` or `location`.
    #[arg(long)]
    pub task: Task,
    /// Model kind, e.g. `gp-exponential`, `knn-weighted`, `tree-fine`.
    #[arg(long)]
    pub kind: String,
    /// Share of each location used for training; 1 trains on every row.
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    /// Output model JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Calibration CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// `force` or `location`.
    #[arg(long)]
    pub task: Task,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Restrict the comparison to these model kinds (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Comparison table CSV (all rows including placeholders).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-fold scores CSV (`spec,mean_score,fold_1..fold_k`).
    #[arg(long)]
    pub cv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// One feature vector `a300,a500,a700,a900`.
    #[arg(long, value_delimiter = ',', num_args = 1, conflicts_with = "input", required_unless_present = "input")]
    pub features: Vec<f64>,
    /// CSV with a300..a900 columns (feature table or calibration file).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Write predictions as CSV instead of printing them.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Trained model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Calibration CSV the model was trained from.
    #[arg(long)]
    pub data: PathBuf,
    /// Holdout fraction; defaults to the value recorded in the model, else 0.9.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Evaluation JSON output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Calibration CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Force evaluation JSON files to chart as tolerance bands (repeatable).
    #[arg(long)]
    pub evaluation: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match commands::run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use std::collections::BTreeMap;

    /// Every flag each subcommand accepts. Adding a flag without listing it
    /// here fails the test, which keeps the help output and this registry
    /// in step.
    fn registry() -> BTreeMap<&'static str, Vec<&'static str>> {
        BTreeMap::from([
            ("synth", vec!["rate", "dur", "tones", "out"]),
            ("featurize", vec!["in", "frame", "hop", "window", "out"]),
            ("simulate", vec!["profile", "levels", "per-level", "noise-sigma", "out"]),
            ("train", vec!["data", "task", "kind", "train-fraction", "out"]),
            ("select", vec!["data", "task", "k", "models", "out", "cv-out"]),
            ("predict", vec!["model", "features", "in", "out"]),
            ("evaluate", vec!["model", "data", "train-fraction", "out"]),
            ("report", vec!["data", "evaluation", "out-dir"]),
        ])
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_every_flag() {
        let mut root = Cli::command();
        root.build();
        let registry = registry();
        let mut subs: Vec<&str> = root.get_subcommands().map(|s| s.get_name()).filter(|n| *n != "help").collect();
        subs.sort_unstable();
        assert_eq!(subs, registry.keys().copied().collect::<Vec<_>>());
        for sub in root.get_subcommands_mut().filter(|s| s.get_name() != "help") {
            let name = sub.get_name().to_string();
            let expected = &registry[name.as_str()];
            let help = sub.render_long_help().to_string();
            let mut flags: Vec<String> = Vec::new();
            for arg in sub.get_arguments() {
                assert!(!arg.is_hide_set(), "{name}: hidden argument {}", arg.get_id());
                if let Some(long) = arg.get_long() {
                    assert!(help.contains(&format!("--{long}")), "{name}: --{long} missing from help");
                    flags.push(long.to_string());
                }
            }
            for f in expected {
                assert!(flags.iter().any(|g| g == f), "{name}: registry flag --{f} not defined");
            }
            for f in &flags {
                let global = ["seed", "help", "version"].contains(&f.as_str());
                assert!(global || expected.contains(&f.as_str()), "{name}: --{f} not in registry");
            }
            assert!(help.contains("--seed"), "{name}: --seed missing from help");
        }
    }

    #[test]
    fn seed_flag_and_default() {
        let cli = Cli::try_parse_from(["astskin", "synth", "--out", "x.wav"]).unwrap();
        if std::env::var_os("AST_SEED").is_none() {
            assert_eq!(cli.seed, 7);
        }
        let cli = Cli::try_parse_from(["astskin", "--seed", "11", "synth", "--out", "x.wav"]).unwrap();
        assert_eq!(cli.seed, 11);
        let cli = Cli::try_parse_from(["astskin", "synth", "--out", "x.wav", "--seed", "12"]).unwrap();
        assert_eq!(cli.seed, 12);
    }

    #[test]
    fn usage_errors_are_rejected_by_the_parser() {
        assert!(Cli::try_parse_from(["astskin", "train", "--data", "d.csv", "--task", "weight", "--kind", "x", "--out", "m"]).is_err());
        assert!(Cli::try_parse_from(["astskin", "predict", "--model", "m.json"]).is_err());
        assert!(Cli::try_parse_from(["astskin", "featurize", "--in", "a.wav", "--out", "f.csv", "--window", "tri"]).is_err());
    }
}
