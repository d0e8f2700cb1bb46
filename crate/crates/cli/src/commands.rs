use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use astskin::dataset::{
    features_to_csv, holdout_indices, parse_feature_table, read_csv, write_csv, CalibrationDataset, DatasetError,
};
use astskin::dsp::wav::{wav_read, wav_write, WavError};
use astskin::dsp::{featurize, reference_tones, synth_reference, DspError, SpectralFeatures, ToneSpec};
use astskin::io::write_atomic;
use astskin::learn::{load_model, registry, save_model, train, LearnError, ModelSpec, Task, TrainedModel};
use astskin::metrics::{
    comparison_table, cv_compare, error_stats, location_accuracy, tolerance_bands, MetricsError, ToleranceReport,
};
use astskin::report::{write_report, ReportError};
use astskin::simskin::{generate_dataset, load_profile, Location, SimError, SkinProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta::{FileDigest, RunMeta};
use crate::{
    Cli, Command, EvaluateArgs, FeaturizeArgs, PredictArgs, ReportArgs, SelectArgs, SimulateArgs, SynthArgs, TrainArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("IoError: cannot read {path}: {source}")]
    Input { path: PathBuf, source: std::io::Error },
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error("MalformedEvaluation: {path}: {msg}")]
    MalformedEvaluation { path: PathBuf, msg: String },
}

type Result<T> = std::result::Result<T, CliError>;

/// Fails early, naming the path, when an input file cannot be opened.
fn check_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        std::fs::File::open(p).map_err(|source| CliError::Input { path: p.to_path_buf(), source })?;
    }
    Ok(())
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::Featurize(a) => check_inputs(&[&a.input])?,
        Command::Train(a) => check_inputs(&[&a.data])?,
        Command::Select(a) => check_inputs(&[&a.data])?,
        Command::Predict(a) => {
            check_inputs(&[&a.model])?;
            if let Some(i) = &a.input {
                check_inputs(&[i])?;
            }
        }
        Command::Evaluate(a) => check_inputs(&[&a.model, &a.data])?,
        Command::Report(a) => {
            check_inputs(&[&a.data])?;
            check_inputs(&a.evaluation.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
        }
        Command::Synth(_) | Command::Simulate(_) => {}
    }
    match &cli.command {
        Command::Synth(a) => synth(a, cli.seed, argv),
        Command::Featurize(a) => cmd_featurize(a, cli.seed, argv),
        Command::Simulate(a) => simulate(a, cli.seed, argv),
        Command::Train(a) => cmd_train(a, cli.seed, argv),
        Command::Select(a) => select(a, cli.seed, argv),
        Command::Predict(a) => predict(a, cli.seed, argv),
        Command::Evaluate(a) => evaluate(a, cli.seed, argv),
        Command::Report(a) => report(a, cli.seed, argv),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn parse_tone(s: &str) -> Result<ToneSpec> {
    let bad = || CliError::InvalidArgument(format!("tone '{s}' is not freq:amplitude"));
    let (f, a) = s.split_once(':').ok_or_else(bad)?;
    Ok(ToneSpec::new(f.trim().parse().map_err(|_| bad())?, a.trim().parse().map_err(|_| bad())?))
}

fn synth(a: &SynthArgs, seed: u64, argv: &[String]) -> Result<()> {
    let tones = if a.tones.is_empty() {
        reference_tones()
    } else {
        a.tones.iter().map(|t| parse_tone(t)).collect::<Result<Vec<_>>>()?
    };
    let s = synth_reference(&tones, a.rate, a.dur)?;
    wav_write(&s.waveform, &a.out)?;
    let mut meta = RunMeta::new("synth", argv, seed);
    meta.output(&a.out)?;
    meta.extra.insert("scale".into(), s.scale.into());
    meta.write_beside(&a.out)?;
    println!("wrote {} samples to {} (scale {})", s.waveform.len(), a.out.display(), s.scale);
    Ok(())
}

fn cmd_featurize(a: &FeaturizeArgs, seed: u64, argv: &[String]) -> Result<()> {
    let w = wav_read(&a.input)?;
    let rows = featurize(&w, a.frame, a.hop, a.window)?;
    write_text(&a.out, &features_to_csv(&rows))?;
    let mut meta = RunMeta::new("featurize", argv, seed);
    meta.input(&a.input)?;
    meta.output(&a.out)?;
    meta.write_beside(&a.out)?;
    println!("wrote {} feature rows to {}", rows.len(), a.out.display());
    Ok(())
}

/// A profile argument is a file path when it names an existing file,
/// otherwise a bundled profile name (with or without `.json`).
fn resolve_profile(arg: &str) -> Result<(SkinProfile, FileDigest)> {
    let path = Path::new(arg);
    if path.is_file() {
        let p = load_profile(path)?;
        return Ok((p, FileDigest::of_file(path)?));
    }
    let name = arg.trim_end_matches(".json");
    let p = SkinProfile::bundled(name).ok_or_else(|| {
        CliError::InvalidArgument(format!("'{arg}' is neither a profile file nor a bundled profile name"))
    })?;
    let digest = FileDigest::of_bytes(format!("bundled:{name}"), p.to_json().as_bytes());
    Ok((p, digest))
}

fn simulate(a: &SimulateArgs, seed: u64, argv: &[String]) -> Result<()> {
    let (mut profile, digest) = resolve_profile(&a.profile)?;
    if let Some(sigma) = a.noise_sigma {
        profile = profile.with_noise_sigma(sigma)?;
    }
    let ds = generate_dataset(&profile, a.levels, a.per_level, seed)?;
    write_csv(&ds, &a.out)?;
    let mut meta = RunMeta::new("simulate", argv, seed);
    meta.inputs.push(digest);
    meta.output(&a.out)?;
    meta.write_beside(&a.out)?;
    println!("wrote {} rows for {} to {}", ds.len(), profile.skin_id(), a.out.display());
    Ok(())
}

/// Training and holdout rows under the stratified split used by `train`
/// and `evaluate`. A fraction of 1 keeps every row for training.
fn split(ds: &CalibrationDataset, train_fraction: f64, seed: u64) -> Result<(CalibrationDataset, CalibrationDataset)> {
    if train_fraction == 1.0 {
        return Ok((ds.clone(), ds.subset(&[])));
    }
    let s = holdout_indices(ds, train_fraction, seed)?;
    Ok((ds.subset(&s.train), ds.subset(&s.test)))
}

const NOTE_FRACTION: &str = "holdout_train_fraction";
const NOTE_SEED: &str = "holdout_seed";

fn cmd_train(a: &TrainArgs, seed: u64, argv: &[String]) -> Result<()> {
    let spec = ModelSpec::parse(a.task, &a.kind)?;
    let ds = read_csv(&a.data)?;
    let (train_ds, test_ds) = split(&ds, a.train_fraction, seed)?;
    let mut model = train(&spec, &train_ds, seed)?;
    model.training_meta.notes.insert(NOTE_FRACTION.into(), a.train_fraction.to_string());
    model.training_meta.notes.insert(NOTE_SEED.into(), seed.to_string());
    for w in &model.training_meta.warnings {
        eprintln!("warning: {w}");
    }
    save_model(&model, &a.out)?;
    let mut meta = RunMeta::new("train", argv, seed);
    meta.input(&a.data)?;
    meta.output(&a.out)?;
    meta.write_beside(&a.out)?;
    println!(
        "trained {} on {} rows ({} held out), wrote {}",
        spec,
        train_ds.len(),
        test_ds.len(),
        a.out.display()
    );
    Ok(())
}

fn select(a: &SelectArgs, seed: u64, argv: &[String]) -> Result<()> {
    let specs = if a.models.is_empty() {
        registry(a.task)
    } else {
        a.models.iter().map(|m| ModelSpec::parse(a.task, m.trim())).collect::<std::result::Result<_, _>>()?
    };
    let ds = read_csv(&a.data)?;
    let report = cv_compare(&specs, &ds, a.k, seed)?;
    let column = ds.skin_id().unwrap_or("data").to_string();
    write_text(&a.out, &comparison_table(a.task, &[(column, report.clone())]))?;
    let mut meta = RunMeta::new("select", argv, seed);
    meta.input(&a.data)?;
    meta.output(&a.out)?;
    if let Some(cv) = &a.cv_out {
        write_text(cv, &report.to_csv())?;
        meta.output(cv)?;
    }
    meta.extra.insert("selected".into(), report.winner().spec.to_string().into());
    meta.write_beside(&a.out)?;
    print!("{}", report.to_text());
    println!("selected: {}", report.winner().spec);
    Ok(())
}

fn feature_vector(values: &[f64]) -> Result<SpectralFeatures> {
    let arr: [f64; 4] = values
        .try_into()
        .map_err(|_| CliError::InvalidArgument(format!("--features needs 4 values, got {}", values.len())))?;
    let f = SpectralFeatures::from_array(arr);
    if !f.is_valid() {
        return Err(CliError::InvalidArgument("amplitudes must be finite and non-negative".into()));
    }
    Ok(f)
}

fn predict(a: &PredictArgs, seed: u64, argv: &[String]) -> Result<()> {
    let model = load_model(&a.model)?;
    let rows = match &a.input {
        Some(path) => parse_feature_table(&std::fs::read_to_string(path)?)?,
        None => vec![feature_vector(&a.features)?],
    };
    let mut out = String::new();
    match model.task() {
        Task::ForceRegression => {
            out.push_str("frame,force_n\n");
            for (i, f) in rows.iter().enumerate() {
                out.push_str(&format!("{i},{}\n", model.predict_force(f)?));
            }
        }
        Task::LocationClassification => {
            out.push_str("frame,location,score_a,score_b,score_c\n");
            for (i, f) in rows.iter().enumerate() {
                let p = model.predict_location(f)?;
                out.push_str(&format!("{i},{},{},{},{}\n", p.label, p.scores[0], p.scores[1], p.scores[2]));
            }
        }
    }
    match &a.out {
        Some(path) => {
            write_text(path, &out)?;
            let mut meta = RunMeta::new("predict", argv, seed);
            meta.input(&a.model)?;
            if let Some(input) = &a.input {
                meta.input(input)?;
            }
            meta.output(path)?;
            meta.write_beside(path)?;
        }
        None if a.input.is_none() => {
            // A single vector prints just the prediction.
            let value = out.lines().nth(1).and_then(|l| l.split(',').nth(1)).unwrap_or_default();
            println!("{value}");
        }
        None => print!("{out}"),
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BandEntry {
    pub tolerance_n: f64,
    pub pct: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelEntry {
    pub trials: usize,
    pub true_predictions: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum Evaluation {
    ForceRegression {
        model: String,
        skin_id: String,
        n: usize,
        pct_within: Vec<BandEntry>,
        rmse_n: f64,
        mean_signed_error_n: f64,
        std_error_n: f64,
        max_abs_error_n: f64,
    },
    LocationClassification {
        model: String,
        skin_id: String,
        per_label: BTreeMap<Location, LabelEntry>,
        overall_accuracy_pct: f64,
        overall_display: String,
    },
}

fn holdout_of(model: &TrainedModel, a: &EvaluateArgs, seed: u64) -> Result<(f64, u64)> {
    let notes = &model.training_meta.notes;
    let fraction = match (a.train_fraction, notes.get(NOTE_FRACTION)) {
        (Some(f), _) => f,
        (None, Some(n)) => n
            .parse()
            .map_err(|_| CliError::InvalidArgument(format!("model note {NOTE_FRACTION} = '{n}' is not a number")))?,
        (None, None) => 0.9,
    };
    let split_seed = match notes.get(NOTE_SEED) {
        Some(s) => s
            .parse()
            .map_err(|_| CliError::InvalidArgument(format!("model note {NOTE_SEED} = '{s}' is not an integer")))?,
        None => seed,
    };
    Ok((fraction, split_seed))
}

fn evaluate(a: &EvaluateArgs, seed: u64, argv: &[String]) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = read_csv(&a.data)?;
    let (fraction, split_seed) = holdout_of(&model, a, seed)?;
    let (train_ds, test_ds) = split(&ds, fraction, split_seed)?;
    if train_ds.content_hash() != model.training_meta.dataset_hash {
        eprintln!("warning: training rows of this split differ from the rows the model was fitted on");
    }
    if test_ds.is_empty() {
        return Err(CliError::InvalidArgument("the model was trained on every row; nothing is held out".into()));
    }
    let skin_id = ds.skin_id().unwrap_or_default().to_string();
    let name = model.spec.to_string();
    let evaluation = match model.task() {
        Task::ForceRegression => {
            let pred = test_ds.records.iter().map(|r| model.predict_force(&r.features)).collect::<std::result::Result<Vec<_>, _>>()?;
            let truth = test_ds.forces();
            let bands = tolerance_bands(&truth, &pred)?;
            let stats = error_stats(&truth, &pred)?;
            for (t, p) in &bands.pct_within {
                println!("within +/-{t} N: {p:.2}%");
            }
            println!("rmse: {:.4} N", bands.rmse_n);
            Evaluation::ForceRegression {
                model: name,
                skin_id,
                n: bands.n,
                pct_within: bands.pct_within.iter().map(|&(tolerance_n, pct)| BandEntry { tolerance_n, pct }).collect(),
                rmse_n: bands.rmse_n,
                mean_signed_error_n: stats.mean_signed_error_n,
                std_error_n: stats.std_error_n,
                max_abs_error_n: stats.max_abs_error_n,
            }
        }
        Task::LocationClassification => {
            let pred = test_ds
                .records
                .iter()
                .map(|r| model.predict_location(&r.features).map(|p| p.label))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let report = location_accuracy(&test_ds.locations(), &pred)?;
            println!("location,trials,true_predictions");
            for (l, c) in &report.per_label {
                println!("{l},{},{}", c.trials, c.true_predictions);
            }
            println!("accuracy: {}%", report.overall_display());
            Evaluation::LocationClassification {
                model: name,
                skin_id,
                per_label: report
                    .per_label
                    .iter()
                    .map(|(l, c)| (*l, LabelEntry { trials: c.trials, true_predictions: c.true_predictions }))
                    .collect(),
                overall_accuracy_pct: report.overall_accuracy_pct,
                overall_display: report.overall_display(),
            }
        }
    };
    let mut text = serde_json::to_string_pretty(&evaluation).expect("evaluation serialises");
    text.push('\n');
    write_text(&a.out, &text)?;
    let mut meta = RunMeta::new("evaluate", argv, seed);
    meta.input(&a.model)?;
    meta.input(&a.data)?;
    meta.output(&a.out)?;
    meta.extra.insert("holdout_train_fraction".into(), fraction.into());
    meta.extra.insert("holdout_seed".into(), split_seed.into());
    meta.write_beside(&a.out)?;
    Ok(())
}

fn read_force_evaluation(path: &Path) -> Result<(String, ToleranceReport)> {
    let text = std::fs::read_to_string(path)?;
    let bad = |msg: String| CliError::MalformedEvaluation { path: path.to_path_buf(), msg };
    match serde_json::from_str::<Evaluation>(&text).map_err(|e| bad(e.to_string()))? {
        Evaluation::ForceRegression { model, n, pct_within, rmse_n, .. } => Ok((
            model,
            ToleranceReport { n, pct_within: pct_within.iter().map(|b| (b.tolerance_n, b.pct)).collect(), rmse_n },
        )),
        Evaluation::LocationClassification { .. } => Err(bad("expected a force evaluation".into())),
    }
}

fn report(a: &ReportArgs, seed: u64, argv: &[String]) -> Result<()> {
    let ds = read_csv(&a.data)?;
    let evaluations = a.evaluation.iter().map(|p| read_force_evaluation(p)).collect::<Result<Vec<_>>>()?;
    let written = write_report(&ds, &evaluations, &a.out_dir)?;
    let mut meta = RunMeta::new("report", argv, seed);
    meta.input(&a.data)?;
    for e in &a.evaluation {
        meta.input(e)?;
    }
    for p in &written {
        meta.output(p)?;
    }
    meta.write_beside(&a.out_dir)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
