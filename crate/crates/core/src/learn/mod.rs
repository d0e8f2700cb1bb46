//! Force regressors and location classifiers mapping the four tone
//! amplitudes to `(force, location)`.
//!
//! Every model standardises its inputs with statistics from the training
//! rows. Training is deterministic in `(spec, dataset, seed)`; saved models
//! carry all reals as hex floats so a reload predicts bit-identically.

pub mod gp;
pub mod knn;
pub mod linalg;
pub mod linear;
pub mod standardize;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CalibrationDataset;
use crate::dsp::SpectralFeatures;
use crate::rng::SplitMix64;
use crate::simskin::Location;

pub use gp::{GpKernel, GpRegressor, KernelKind};
pub use knn::{KnnClassifier, Metric, Weighting};
pub use linear::{LinearDiscriminant, LinearModel, NaiveBayes};
pub use standardize::Standardization;
pub use tree::{BaggedTrees, Tree, TreePreset};

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("EmptyDataset: training data has no records")]
    EmptyDataset,
    #[error("DegenerateData: {0}")]
    DegenerateData(String),
    #[error("SingularCovariance: pooled covariance is singular after regularisation")]
    SingularCovariance,
    #[error("NotPositiveDefinite: {0}")]
    NotPositiveDefinite(String),
    #[error("TaskMismatch: model performs {actual}, operation needs {expected}")]
    TaskMismatch { expected: Task, actual: Task },
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("Unsupported: {0}")]
    Unsupported(String),
    #[error("VersionMismatch: model file format_version {found}, expected {MODEL_FORMAT_VERSION}")]
    VersionMismatch { found: String },
    #[error("MalformedModelFile: {0}")]
    MalformedModelFile(String),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    ForceRegression,
    LocationClassification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::ForceRegression => "force-regression",
            Task::LocationClassification => "location-classification",
        })
    }
}

impl FromStr for Task {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "force" | "force-regression" => Ok(Task::ForceRegression),
            "location" | "location-classification" => Ok(Task::LocationClassification),
            other => Err(LearnError::InvalidSpec(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    LinearOls,
    Tree(TreePreset),
    BaggedTrees,
    Gp(KernelKind),
    Knn { k: usize, weighting: Weighting, metric: Metric },
    GaussianNaiveBayes,
    LinearDiscriminant,
}

/// Named kNN presets: `(name, k, weighting, metric)`.
pub const KNN_PRESETS: [(&str, usize, Weighting, Metric); 6] = [
    ("knn-fine", 1, Weighting::Uniform, Metric::Euclidean),
    ("knn-medium", 10, Weighting::Uniform, Metric::Euclidean),
    ("knn-coarse", 100, Weighting::Uniform, Metric::Euclidean),
    ("knn-cosine", 10, Weighting::Uniform, Metric::Cosine),
    ("knn-cubic", 10, Weighting::Uniform, Metric::Minkowski3),
    ("knn-weighted", 10, Weighting::InverseSquaredDistance, Metric::Euclidean),
];

impl ModelKind {
    pub fn supports(&self, task: Task) -> bool {
        match self {
            ModelKind::Tree(_) | ModelKind::BaggedTrees => true,
            ModelKind::LinearOls | ModelKind::Gp(_) => task == Task::ForceRegression,
            ModelKind::Knn { .. } | ModelKind::GaussianNaiveBayes | ModelKind::LinearDiscriminant => {
                task == Task::LocationClassification
            }
        }
    }

    /// Kind-specific settings as recorded in model files.
    pub fn hyperparameters(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            ModelKind::LinearOls => json!({ "ridge": linear::OLS_RIDGE }),
            ModelKind::Tree(p) => json!({ "preset": p.name(), "max_leaves": p.max_leaves() }),
            ModelKind::BaggedTrees => json!({
                "n_trees": tree::BAGGED_TREE_COUNT,
                "preset": TreePreset::Fine.name(),
                "max_leaves": TreePreset::Fine.max_leaves(),
            }),
            ModelKind::Gp(k) => json!({
                "kernel": k.name(),
                "max_train": gp::GP_MAX_TRAIN,
                "search_max": gp::GP_SEARCH_MAX,
                "length_scale_grid": gp::LENGTH_SCALE_GRID,
                "signal_variance_grid": gp::SIGNAL_VARIANCE_GRID,
                "noise_variance_grid": gp::NOISE_VARIANCE_GRID,
                "alpha_grid": if *k == KernelKind::RationalQuadratic { gp::RQ_ALPHA_GRID.to_vec() } else { vec![1.0] },
            }),
            ModelKind::Knn { k, weighting, metric } => {
                json!({ "k": k, "weighting": weighting.name(), "metric": metric.name() })
            }
            ModelKind::GaussianNaiveBayes => json!({ "variance_floor": linear::NB_VARIANCE_FLOOR }),
            ModelKind::LinearDiscriminant => json!({ "ridge": linear::LDA_RIDGE }),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::LinearOls => f.write_str("linear-ols"),
            ModelKind::Tree(p) => write!(f, "tree-{}", p.name()),
            ModelKind::BaggedTrees => f.write_str("bagged-trees"),
            ModelKind::Gp(k) => write!(f, "gp-{}", k.name()),
            ModelKind::Knn { k, weighting, metric } => {
                match KNN_PRESETS.iter().find(|p| (p.1, p.2, p.3) == (*k, *weighting, *metric)) {
                    Some(p) => f.write_str(p.0),
                    None => write!(f, "knn-k{k}-{}-{}", weighting.name(), metric.name()),
                }
            }
            ModelKind::GaussianNaiveBayes => f.write_str("gaussian-naive-bayes"),
            ModelKind::LinearDiscriminant => f.write_str("linear-discriminant"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LearnError::InvalidSpec(format!("unknown model kind '{s}'"));
        let kind = match s {
            "linear-ols" => ModelKind::LinearOls,
            "tree-fine" => ModelKind::Tree(TreePreset::Fine),
            "tree-medium" => ModelKind::Tree(TreePreset::Medium),
            "tree-coarse" => ModelKind::Tree(TreePreset::Coarse),
            "bagged-trees" => ModelKind::BaggedTrees,
            "gaussian-naive-bayes" => ModelKind::GaussianNaiveBayes,
            "linear-discriminant" => ModelKind::LinearDiscriminant,
            _ => {
                if let Some(k) = s.strip_prefix("gp-") {
                    let kernel = KernelKind::ALL.into_iter().find(|kk| kk.name() == k).ok_or_else(bad)?;
                    ModelKind::Gp(kernel)
                } else if let Some(p) = KNN_PRESETS.iter().find(|p| p.0 == s) {
                    ModelKind::Knn { k: p.1, weighting: p.2, metric: p.3 }
                } else if let Some(rest) = s.strip_prefix("knn-k") {
                    let (k, rest) = rest.split_once('-').ok_or_else(bad)?;
                    let k: usize = k.parse().map_err(|_| bad())?;
                    let weighting = [Weighting::Uniform, Weighting::InverseSquaredDistance]
                        .into_iter()
                        .find(|w| rest.starts_with(w.name()))
                        .ok_or_else(bad)?;
                    let metric_name = rest[weighting.name().len()..].strip_prefix('-').ok_or_else(bad)?;
                    let metric = [Metric::Euclidean, Metric::Cosine, Metric::Minkowski3]
                        .into_iter()
                        .find(|m| m.name() == metric_name)
                        .ok_or_else(bad)?;
                    if k == 0 {
                        return Err(bad());
                    }
                    ModelKind::Knn { k, weighting, metric }
                } else {
                    return Err(bad());
                }
            }
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub task: Task,
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn new(task: Task, kind: ModelKind) -> Result<Self, LearnError> {
        if !kind.supports(task) {
            return Err(LearnError::InvalidSpec(format!("{kind} cannot perform {task}")));
        }
        Ok(Self { task, kind })
    }

    pub fn parse(task: Task, kind: &str) -> Result<Self, LearnError> {
        Self::new(task, kind.parse()?)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.kind, f)
    }
}

/// Every implemented model for `task`, in registry order.
pub fn registry(task: Task) -> Vec<ModelSpec> {
    let kinds: Vec<ModelKind> = match task {
        Task::ForceRegression => vec![
            ModelKind::LinearOls,
            ModelKind::Tree(TreePreset::Fine),
            ModelKind::Tree(TreePreset::Medium),
            ModelKind::Tree(TreePreset::Coarse),
            ModelKind::Gp(KernelKind::RationalQuadratic),
            ModelKind::Gp(KernelKind::SquaredExponential),
            ModelKind::Gp(KernelKind::Matern52),
            ModelKind::Gp(KernelKind::Exponential),
            ModelKind::BaggedTrees,
        ],
        Task::LocationClassification => {
            let mut v = vec![
                ModelKind::Tree(TreePreset::Fine),
                ModelKind::Tree(TreePreset::Medium),
                ModelKind::Tree(TreePreset::Coarse),
                ModelKind::LinearDiscriminant,
                ModelKind::GaussianNaiveBayes,
            ];
            v.extend(KNN_PRESETS.iter().map(|p| ModelKind::Knn { k: p.1, weighting: p.2, metric: p.3 }));
            v.push(ModelKind::BaggedTrees);
            v
        }
    };
    kinds.into_iter().map(|kind| ModelSpec { task, kind }).collect()
}

/// Learned state, one variant per model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Parameters {
    Constant {
        #[serde(with = "crate::hexfloat")]
        value: f64,
    },
    Linear(LinearModel),
    Tree(Tree),
    Bagged(BaggedTrees),
    Gp(GpRegressor),
    Knn(KnnClassifier),
    NaiveBayes(NaiveBayes),
    Discriminant(LinearDiscriminant),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    /// SHA-256 of the training rows' canonical CSV.
    pub dataset_hash: String,
    pub seed: u64,
    pub row_count: usize,
    /// Rows actually used for fitting (differs from `row_count` after GP subsampling).
    pub fitted_rows: usize,
    pub rng: String,
    pub warnings: Vec<String>,
    /// Free-form provenance such as the holdout split used by the CLI.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub standardization: Standardization,
    pub parameters: Parameters,
    pub training_meta: TrainingMeta,
}

/// Label and per-class scores `[A, B, C]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationPrediction {
    pub label: Location,
    pub scores: [f64; 3],
}

fn subsample(n: usize, keep: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    perm.truncate(keep);
    perm
}

pub fn train(spec: &ModelSpec, ds: &CalibrationDataset, seed: u64) -> Result<TrainedModel, LearnError> {
    if ds.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if !spec.kind.supports(spec.task) {
        return Err(LearnError::InvalidSpec(format!("{} cannot perform {}", spec.kind, spec.task)));
    }
    let raw = ds.features();
    let (standardization, mut warnings) = Standardization::fit(&raw);
    let z: Vec<[f64; 4]> = raw.iter().map(|r| standardization.apply(r)).collect();
    let mut fitted_rows = z.len();

    let parameters = match spec.task {
        Task::ForceRegression => {
            let y = ds.forces();
            if y.iter().all(|&v| v == y[0]) {
                warnings.push("DegenerateData: all targets identical; constant model".into());
                Parameters::Constant { value: y[0] }
            } else {
                match spec.kind {
                    ModelKind::LinearOls => Parameters::Linear(
                        LinearModel::fit(&z, &y)
                            .ok_or_else(|| LearnError::NotPositiveDefinite("normal equations".into()))?,
                    ),
                    ModelKind::Tree(p) => {
                        let all: Vec<usize> = (0..z.len()).collect();
                        Parameters::Tree(Tree::fit(&z, tree::Targets::Regression(&y), &all, p.max_leaves()))
                    }
                    ModelKind::BaggedTrees => {
                        Parameters::Bagged(BaggedTrees::fit(&z, tree::Targets::Regression(&y), seed))
                    }
                    ModelKind::Gp(kind) => {
                        let (gp, used) = fit_gp(kind, &z, &y, seed)?;
                        fitted_rows = used;
                        Parameters::Gp(gp)
                    }
                    _ => unreachable!("checked by supports()"),
                }
            }
        }
        Task::LocationClassification => {
            let labels = ds.locations();
            if labels.iter().all(|&l| l == labels[0]) {
                return Err(LearnError::DegenerateData("classification needs at least two locations".into()));
            }
            match spec.kind {
                ModelKind::Tree(p) => {
                    let all: Vec<usize> = (0..z.len()).collect();
                    Parameters::Tree(Tree::fit(&z, tree::Targets::Classification(&labels), &all, p.max_leaves()))
                }
                ModelKind::BaggedTrees => {
                    Parameters::Bagged(BaggedTrees::fit(&z, tree::Targets::Classification(&labels), seed))
                }
                ModelKind::Knn { k, weighting, metric } => {
                    Parameters::Knn(KnnClassifier::new(k, weighting, metric, z, labels))
                }
                ModelKind::GaussianNaiveBayes => Parameters::NaiveBayes(NaiveBayes::fit(&z, &labels)),
                ModelKind::LinearDiscriminant => Parameters::Discriminant(
                    LinearDiscriminant::fit(&z, &labels).ok_or(LearnError::SingularCovariance)?,
                ),
                _ => unreachable!("checked by supports()"),
            }
        }
    };

    Ok(TrainedModel {
        spec: *spec,
        standardization,
        parameters,
        training_meta: TrainingMeta {
            dataset_hash: ds.content_hash(),
            seed,
            row_count: ds.len(),
            fitted_rows,
            rng: crate::rng::RNG_VERSION.into(),
            warnings,
            notes: BTreeMap::new(),
        },
    })
}

/// Subsample to [`gp::GP_MAX_TRAIN`], pick hyperparameters on the first
/// [`gp::GP_SEARCH_MAX`] rows of the same shuffle, then fit on the kept rows.
fn fit_gp(kind: KernelKind, z: &[[f64; 4]], y: &[f64], seed: u64) -> Result<(GpRegressor, usize), LearnError> {
    let mut rng = SplitMix64::new(seed);
    let perm = subsample(z.len(), z.len(), &mut rng);
    let mut keep: Vec<usize> = perm.iter().copied().take(gp::GP_MAX_TRAIN).collect();
    let mut search: Vec<usize> = perm.iter().copied().take(gp::GP_SEARCH_MAX).collect();
    keep.sort_unstable();
    search.sort_unstable();

    let sx: Vec<[f64; 4]> = search.iter().map(|&i| z[i]).collect();
    let sy: Vec<f64> = search.iter().map(|&i| y[i]).collect();
    let mean = sy.iter().sum::<f64>() / sy.len() as f64;
    let sy: Vec<f64> = sy.iter().map(|v| v - mean).collect();
    let var = sy.iter().map(|v| v * v).sum::<f64>() / sy.len() as f64;
    let var = if var > 0.0 { var } else { 1.0 };
    let grid = gp::hyperparameter_grid(kind, var);
    let (kernel, _) = gp::select_kernel(&sx, &sy, &grid)
        .ok_or_else(|| LearnError::NotPositiveDefinite("no grid point factorised".into()))?;

    let kx: Vec<[f64; 4]> = keep.iter().map(|&i| z[i]).collect();
    let ky: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
    let gp = GpRegressor::fit(kx, &ky, kernel).map_err(|e| LearnError::NotPositiveDefinite(e.to_string()))?;
    Ok((gp, keep.len()))
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.spec.task
    }

    fn expect_task(&self, expected: Task) -> Result<(), LearnError> {
        if self.spec.task != expected {
            return Err(LearnError::TaskMismatch { expected, actual: self.spec.task });
        }
        Ok(())
    }

    pub fn predict_force(&self, x: &SpectralFeatures) -> Result<f64, LearnError> {
        self.expect_task(Task::ForceRegression)?;
        let z = self.standardization.apply_features(x);
        Ok(match &self.parameters {
            Parameters::Constant { value } => *value,
            Parameters::Linear(m) => m.predict(&z),
            Parameters::Tree(t) => t.predict_value(&z),
            Parameters::Bagged(b) => b.predict_value(&z),
            Parameters::Gp(g) => g.predict_mean(&z),
            _ => return Err(LearnError::MalformedModelFile("regression model holds classifier state".into())),
        })
    }

    /// Posterior variance (N^2) of the latent force; GP models only.
    pub fn predict_force_var(&self, x: &SpectralFeatures) -> Result<f64, LearnError> {
        self.expect_task(Task::ForceRegression)?;
        match &self.parameters {
            Parameters::Gp(g) => Ok(g.predict_var(&self.standardization.apply_features(x))),
            _ => Err(LearnError::Unsupported(format!("{} has no predictive variance", self.spec.kind))),
        }
    }

    pub fn predict_location(&self, x: &SpectralFeatures) -> Result<LocationPrediction, LearnError> {
        self.expect_task(Task::LocationClassification)?;
        let z = self.standardization.apply_features(x);
        let scores = match &self.parameters {
            Parameters::Tree(t) => t.class_scores(&z),
            Parameters::Bagged(b) => b.class_scores(&z),
            Parameters::Knn(k) => k.scores(&z),
            Parameters::NaiveBayes(nb) => nb.scores(&z),
            Parameters::Discriminant(d) => d.scores(&z),
            _ => return Err(LearnError::MalformedModelFile("classifier holds regression state".into())),
        };
        Ok(LocationPrediction { label: tree::argmax3(&scores), scores })
    }

    /// Linear model coefficients in raw feature units: `(intercept, weights)`.
    pub fn linear_coefficients(&self) -> Option<(f64, [f64; 4])> {
        let Parameters::Linear(m) = &self.parameters else {
            return None;
        };
        let s = &self.standardization;
        let w: [f64; 4] = std::array::from_fn(|j| m.weights[j] / s.scales[j]);
        let b = m.intercept - w.iter().zip(&s.means).map(|(w, m)| w * m).sum::<f64>();
        Some((b, w))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFileRef {
            format_version: MODEL_FORMAT_VERSION,
            task: self.spec.task,
            kind: self.spec.kind.to_string(),
            hyperparameters: self.spec.kind.hyperparameters(),
            standardization: &self.standardization,
            parameters: &self.parameters,
            training_meta: &self.training_meta,
        };
        serde_json::to_string_pretty(&file).expect("model serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let malformed = |m: String| LearnError::MalformedModelFile(m);
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let version = value
            .get("format_version")
            .ok_or_else(|| malformed("missing format_version".into()))?;
        if version.as_u64() != Some(MODEL_FORMAT_VERSION) {
            return Err(LearnError::VersionMismatch { found: version.to_string() });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let kind: ModelKind = file.kind.parse().map_err(|e: LearnError| malformed(e.to_string()))?;
        let spec = ModelSpec::new(file.task, kind).map_err(|e| malformed(e.to_string()))?;
        if file.hyperparameters != kind.hyperparameters() {
            return Err(malformed(format!("hyperparameters do not match kind {kind}")));
        }
        let consistent = matches!(
            (&kind, &file.parameters),
            (_, Parameters::Constant { .. })
                | (ModelKind::LinearOls, Parameters::Linear(_))
                | (ModelKind::Tree(_), Parameters::Tree(_))
                | (ModelKind::BaggedTrees, Parameters::Bagged(_))
                | (ModelKind::Gp(_), Parameters::Gp(_))
                | (ModelKind::Knn { .. }, Parameters::Knn(_))
                | (ModelKind::GaussianNaiveBayes, Parameters::NaiveBayes(_))
                | (ModelKind::LinearDiscriminant, Parameters::Discriminant(_))
        );
        if !consistent {
            return Err(malformed(format!("parameters do not belong to kind {kind}")));
        }
        if file.standardization.scales.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(malformed("standardization scales must be positive".into()));
        }
        Ok(TrainedModel {
            spec,
            standardization: file.standardization,
            parameters: file.parameters,
            training_meta: file.training_meta,
        })
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format_version: u64,
    task: Task,
    kind: String,
    hyperparameters: serde_json::Value,
    standardization: &'a Standardization,
    parameters: &'a Parameters,
    training_meta: &'a TrainingMeta,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[allow(dead_code)]
    format_version: u64,
    task: Task,
    kind: String,
    hyperparameters: serde_json::Value,
    standardization: Standardization,
    parameters: Parameters,
    training_meta: TrainingMeta,
}

pub fn save_model(m: &TrainedModel, path: &Path) -> Result<(), LearnError> {
    crate::io::write_atomic(path, m.to_json().as_bytes())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, LearnError> {
    TrainedModel::from_json(&std::fs::read_to_string(path)?)
}
