//! Cross-validated model comparison, tolerance bands, per-location accuracy
//! and signed-error statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{kfold, CalibrationDataset, DatasetError, FoldAssignment};
use crate::learn::{train, KernelKind, LearnError, ModelKind, ModelSpec, Task, TreePreset, KNN_PRESETS};
use crate::simskin::Location;

/// Force tolerances (N) reported by [`tolerance_bands`].
pub const TOLERANCES_N: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("LengthMismatch: {truth} truths vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("EmptyInput: no values to score")]
    EmptyInput,
    #[error("MixedTasks: specs span more than one task")]
    MixedTasks,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

fn check_lengths(truth: usize, pred: usize) -> Result<(), MetricsError> {
    if truth != pred {
        return Err(MetricsError::LengthMismatch { truth, pred });
    }
    if truth == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceReport {
    pub n: usize,
    /// `(tolerance_n, percent within)` in ascending tolerance order.
    pub pct_within: Vec<(f64, f64)>,
    pub rmse_n: f64,
}

impl ToleranceReport {
    pub fn pct_at(&self, tolerance_n: f64) -> Option<f64> {
        self.pct_within.iter().find(|(t, _)| *t == tolerance_n).map(|(_, p)| *p)
    }
}

/// Share of predictions with `|pred - truth| <= t` for each tolerance.
pub fn tolerance_bands(truth: &[f64], pred: &[f64]) -> Result<ToleranceReport, MetricsError> {
    tolerance_bands_at(truth, pred, &TOLERANCES_N)
}

pub fn tolerance_bands_at(truth: &[f64], pred: &[f64], tolerances: &[f64]) -> Result<ToleranceReport, MetricsError> {
    check_lengths(truth.len(), pred.len())?;
    let n = truth.len();
    let errors: Vec<f64> = truth.iter().zip(pred).map(|(t, p)| (p - t).abs()).collect();
    let pct_within = tolerances
        .iter()
        .map(|&tol| {
            let hits = errors.iter().filter(|&&e| e <= tol).count();
            (tol, 100.0 * hits as f64 / n as f64)
        })
        .collect();
    let rmse_n = (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    Ok(ToleranceReport { n, pct_within, rmse_n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCounts {
    pub trials: usize,
    pub true_predictions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationReport {
    pub per_label: BTreeMap<Location, LabelCounts>,
    pub overall_accuracy_pct: f64,
}

impl LocationReport {
    /// Overall accuracy truncated (not rounded) to two decimals, the way the
    /// calibration tables print it.
    pub fn overall_display(&self) -> String {
        format!("{:.2}", truncate2(self.overall_accuracy_pct))
    }
}

pub fn truncate2(x: f64) -> f64 {
    // Nudge by a few ulps so exact two-decimal values are not pushed down.
    ((x * 100.0) * (1.0 + 4.0 * f64::EPSILON)).floor() / 100.0
}

pub fn location_accuracy(truth: &[Location], pred: &[Location]) -> Result<LocationReport, MetricsError> {
    check_lengths(truth.len(), pred.len())?;
    let mut per_label: BTreeMap<Location, LabelCounts> = BTreeMap::new();
    for (t, p) in truth.iter().zip(pred) {
        let c = per_label.entry(*t).or_default();
        c.trials += 1;
        if t == p {
            c.true_predictions += 1;
        }
    }
    let correct: usize = per_label.values().map(|c| c.true_predictions).sum();
    Ok(LocationReport { per_label, overall_accuracy_pct: 100.0 * correct as f64 / truth.len() as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean_signed_error_n: f64,
    /// Population standard deviation of the signed error.
    pub std_error_n: f64,
    pub max_abs_error_n: f64,
}

pub fn error_stats(truth: &[f64], pred: &[f64]) -> Result<ErrorStats, MetricsError> {
    check_lengths(truth.len(), pred.len())?;
    let errors: Vec<f64> = truth.iter().zip(pred).map(|(t, p)| p - t).collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let max_abs = errors.iter().map(|e| e.abs()).fold(0.0, f64::max);
    Ok(ErrorStats { mean_signed_error_n: mean, std_error_n: var.sqrt(), max_abs_error_n: max_abs })
}

/// Error statistics grouped by the distinct true force values.
pub fn error_stats_by_level(truth: &[f64], pred: &[f64]) -> Result<Vec<(f64, usize, ErrorStats)>, MetricsError> {
    check_lengths(truth.len(), pred.len())?;
    let mut groups: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (t, p) in truth.iter().zip(pred) {
        // Non-negative floats order like their bit patterns.
        let g = groups.entry(t.to_bits()).or_default();
        g.0.push(*t);
        g.1.push(*p);
    }
    groups
        .into_values()
        .map(|(t, p)| Ok((t[0], t.len(), error_stats(&t, &p)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub spec: ModelSpec,
    /// Mean of fold RMSE (N) for regression, of fold accuracy (%) for classification.
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub task: Task,
    pub rows: Vec<CvRow>,
    pub selected: usize,
    pub k: usize,
    pub seed: u64,
}

impl CvReport {
    pub fn winner(&self) -> &CvRow {
        &self.rows[self.selected]
    }

    /// `spec,mean_score,fold_1..fold_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("spec,mean_score");
        for i in 1..=self.k {
            out.push_str(&format!(",fold_{i}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.spec, row.mean_score));
            for s in &row.fold_scores {
                out.push_str(&format!(",{s}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let unit = match self.task {
            Task::ForceRegression => "RMSE (N)",
            Task::LocationClassification => "accuracy (%)",
        };
        let mut out = format!("{}-fold CV, {}, seed {}\n", self.k, unit, self.seed);
        for (i, row) in self.rows.iter().enumerate() {
            let mark = if i == self.selected { " *" } else { "" };
            out.push_str(&format!("  {:<28} {:>9.4}{}\n", row.spec.to_string(), row.mean_score, mark));
        }
        out
    }
}

fn winner_index(task: Task, rows: &[CvRow]) -> usize {
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        let better = match task {
            Task::ForceRegression => row.mean_score < rows[best].mean_score,
            Task::LocationClassification => row.mean_score > rows[best].mean_score,
        };
        if better {
            best = i;
        }
    }
    best
}

fn fold_score(spec: &ModelSpec, ds: &CalibrationDataset, folds: &FoldAssignment, fold: usize, seed: u64) -> Result<f64, MetricsError> {
    let (train_idx, test_idx) = folds.train_test(fold);
    let model = train(spec, &ds.subset(&train_idx), seed)?;
    let test = ds.subset(&test_idx);
    match spec.task {
        Task::ForceRegression => {
            let pred = test.records.iter().map(|r| model.predict_force(&r.features)).collect::<Result<Vec<_>, _>>()?;
            Ok(tolerance_bands_at(&test.forces(), &pred, &[])?.rmse_n)
        }
        Task::LocationClassification => {
            let pred = test
                .records
                .iter()
                .map(|r| model.predict_location(&r.features).map(|p| p.label))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(location_accuracy(&test.locations(), &pred)?.overall_accuracy_pct)
        }
    }
}

/// k-fold comparison with a fresh stratified fold assignment.
pub fn cv_compare(specs: &[ModelSpec], ds: &CalibrationDataset, k: usize, seed: u64) -> Result<CvReport, MetricsError> {
    let folds = kfold(ds, k, seed)?;
    cv_compare_with_folds(specs, ds, &folds, seed)
}

/// k-fold comparison on a given assignment. Every (spec, fold) pair is
/// trained independently and may run in parallel; the report is assembled
/// in registry and fold order.
pub fn cv_compare_with_folds(
    specs: &[ModelSpec],
    ds: &CalibrationDataset,
    folds: &FoldAssignment,
    seed: u64,
) -> Result<CvReport, MetricsError> {
    let task = specs.first().ok_or(MetricsError::EmptyInput)?.task;
    if specs.iter().any(|s| s.task != task) {
        return Err(MetricsError::MixedTasks);
    }
    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|s| (0..folds.k).map(move |f| (s, f))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, f)| fold_score(&specs[s], ds, folds, f, seed))
        .collect::<Result<_, _>>()?;
    let rows: Vec<CvRow> = specs
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let fold_scores = scores[s * folds.k..(s + 1) * folds.k].to_vec();
            let mean_score = fold_scores.iter().sum::<f64>() / folds.k as f64;
            CvRow { spec: *spec, mean_score, fold_scores }
        })
        .collect();
    let selected = winner_index(task, &rows);
    Ok(CvReport { task, rows, selected, k: folds.k, seed })
}

/// One row of the comparison table layout; `kind` is `None` for model
/// families that are not implemented here.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutRow {
    pub family: &'static str,
    pub model: &'static str,
    pub kind: Option<ModelKind>,
}

const fn row(family: &'static str, model: &'static str, kind: Option<ModelKind>) -> LayoutRow {
    LayoutRow { family, model, kind }
}

/// Row layout of the regression / classifier comparison tables.
pub fn comparison_layout(task: Task) -> Vec<LayoutRow> {
    use ModelKind as K;
    match task {
        Task::ForceRegression => vec![
            row("Linear Regression", "Linear", Some(K::LinearOls)),
            row("Linear Regression", "Interactions Linear", None),
            row("Linear Regression", "Robust", None),
            row("Linear Regression", "Stepwise Linear", None),
            row("Regression Trees", "Fine Tree", Some(K::Tree(TreePreset::Fine))),
            row("Regression Trees", "Medium Tree", Some(K::Tree(TreePreset::Medium))),
            row("Regression Trees", "Coarse Tree", Some(K::Tree(TreePreset::Coarse))),
            row("Support Vector Machines", "Linear", None),
            row("Support Vector Machines", "Quadratic", None),
            row("Support Vector Machines", "Cubic", None),
            row("Support Vector Machines", "Fine Gaussian", None),
            row("Support Vector Machines", "Medium Gaussian", None),
            row("Support Vector Machines", "Coarse Gaussian", None),
            row("Gaussian Process", "Rational Quadratic", Some(K::Gp(KernelKind::RationalQuadratic))),
            row("Gaussian Process", "Squared Exponential", Some(K::Gp(KernelKind::SquaredExponential))),
            row("Gaussian Process", "Matern 5/2", Some(K::Gp(KernelKind::Matern52))),
            row("Gaussian Process", "Exponential", Some(K::Gp(KernelKind::Exponential))),
            row("Ensemble of Trees", "Boosted Trees", None),
            row("Ensemble of Trees", "Bagged Trees", Some(K::BaggedTrees)),
            row("Neural Networks", "Narrow Neural Network", None),
            row("Neural Networks", "Medium Neural Network", None),
            row("Neural Networks", "Wide Neural Network", None),
            row("Neural Networks", "Bilayered Neural Network", None),
            row("Neural Networks", "Trilayered Neural Network", None),
        ],
        Task::LocationClassification => {
            let knn = |i: usize| {
                let p = KNN_PRESETS[i];
                Some(K::Knn { k: p.1, weighting: p.2, metric: p.3 })
            };
            vec![
                row("Tree", "Fine Tree", Some(K::Tree(TreePreset::Fine))),
                row("Tree", "Medium Tree", Some(K::Tree(TreePreset::Medium))),
                row("Tree", "Coarse Tree", Some(K::Tree(TreePreset::Coarse))),
                row("Discriminant Analysis", "Linear Discriminant", Some(K::LinearDiscriminant)),
                row("Discriminant Analysis", "Quadratic Discriminant", None),
                row("Naive Bayes Classifiers", "Gaussian Naive Bayes", Some(K::GaussianNaiveBayes)),
                row("Naive Bayes Classifiers", "Kernel Naive Bayes", None),
                row("Support Vector Machines", "Linear", None),
                row("Support Vector Machines", "Quadratic", None),
                row("Support Vector Machines", "Cubic", None),
                row("Support Vector Machines", "Fine Gaussian", None),
                row("Support Vector Machines", "Medium Gaussian", None),
                row("Support Vector Machines", "Coarse Gaussian", None),
                row("Nearest Neighbor Classifier", "Fine KNN", knn(0)),
                row("Nearest Neighbor Classifier", "Medium KNN", knn(1)),
                row("Nearest Neighbor Classifier", "Coarse KNN", knn(2)),
                row("Nearest Neighbor Classifier", "Cosine KNN", knn(3)),
                row("Nearest Neighbor Classifier", "Cubic KNN", knn(4)),
                row("Nearest Neighbor Classifier", "Weighted KNN", knn(5)),
                row("Ensemble Classifiers", "Boosted Trees", None),
                row("Ensemble Classifiers", "Bagged Trees", Some(K::BaggedTrees)),
                row("Ensemble Classifiers", "Subspace Discriminant", None),
                row("Ensemble Classifiers", "Subspace KNN", None),
                row("Ensemble Classifiers", "RUSBoosted Trees", None),
                row("Neural Network Classifiers", "Narrow Neural Network", None),
                row("Neural Network Classifiers", "Medium Neural Network", None),
                row("Neural Network Classifiers", "Wide Neural Network", None),
                row("Neural Network Classifiers", "Bilayered Neural Network", None),
                row("Neural Network Classifiers", "Trilayered Neural Network", None),
            ]
        }
    }
}

pub const NOT_IMPLEMENTED: &str = "not implemented";

/// Comparison table with one score column per skin: `family,model,spec,<skin ids>`.
/// The selected model of each column carries a trailing `*`; rows whose model
/// is not in a report show `not implemented` (or `-` when implemented but
/// not evaluated).
pub fn comparison_table(task: Task, columns: &[(String, CvReport)]) -> String {
    let mut out = String::from("family,model,spec");
    for (skin, _) in columns {
        out.push(',');
        out.push_str(skin);
    }
    out.push('\n');
    for r in comparison_layout(task) {
        let spec = r.kind.map(|k| k.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}", r.family, r.model, spec));
        for (_, report) in columns {
            out.push(',');
            match r.kind {
                None => out.push_str(NOT_IMPLEMENTED),
                Some(kind) => match report.rows.iter().position(|row| row.spec.kind == kind) {
                    Some(i) => {
                        out.push_str(&format!("{:.3}", report.rows[i].mean_score));
                        if i == report.selected {
                            out.push('*');
                        }
                    }
                    None => out.push('-'),
                },
            }
        }
        out.push('\n');
    }
    out
}
