//! Calibration corpus, CSV persistence and deterministic stratified partitioning.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::dsp::SpectralFeatures;
use crate::rng::SplitMix64;
use crate::simskin::Location;

pub const CSV_HEADER: [&str; 9] = ["skin_id", "location", "x_mm", "y_mm", "force_n", "a300", "a500", "a700", "a900"];

/// Upper sanity bound on recorded forces.
pub const MAX_RECORD_FORCE_N: f64 = 40.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("MalformedCsv: line {line}: {msg}")]
    MalformedCsv { line: u64, msg: String },
    #[error("MixedSkinIds: line {line} has skin_id '{found}', expected '{expected}'")]
    MixedSkinIds { line: u64, expected: String, found: String },
    #[error("TooFewRecords: {found} records, need at least {needed}")]
    TooFewRecords { found: usize, needed: usize },
    #[error("KTooLarge: k = {k} is invalid for {n} records (need 2 <= k <= n)")]
    KTooLarge { k: usize, n: usize },
    #[error("EmptyInput: dataset has no records")]
    EmptyInput,
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub skin_id: String,
    pub location: Location,
    pub x_mm: f64,
    pub y_mm: f64,
    pub force_n: f64,
    pub features: SpectralFeatures,
}

/// Where a dataset came from: a file path or a generator and its parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub source: String,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDataset {
    pub records: Vec<CalibrationRecord>,
    pub provenance: Provenance,
}

impl CalibrationDataset {
    pub fn new(records: Vec<CalibrationRecord>, provenance: Provenance) -> Result<Self, DatasetError> {
        if let Some(first) = records.first() {
            if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.skin_id != first.skin_id) {
                return Err(DatasetError::MixedSkinIds {
                    line: i as u64 + 2,
                    expected: first.skin_id.clone(),
                    found: r.skin_id.clone(),
                });
            }
        }
        Ok(Self { records, provenance })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn skin_id(&self) -> Option<&str> {
        self.records.first().map(|r| r.skin_id.as_str())
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Record indices grouped by location, each group in dataset order.
    pub fn indices_by_location(&self) -> BTreeMap<Location, Vec<usize>> {
        let mut groups: BTreeMap<Location, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups.entry(r.location).or_default().push(i);
        }
        groups
    }

    pub fn features(&self) -> Vec<[f64; 4]> {
        self.records.iter().map(|r| r.features.to_array()).collect()
    }

    pub fn forces(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.force_n).collect()
    }

    pub fn locations(&self) -> Vec<Location> {
        self.records.iter().map(|r| r.location).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.records {
            let f = r.features;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.skin_id, r.location, r.x_mm, r.y_mm, r.force_n, f.a300, f.a500, f.a700, f.a900
            ));
        }
        out
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn content_hash(&self) -> String {
        crate::io::sha256_hex(self.to_csv_string().as_bytes())
    }
}

pub fn write_csv(ds: &CalibrationDataset, path: &Path) -> Result<(), DatasetError> {
    crate::io::write_atomic(path, ds.to_csv_string().as_bytes())?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<CalibrationDataset, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let mut ds = parse_csv(&text)?;
    ds.provenance.source = path.display().to_string();
    Ok(ds)
}

pub fn parse_csv(text: &str) -> Result<CalibrationDataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| DatasetError::MalformedCsv { line: 1, msg: e.to_string() })?
        .clone();
    let found: Vec<&str> = header.iter().collect();
    if found != CSV_HEADER {
        let missing: Vec<&str> = CSV_HEADER.iter().copied().filter(|c| !found.contains(c)).collect();
        let msg = if missing.is_empty() {
            format!("header must be exactly '{}', got '{}'", CSV_HEADER.join(","), found.join(","))
        } else {
            format!("missing column(s): {}", missing.join(", "))
        };
        return Err(DatasetError::MalformedCsv { line: 1, msg });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| DatasetError::MalformedCsv {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != CSV_HEADER.len() {
            return Err(DatasetError::MalformedCsv {
                line,
                msg: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let num = |col: usize| -> Result<f64, DatasetError> {
            let v: f64 = row[col].trim().parse().map_err(|_| DatasetError::MalformedCsv {
                line,
                msg: format!("column '{}': '{}' is not a number", CSV_HEADER[col], &row[col]),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::MalformedCsv {
                    line,
                    msg: format!("column '{}': value is not finite", CSV_HEADER[col]),
                });
            }
            Ok(v)
        };
        let location: Location = row[1].trim().parse().map_err(|_| DatasetError::MalformedCsv {
            line,
            msg: format!("column 'location': unknown label '{}'", &row[1]),
        })?;
        let force_n = num(4)?;
        if !(0.0..=MAX_RECORD_FORCE_N).contains(&force_n) {
            return Err(DatasetError::MalformedCsv {
                line,
                msg: format!("column 'force_n': {force_n} outside [0, {MAX_RECORD_FORCE_N}]"),
            });
        }
        let features = SpectralFeatures::new(num(5)?, num(6)?, num(7)?, num(8)?);
        if !features.is_valid() {
            return Err(DatasetError::MalformedCsv { line, msg: "negative amplitude".into() });
        }
        records.push(CalibrationRecord {
            skin_id: row[0].trim().to_string(),
            location,
            x_mm: num(2)?,
            y_mm: num(3)?,
            force_n,
            features,
        });
    }
    if let Some(first) = records.first() {
        if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.skin_id != first.skin_id) {
            return Err(DatasetError::MixedSkinIds {
                line: i as u64 + 2,
                expected: first.skin_id.clone(),
                found: r.skin_id.clone(),
            });
        }
    }
    Ok(CalibrationDataset { records, provenance: Provenance::default() })
}

pub const FEATURE_COLUMNS: [&str; 4] = ["a300", "a500", "a700", "a900"];

/// Feature rows as `frame,a300,a500,a700,a900`.
pub fn features_to_csv(rows: &[SpectralFeatures]) -> String {
    let mut out = String::from("frame,a300,a500,a700,a900\n");
    for (i, f) in rows.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{},{}\n", f.a300, f.a500, f.a700, f.a900));
    }
    out
}

/// Reads the four amplitude columns from any CSV that has them (a feature
/// table or a calibration file); other columns are ignored.
pub fn parse_feature_table(text: &str) -> Result<Vec<SpectralFeatures>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| DatasetError::MalformedCsv { line: 1, msg: e.to_string() })?
        .clone();
    let mut cols = [0usize; 4];
    for (slot, name) in cols.iter_mut().zip(FEATURE_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::MalformedCsv { line: 1, msg: format!("missing column(s): {name}") })?;
    }
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| DatasetError::MalformedCsv {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let mut a = [0.0; 4];
        for (j, &c) in cols.iter().enumerate() {
            a[j] = row[c].trim().parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(|| {
                DatasetError::MalformedCsv {
                    line,
                    msg: format!("column '{}': '{}' is not a non-negative number", FEATURE_COLUMNS[j], &row[c]),
                }
            })?;
        }
        rows.push(SpectralFeatures::from_array(a));
    }
    Ok(rows)
}

/// Index sets of a holdout split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified holdout: within each location (in label order) the indices are
/// shuffled with one shared generator and the first `floor(fraction * n_loc)`
/// go to the training side.
pub fn holdout_indices(
    ds: &CalibrationDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<HoldoutSplit, DatasetError> {
    if ds.len() < 10 {
        return Err(DatasetError::TooFewRecords { found: ds.len(), needed: 10 });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidArgument(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, mut idx) in ds.indices_by_location() {
        rng.shuffle(&mut idx);
        let n_train = (train_fraction * idx.len() as f64 + 1e-9).floor() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(HoldoutSplit { train, test })
}

pub fn split_holdout(
    ds: &CalibrationDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(CalibrationDataset, CalibrationDataset), DatasetError> {
    let split = holdout_indices(ds, train_fraction, seed)?;
    Ok((ds.subset(&split.train), ds.subset(&split.test)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldAssignment {
    /// `(train, test)` indices for one fold, ascending.
    pub fn train_test(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignment.len()).partition(|&i| self.assignment[i] == fold);
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment. Locations are visited in label order; each
/// location's indices are shuffled and dealt round-robin, with the fold
/// counter carried over between locations so fold sizes differ by at most one.
pub fn kfold(ds: &CalibrationDataset, k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    if k < 2 || k > ds.len() {
        return Err(DatasetError::KTooLarge { k, n: ds.len() });
    }
    let mut rng = SplitMix64::new(seed);
    let mut assignment = vec![0; ds.len()];
    let mut counter = 0;
    for (_, mut idx) in ds.indices_by_location() {
        rng.shuffle(&mut idx);
        for i in idx {
            assignment[i] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldAssignment { k, assignment })
}
