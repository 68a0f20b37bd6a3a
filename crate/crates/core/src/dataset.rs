//! Labeled numeric data: CSV ingestion, duplicate removal and stratified
//! resampling.
//!
//! Class labels are re-encoded to contiguous codes `0..G` in order of first
//! appearance; the original label strings are kept for reporting. Row and
//! class indices are zero-based throughout the crate.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Feature matrix (rows are observations) with class codes and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    classes: Vec<String>,
    feature_names: Vec<String>,
    group_counts: Vec<usize>,
}

impl LabeledDataset {
    /// Builds a dataset from class codes in `0..classes.len()`.
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_feature_names(features, labels, classes, names)
    }

    pub fn with_feature_names(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        classes: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != features.nrows() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        let mut group_counts = vec![0usize; classes.len()];
        for &y in &labels {
            match group_counts.get_mut(y) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::InvalidDataset(format!(
                        "label code {y} outside 0..{}",
                        classes.len()
                    )))
                }
            }
        }
        if let Some(g) = group_counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidDataset(format!(
                "class `{}` has no observations",
                classes[g]
            )));
        }
        for (i, row) in features.row_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: feature_names[j].clone(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            classes,
            feature_names,
            group_counts,
        })
    }

    /// Builds a dataset from arbitrary labels, encoding them by first appearance.
    pub fn from_labels<S: AsRef<str>>(features: DMatrix<f64>, raw: &[S]) -> Result<Self> {
        let (labels, classes) = encode_labels(raw);
        Self::new(features, labels, classes)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Original label strings, indexed by class code.
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn group_counts(&self) -> &[usize] {
        &self.group_counts
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    /// Row indices of class `g`, ascending.
    pub fn class_indices(&self, g: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == g).collect()
    }

    /// Rows `indices` (in the given order) as a new dataset with the same class map.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let rows: Vec<RowDVector<f64>> = indices
            .iter()
            .map(|&i| self.features.row(i).into_owned())
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let features = DMatrix::from_rows(&rows);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::with_feature_names(
            features,
            labels,
            self.classes.clone(),
            self.feature_names.clone(),
        )
    }

    /// SHA-256 over shape, feature bits and labels, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.p() as u64).to_le_bytes());
        for row in self.features.row_iter() {
            for v in row.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for &y in &self.labels {
            h.update((y as u64).to_le_bytes());
        }
        for c in &self.classes {
            h.update(c.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

/// Encodes labels to codes by first appearance. Returns (codes, names).
pub fn encode_labels<S: AsRef<str>>(raw: &[S]) -> (Vec<usize>, Vec<String>) {
    let mut lookup: HashMap<&str, usize> = HashMap::new();
    let mut classes = Vec::new();
    let codes = raw
        .iter()
        .map(|s| {
            let s = s.as_ref();
            *lookup.entry(s).or_insert_with(|| {
                classes.push(s.to_string());
                classes.len() - 1
            })
        })
        .collect();
    (codes, classes)
}

/// Reads a comma separated file with a header row. Every column except
/// `label_column` must be numeric.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| j != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&j| header[j].to_string()).collect();

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (&j, name) in feature_cols.iter().zip(&feature_names) {
            let cell = record.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: name.clone(),
                });
            }
            values.push(v);
        }
        raw_labels.push(record.get(label_idx).unwrap_or("").to_string());
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let features = DMatrix::from_row_slice(raw_labels.len(), feature_cols.len(), &values);
    let (labels, classes) = encode_labels(&raw_labels);
    LabeledDataset::with_feature_names(features, labels, classes, feature_names)
}

/// Collapses exact duplicate rows with equal labels, keeping the first
/// occurrence. Returns the cleaned dataset and the removed row indices.
///
/// Linear dependence is not removed here; cores handle it themselves.
pub fn preprocess(ds: &LabeledDataset) -> Result<(LabeledDataset, Vec<usize>)> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut keep = Vec::with_capacity(ds.n());
    let mut removed = Vec::new();
    for i in 0..ds.n() {
        // -0.0 and 0.0 compare equal, so they must hash equal
        let key: Vec<u64> = ds
            .features
            .row(i)
            .iter()
            .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
            .collect();
        match seen.get(&key) {
            Some(&first) if ds.labels[first] != ds.labels[i] => {
                return Err(Error::LabelConflict { first, second: i })
            }
            Some(_) => removed.push(i),
            None => {
                seen.insert(key, i);
                keep.push(i);
            }
        }
    }
    if removed.is_empty() {
        return Ok((ds.clone(), removed));
    }
    Ok((ds.subset(&keep)?, removed))
}

/// How many observations of each class go to the training side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSplit {
    /// Fraction in (0, 1) of every class, rounded half down.
    Fraction(f64),
    /// Explicit per-class counts, indexed by class code.
    Counts(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub split: TrainSplit,
    pub repetitions: usize,
    pub seed: u64,
}

impl ResamplePlan {
    pub fn fraction(fraction: f64, repetitions: usize, seed: u64) -> Self {
        Self {
            split: TrainSplit::Fraction(fraction),
            repetitions,
            seed,
        }
    }

    pub fn counts(counts: Vec<usize>, repetitions: usize, seed: u64) -> Self {
        Self {
            split: TrainSplit::Counts(counts),
            repetitions,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidPlan("repetitions must be at least 1".into()));
        }
        if let TrainSplit::Fraction(f) = self.split {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidPlan(format!("fraction {f} not in (0, 1)")));
            }
        }
        Ok(())
    }

    /// Per-class training counts for `ds`; identical for every repetition.
    pub fn train_counts(&self, ds: &LabeledDataset) -> Result<Vec<usize>> {
        self.validate()?;
        let counts = match &self.split {
            TrainSplit::Fraction(f) => ds
                .group_counts()
                .iter()
                .map(|&n| round_half_down(f * n as f64))
                .collect(),
            TrainSplit::Counts(c) => {
                if c.len() != ds.n_classes() {
                    return Err(Error::InvalidPlan(format!(
                        "{} explicit counts for {} classes",
                        c.len(),
                        ds.n_classes()
                    )));
                }
                c.clone()
            }
        };
        for (g, (&c, &n)) in counts.iter().zip(ds.group_counts()).enumerate() {
            if c > n {
                return Err(Error::InvalidPlan(format!(
                    "class `{}` has {n} observations, {c} requested",
                    ds.classes()[g]
                )));
            }
            if c == 0 || c == n {
                return Err(Error::EmptySplit {
                    class: ds.classes()[g].clone(),
                    train: c,
                    total: n,
                });
            }
        }
        Ok(counts)
    }
}

/// Rounds to the nearest integer, sending exact halves down (26.5 -> 26).
pub fn round_half_down(x: f64) -> usize {
    // absorb representation error such as 0.8 * 50 = 40.000000000000007
    (x - 0.5 - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone)]
pub struct Split {
    pub repetition: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Draws repetition `rep` (1-based) of `plan`. The result depends only on
/// `(ds, plan.seed, rep)`.
pub fn stratified_resample(ds: &LabeledDataset, plan: &ResamplePlan, rep: usize) -> Result<Split> {
    if rep == 0 || rep > plan.repetitions {
        return Err(Error::InvalidPlan(format!(
            "repetition {rep} outside 1..={}",
            plan.repetitions
        )));
    }
    let counts = plan.train_counts(ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(rep as u64);

    let mut in_train = vec![false; ds.n()];
    for (g, &count) in counts.iter().enumerate() {
        let mut idx = ds.class_indices(g);
        idx.shuffle(&mut rng);
        for &i in &idx[..count] {
            in_train[i] = true;
        }
    }
    let train_indices: Vec<usize> = (0..ds.n()).filter(|&i| in_train[i]).collect();
    let test_indices: Vec<usize> = (0..ds.n()).filter(|&i| !in_train[i]).collect();
    Ok(Split {
        repetition: rep,
        train: ds.subset(&train_indices)?,
        test: ds.subset(&test_indices)?,
        train_indices,
        test_indices,
    })
}

/// Writes `repetition,row_index,role` lines for the given splits.
pub fn write_split_manifest<W: Write>(out: W, splits: &[Split]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["repetition", "row_index", "role"])?;
    for s in splits {
        let mut rows: Vec<(usize, &str)> = s
            .train_indices
            .iter()
            .map(|&i| (i, "train"))
            .chain(s.test_indices.iter().map(|&i| (i, "test")))
            .collect();
        rows.sort_unstable();
        for (i, role) in rows {
            w.write_record([s.repetition.to_string(), i.to_string(), role.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<split manifest>", e))?;
    Ok(())
}
