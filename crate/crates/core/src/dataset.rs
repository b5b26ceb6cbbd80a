//! Data model, CSV ingestion, the synthetic generator, stratified splitting
//! and per-feature standardization.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Names of the sixteen beat-to-beat variability statistics (mean, variance,
/// skewness and kurtosis of four loop descriptors). Used whenever a dataset
/// with sixteen features is created without explicit names.
pub const DEFAULT_FEATURE_NAMES: [&str; 16] = [
    "Mean(phi_AZ)",
    "Variance(phi_AZ)",
    "Skewness(phi_AZ)",
    "Kurtosis(phi_AZ)",
    "Mean(phi_EL)",
    "Variance(phi_EL)",
    "Skewness(phi_EL)",
    "Kurtosis(phi_EL)",
    "Mean(psi_PL)",
    "Variance(psi_PL)",
    "Skewness(psi_PL)",
    "Kurtosis(psi_PL)",
    "Mean(psi_PG)",
    "Variance(psi_PG)",
    "Skewness(psi_PG)",
    "Kurtosis(psi_PG)",
];

/// Default feature names for a dataset of width `d`.
pub fn default_feature_names(d: usize) -> Vec<String> {
    if d == DEFAULT_FEATURE_NAMES.len() {
        DEFAULT_FEATURE_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        (0..d).map(|j| format!("f{j}")).collect()
    }
}

/// Binary class tag. `Right` encodes as +1 and `Left` as -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    Right,
    Left,
}

impl Class {
    pub fn sign(self) -> f64 {
        match self {
            Class::Right => 1.0,
            Class::Left => -1.0,
        }
    }

    pub fn opposite(self) -> Class {
        match self {
            Class::Right => Class::Left,
            Class::Left => Class::Right,
        }
    }

    /// Parses a CSV label cell.
    ///
    /// `R`, `+1` and `1` map to [`Class::Right`]; `L`, `-1` and `0` map to
    /// [`Class::Left`]. Surrounding whitespace is ignored, letters are
    /// case-insensitive.
    pub fn parse(cell: &str) -> Option<Class> {
        match cell.trim() {
            "R" | "r" | "+1" | "1" => Some(Class::Right),
            "L" | "l" | "-1" | "0" => Some(Class::Left),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Right => "R",
            Class::Left => "L",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labeled feature matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<Class>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking that values are finite, both classes are
    /// present and feature names are distinct and non-empty.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<Class>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if labels.len() != n {
            return Err(Error::data(format!(
                "{} labels for {} feature rows",
                labels.len(),
                n
            )));
        }
        if d == 0 {
            return Err(Error::data("dataset has no feature columns"));
        }
        if feature_names.len() != d {
            return Err(Error::data(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                d
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if name.trim().is_empty() {
                return Err(Error::data("empty feature name"));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::data(format!("duplicate feature name `{name}`")));
            }
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite value at row {i}, column {j}"
            )));
        }
        for class in [Class::Right, Class::Left] {
            if !labels.contains(&class) {
                return Err(Error::data(format!("no samples of class {class}")));
            }
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self, class: Class) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    /// Rows `rows` restricted to columns `cols`, in the given orders.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), rows).select(Axis(1), cols)
    }

    pub fn labels_at(&self, rows: &[usize]) -> Vec<Class> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }

    /// Writes the dataset as CSV: header `label,<names...>`, labels as `R`/`L`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["label".to_string()];
        header.extend(self.feature_names.iter().cloned());
        out.write_record(&header).map_err(csv_write_error)?;
        for (row, label) in self.features.rows().into_iter().zip(&self.labels) {
            let mut record = vec![label.as_str().to_string()];
            record.extend(row.iter().map(|v| format!("{v:?}")));
            out.write_record(&record).map_err(csv_write_error)?;
        }
        out.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| match e {
                Error::Io { source, .. } => Error::io(path, source),
                other => other,
            })
    }
}

fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv writer>", io),
        other => Error::data(format!("csv write failed: {other:?}")),
    }
}

/// Parses a labeled dataset from CSV text.
///
/// The first header cell must be `label`; the remaining header cells are the
/// feature names. Row order is preserved.
pub fn parse_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(format!("unreadable header: {e}")))?
        .clone();
    match header.get(0).map(str::trim) {
        Some("label") => {}
        Some(other) => {
            return Err(Error::data(format!(
                "first column must be `label`, found `{other}`"
            )))
        }
        None => return Err(Error::data("missing header row")),
    }
    let names: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let d = names.len();
    if d == 0 {
        return Err(Error::data("no feature columns after `label`"));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        // 1-based line numbers, header is line 1
        let line = r + 2;
        let record = record.map_err(|e| Error::data(format!("line {line}: {e}")))?;
        let cell = record.get(0).unwrap_or("");
        let label = Class::parse(cell)
            .ok_or_else(|| Error::data(format!("line {line}: unknown label `{cell}`")))?;
        labels.push(label);
        for (c, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::data(format!(
                    "line {line}, column `{}`: `{cell}` is not a number",
                    names[c]
                ))
            })?;
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::data("no data rows"));
    }
    let features = Array2::from_shape_vec((labels.len(), d), values)
        .map_err(|e| Error::data(format!("ragged rows: {e}")))?;
    Dataset::new(features, labels, names)
}

/// Reads a labeled dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(std::io::BufReader::new(file))
}

/// Settings for the synthetic generator.
///
/// Planted feature `j` with effect size `delta` is drawn from
/// `N(c * delta / 2, 1)` for class sign `c`; every other feature is `N(0, 1)`
/// regardless of class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_right: usize,
    pub n_left: usize,
    pub n_features: usize,
    pub planted: Vec<(usize, f64)>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_right: 31,
            n_left: 25,
            n_features: 16,
            planted: default_planted(),
            seed: 0,
        }
    }
}

/// Four planted features on the psi_PL / psi_PG statistics, in the format
/// accepted by [`parse_planted`].
pub const DEFAULT_PLANTED: &str = "8:1.0,10:1.5,11:0.8,12:1.2";

pub fn default_planted() -> Vec<(usize, f64)> {
    parse_planted(DEFAULT_PLANTED).expect("valid default")
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_right == 0 || self.n_left == 0 {
            return Err(Error::data("each class needs at least one sample"));
        }
        if self.n_features == 0 {
            return Err(Error::data("feature count must be positive"));
        }
        let mut seen = HashSet::new();
        for &(j, delta) in &self.planted {
            if j >= self.n_features {
                return Err(Error::data(format!(
                    "planted feature {j} out of range for {} features",
                    self.n_features
                )));
            }
            if !seen.insert(j) {
                return Err(Error::data(format!("planted feature {j} listed twice")));
            }
            if !(delta.is_finite() && delta >= 0.0) {
                return Err(Error::data(format!(
                    "effect size for feature {j} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Parses a planted-feature list of the form `"10:1.2,14:1.0"`.
///
/// An empty (or all-whitespace) string yields no planted features.
pub fn parse_planted(text: &str) -> Result<Vec<(usize, f64)>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|item| {
            let (idx, delta) = item.split_once(':').ok_or_else(|| {
                Error::data(format!("planted entry `{item}` is not `index:delta`"))
            })?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::data(format!("bad feature index in `{item}`")))?;
            let delta: f64 = delta
                .trim()
                .parse()
                .map_err(|_| Error::data(format!("bad effect size in `{item}`")))?;
            if !(delta.is_finite() && delta >= 0.0) {
                return Err(Error::data(format!("effect size in `{item}` must be >= 0")));
            }
            Ok((idx, delta))
        })
        .collect()
}

/// Draws a synthetic dataset. Right-class rows come first, then Left.
pub fn synthesize_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, Purpose::Generator, 0);
    let d = cfg.n_features;
    let mut shift = vec![0.0; d];
    for &(j, delta) in &cfg.planted {
        shift[j] = delta / 2.0;
    }
    let n = cfg.n_right + cfg.n_left;
    let labels: Vec<Class> = std::iter::repeat_n(Class::Right, cfg.n_right)
        .chain(std::iter::repeat_n(Class::Left, cfg.n_left))
        .collect();
    let mut features = Array2::zeros((n, d));
    for (mut row, label) in features.rows_mut().into_iter().zip(&labels) {
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = z + label.sign() * shift[j];
        }
    }
    Dataset::new(features, labels, default_feature_names(d))
}

/// Held-out test indices and the remaining development indices, both sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub dev_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn indices_of(labels: &[Class], class: Class) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (c == class).then_some(i))
        .collect()
}

/// Number of test samples a class of size `n_class` contributes.
///
/// Floor per class; the small epsilon keeps products such as `0.29 * 100`
/// from rounding down one too far.
pub fn holdout_count(n_class: usize, test_fraction: f64) -> usize {
    (test_fraction * n_class as f64 + 1e-9).floor() as usize
}

/// Stratified holdout: `floor(test_fraction * n_c)` uniformly chosen samples
/// of each class go to the test set, the rest to the development set.
pub fn stratified_holdout<R: Rng + ?Sized>(
    labels: &[Class],
    test_fraction: f64,
    rng: &mut R,
) -> Result<HoldoutSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::data(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut dev = Vec::new();
    let mut test = Vec::new();
    for class in [Class::Right, Class::Left] {
        let mut idx = indices_of(labels, class);
        if idx.len() < 2 {
            return Err(Error::data(format!(
                "class {class} has {} samples, need at least 2 for a holdout split",
                idx.len()
            )));
        }
        let n_test = holdout_count(idx.len(), test_fraction);
        if n_test == 0 || n_test >= idx.len() {
            return Err(Error::data(format!(
                "test fraction {test_fraction} gives {n_test} of {} class-{class} samples for test",
                idx.len()
            )));
        }
        idx.shuffle(rng);
        test.extend_from_slice(&idx[..n_test]);
        dev.extend_from_slice(&idx[n_test..]);
    }
    dev.sort_unstable();
    test.sort_unstable();
    Ok(HoldoutSplit {
        dev_indices: dev,
        test_indices: test,
    })
}

/// K disjoint folds covering the development set; each fold sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub folds: Vec<Vec<usize>>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Development indices outside fold `k`, sorted.
    pub fn training_indices(&self, k: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }

    /// Checks the partition and the within-one size and class balance.
    pub fn validate(&self, labels: &[Class], dev_indices: &[usize]) -> Result<()> {
        let mut all: Vec<usize> = self.folds.iter().flatten().copied().collect();
        all.sort_unstable();
        let mut dev = dev_indices.to_vec();
        dev.sort_unstable();
        if all != dev {
            return Err(Error::data("folds do not partition the development set"));
        }
        let spread = |counts: Vec<usize>| {
            counts.iter().max().unwrap_or(&0) - counts.iter().min().unwrap_or(&0)
        };
        if spread(self.folds.iter().map(Vec::len).collect()) > 1 {
            return Err(Error::data("fold sizes differ by more than one"));
        }
        for class in [Class::Right, Class::Left] {
            let counts = self
                .folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            if spread(counts) > 1 {
                return Err(Error::data(format!(
                    "class {class} counts differ by more than one across folds"
                )));
            }
        }
        Ok(())
    }
}

/// Splits `total` into `k` near-equal parts, with the `total % k` larger
/// parts placed at the positions given by `extra`.
fn counts_with_extras(total: usize, k: usize, extra: &[usize]) -> Vec<usize> {
    let mut counts = vec![total / k; k];
    for &f in extra {
        counts[f] += 1;
    }
    counts
}

/// Stratified K-fold assignment of the development set.
///
/// Fold sizes are fixed first (largest remainder, extra samples on randomly
/// chosen folds). Right-class counts per fold are then allocated the same
/// way, with their extra samples placed inside the larger folds whenever
/// possible, so that Left-class counts (`fold size - right count`) also stay
/// within one of each other. Finally each class's samples are shuffled and
/// dealt out according to those counts.
pub fn stratified_kfold<R: Rng + ?Sized>(
    labels: &[Class],
    dev_indices: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::data(format!("need at least 2 folds, got {k}")));
    }
    let n = dev_indices.len();
    if k > n {
        return Err(Error::data(format!(
            "{k} folds requested for {n} development samples"
        )));
    }
    if let Some(&bad) = dev_indices.iter().find(|&&i| i >= labels.len()) {
        return Err(Error::data(format!("development index {bad} out of range")));
    }
    let mut right: Vec<usize> = dev_indices
        .iter()
        .copied()
        .filter(|&i| labels[i] == Class::Right)
        .collect();
    let mut left: Vec<usize> = dev_indices
        .iter()
        .copied()
        .filter(|&i| labels[i] == Class::Left)
        .collect();

    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let size_extra: Vec<usize> = order[..n % k].to_vec();
    let sizes = counts_with_extras(n, k, &size_extra);

    let r_extra_count = right.len() % k;
    let right_extra: Vec<usize> = if r_extra_count <= size_extra.len() {
        let mut pool = size_extra.clone();
        pool.shuffle(rng);
        pool.truncate(r_extra_count);
        pool
    } else {
        let mut rest = order[n % k..].to_vec();
        rest.shuffle(rng);
        rest.truncate(r_extra_count - size_extra.len());
        size_extra.iter().copied().chain(rest).collect()
    };
    let right_counts = counts_with_extras(right.len(), k, &right_extra);
    let left_counts: Vec<usize> = sizes
        .iter()
        .zip(&right_counts)
        .map(|(&s, &r)| {
            s.checked_sub(r)
                .ok_or_else(|| Error::data("impossible stratification"))
        })
        .collect::<Result<_>>()?;

    right.shuffle(rng);
    left.shuffle(rng);
    let mut folds = Vec::with_capacity(k);
    let (mut ri, mut li) = (0, 0);
    for f in 0..k {
        let mut fold = Vec::with_capacity(sizes[f]);
        fold.extend_from_slice(&right[ri..ri + right_counts[f]]);
        fold.extend_from_slice(&left[li..li + left_counts[f]]);
        ri += right_counts[f];
        li += left_counts[f];
        fold.sort_unstable();
        folds.push(fold);
    }
    let assignment = FoldAssignment { folds };
    assignment.validate(labels, dev_indices)?;
    Ok(assignment)
}

/// Standard deviations below this are treated as 1.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-feature z-scoring fitted on a reference subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub fitted_on: Vec<usize>,
}

impl Standardizer {
    /// Column means and population standard deviations over `reference` rows.
    pub fn fit(features: ArrayView2<'_, f64>, reference: &[usize]) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::data("cannot fit a standardizer on zero rows"));
        }
        let m = reference.len() as f64;
        let d = features.ncols();
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        for j in 0..d {
            let col = features.column(j);
            let mean = reference.iter().map(|&i| col[i]).sum::<f64>() / m;
            let var = reference
                .iter()
                .map(|&i| (col[i] - mean).powi(2))
                .sum::<f64>()
                / m;
            let sd = var.sqrt();
            means[j] = mean;
            stds[j] = if sd < STD_FLOOR { 1.0 } else { sd };
        }
        Ok(Standardizer {
            means,
            stds,
            fitted_on: reference.to_vec(),
        })
    }

    /// `(x - mean) / std` for the columns `cols` of `block`, where column `c`
    /// of `block` corresponds to feature `cols[c]`.
    pub fn apply_columns(&self, block: &Array2<f64>, cols: &[usize]) -> Array2<f64> {
        let mut out = block.clone();
        for (c, &j) in cols.iter().enumerate() {
            out.column_mut(c)
                .mapv_inplace(|v| (v - self.means[j]) / self.stds[j]);
        }
        out
    }

    /// Transforms every column of a full-width feature block.
    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        let cols: Vec<usize> = (0..self.means.len()).collect();
        self.apply_columns(&features.to_owned(), &cols)
    }
}
