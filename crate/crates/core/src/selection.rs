//! Exhaustive feature-subset search over K-fold validation losses and the
//! two selection recipes that read from the resulting table.

use std::cmp::Ordering;
use std::fmt;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Class, Dataset, FoldAssignment, HoldoutSplit, Standardizer};
use crate::error::{Error, Result};
use crate::svm::{self, SvmModel, TrainConfig};

/// Sorted, distinct feature indices.
///
/// Ordered by size first, then lexicographically, which is also the
/// tie-breaking order used by both recipes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::data("feature subset must not be empty"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::data("feature subset has a repeated index"));
        }
        Ok(FeatureSubset(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.0.binary_search(&feature).is_ok()
    }

    /// Feature names joined with `+`.
    pub fn label(&self, names: &[String]) -> String {
        self.0.iter().map(|&j| names[j].as_str()).join("+")
    }
}

impl Ord for FeatureSubset {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for FeatureSubset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(","))
    }
}

/// All subsets of `0..d` with sizes `1..=max_size`, in (size, lexicographic)
/// order.
pub fn enumerate_subsets(d: usize, max_size: usize) -> Result<Vec<FeatureSubset>> {
    if d == 0 {
        return Err(Error::data("need at least one feature"));
    }
    if max_size == 0 || max_size > d {
        return Err(Error::data(format!(
            "subset size limit {max_size} must lie in 1..={d}"
        )));
    }
    Ok((1..=max_size)
        .flat_map(|k| (0..d).combinations(k).map(FeatureSubset))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// Solver hit its iteration cap.
    NotConverged,
    /// Training partition held a single class; loss recorded as 1.
    Degenerate,
}

/// Validation losses for every (held-out fold, feature subset) pair.
///
/// Losses are stored as error counts so pooling and tie comparisons are
/// exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    errors: Vec<Vec<usize>>,
    val_counts: Vec<usize>,
    subsets: Vec<FeatureSubset>,
    status: Vec<Vec<CellStatus>>,
}

impl LossTable {
    /// Builds a table from raw loss values. Each entry must be an integer
    /// multiple of `1 / val_counts[k]` within `[0, 1]`.
    pub fn from_losses(
        losses: Vec<Vec<f64>>,
        val_counts: Vec<usize>,
        subsets: Vec<FeatureSubset>,
    ) -> Result<Self> {
        if losses.len() != val_counts.len() || losses.is_empty() {
            return Err(Error::data("one loss row and one count per fold required"));
        }
        let mut errors = Vec::with_capacity(losses.len());
        for (row, &m) in losses.iter().zip(&val_counts) {
            if row.len() != subsets.len() {
                return Err(Error::data("loss row length differs from subset count"));
            }
            if m == 0 {
                return Err(Error::data("validation fold of size zero"));
            }
            let counts = row
                .iter()
                .map(|&l| {
                    let e = l * m as f64;
                    let r = e.round();
                    if !(0.0..=1.0).contains(&l) || (e - r).abs() > 1e-9 {
                        Err(Error::data(format!("loss {l} is not a multiple of 1/{m}")))
                    } else {
                        Ok(r as usize)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            errors.push(counts);
        }
        let status = vec![vec![CellStatus::Ok; subsets.len()]; val_counts.len()];
        Ok(LossTable {
            errors,
            val_counts,
            subsets,
            status,
        })
    }

    pub fn k(&self) -> usize {
        self.val_counts.len()
    }

    pub fn subsets(&self) -> &[FeatureSubset] {
        &self.subsets
    }

    pub fn val_counts(&self) -> &[usize] {
        &self.val_counts
    }

    pub fn errors(&self, fold: usize, subset: usize) -> usize {
        self.errors[fold][subset]
    }

    pub fn loss(&self, fold: usize, subset: usize) -> f64 {
        self.errors[fold][subset] as f64 / self.val_counts[fold] as f64
    }

    pub fn status(&self, fold: usize, subset: usize) -> CellStatus {
        self.status[fold][subset]
    }

    /// Number of cells with the given status.
    pub fn count_status(&self, which: CellStatus) -> usize {
        self.status
            .iter()
            .flatten()
            .filter(|&&s| s == which)
            .count()
    }

    /// Reorders columns so that new column `c` is old column `perm[c]`.
    pub fn permute_subsets(&self, perm: &[usize]) -> LossTable {
        LossTable {
            errors: self
                .errors
                .iter()
                .map(|row| perm.iter().map(|&p| row[p]).collect())
                .collect(),
            val_counts: self.val_counts.clone(),
            subsets: perm.iter().map(|&p| self.subsets[p].clone()).collect(),
            status: self
                .status
                .iter()
                .map(|row| perm.iter().map(|&p| row[p]).collect())
                .collect(),
        }
    }

    /// Total validation errors of subset `s` over all folds.
    pub fn pooled_errors(&self, subset: usize) -> usize {
        self.errors.iter().map(|row| row[subset]).sum()
    }

    pub fn total_validation(&self) -> usize {
        self.val_counts.iter().sum()
    }
}

/// A trained selection candidate: standardizer (if any), feature columns,
/// and the SVM over those standardized columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub subset: FeatureSubset,
    pub standardizer: Option<Standardizer>,
    pub svm: SvmModel,
}

impl Machine {
    fn design(&self, dataset: &Dataset, rows: &[usize]) -> ndarray::Array2<f64> {
        design_matrix(dataset, rows, &self.subset, self.standardizer.as_ref())
    }

    pub fn predict_rows(&self, dataset: &Dataset, rows: &[usize]) -> Result<Vec<Class>> {
        svm::predict(&self.svm, self.design(dataset, rows).view())
    }

    /// Number of misclassified samples among `rows`.
    pub fn errors_on(&self, dataset: &Dataset, rows: &[usize]) -> Result<usize> {
        let pred = self.predict_rows(dataset, rows)?;
        svm::count_errors(&pred, &dataset.labels_at(rows))
    }

    pub fn loss_on(&self, dataset: &Dataset, rows: &[usize]) -> Result<f64> {
        let pred = self.predict_rows(dataset, rows)?;
        svm::zero_one_loss(&pred, &dataset.labels_at(rows))
    }
}

fn design_matrix(
    dataset: &Dataset,
    rows: &[usize],
    subset: &FeatureSubset,
    standardizer: Option<&Standardizer>,
) -> ndarray::Array2<f64> {
    let block = dataset.submatrix(rows, subset.indices());
    match standardizer {
        Some(s) => s.apply_columns(&block, subset.indices()),
        None => block,
    }
}

/// Trains the machine for (held-out fold `fold`, `subset`): standardizer
/// fitted on the training partition, SVM on its standardized columns.
pub fn train_machine(
    dataset: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    subset: &FeatureSubset,
    train_cfg: &TrainConfig,
    standardize: bool,
) -> Result<Machine> {
    let rows = folds.training_indices(fold);
    let standardizer = if standardize {
        Some(Standardizer::fit(dataset.features(), &rows)?)
    } else {
        None
    };
    train_with(dataset, &rows, subset, standardizer, train_cfg)
}

fn train_with(
    dataset: &Dataset,
    rows: &[usize],
    subset: &FeatureSubset,
    standardizer: Option<Standardizer>,
    train_cfg: &TrainConfig,
) -> Result<Machine> {
    let x = design_matrix(dataset, rows, subset, standardizer.as_ref());
    let svm = svm::train_svm(x.view(), &dataset.labels_at(rows), train_cfg)?;
    Ok(Machine {
        subset: subset.clone(),
        standardizer,
        svm,
    })
}

fn check_inputs(
    dataset: &Dataset,
    split: &HoldoutSplit,
    folds: &FoldAssignment,
    subsets: &[FeatureSubset],
) -> Result<()> {
    folds.validate(dataset.labels(), &split.dev_indices)?;
    let d = dataset.n_features();
    if let Some(s) = subsets.iter().find(|s| s.indices().iter().any(|&j| j >= d)) {
        return Err(Error::data(format!(
            "subset {s} out of range for {d} features"
        )));
    }
    if subsets.is_empty() {
        return Err(Error::data("no feature subsets to evaluate"));
    }
    Ok(())
}

/// Trains one SVM per (fold, subset) cell on the development set minus the
/// fold and records its validation errors on that fold.
///
/// Cells are independent and evaluated in parallel; the table is assembled
/// by position. A single-class training partition yields a degenerate cell
/// scored as all errors.
pub fn build_loss_table(
    dataset: &Dataset,
    split: &HoldoutSplit,
    folds: &FoldAssignment,
    subsets: &[FeatureSubset],
    train_cfg: &TrainConfig,
    standardize: bool,
) -> Result<LossTable> {
    train_cfg.validate()?;
    check_inputs(dataset, split, folds, subsets)?;
    let k = folds.k();

    let rows: Vec<(usize, Vec<CellStatus>, Vec<usize>)> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train_rows = folds.training_indices(fold);
            let val_rows = &folds.folds[fold];
            let standardizer = if standardize {
                Some(Standardizer::fit(dataset.features(), &train_rows)?)
            } else {
                None
            };
            let cells: Vec<(CellStatus, usize)> = subsets
                .par_iter()
                .map(|subset| {
                    match train_with(
                        dataset,
                        &train_rows,
                        subset,
                        standardizer.clone(),
                        train_cfg,
                    ) {
                        Ok(machine) => {
                            let errs = machine.errors_on(dataset, val_rows)?;
                            let status = if machine.svm.converged {
                                CellStatus::Ok
                            } else {
                                CellStatus::NotConverged
                            };
                            Ok((status, errs))
                        }
                        Err(Error::Training(_)) => Ok((CellStatus::Degenerate, val_rows.len())),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            let (status, errors) = cells.into_iter().unzip();
            Ok((val_rows.len(), status, errors))
        })
        .collect::<Result<_>>()?;

    let mut val_counts = Vec::with_capacity(k);
    let mut status = Vec::with_capacity(k);
    let mut errors = Vec::with_capacity(k);
    for (m, st, er) in rows {
        if m == 0 {
            return Err(Error::data("empty validation fold"));
        }
        val_counts.push(m);
        status.push(st);
        errors.push(er);
    }
    Ok(LossTable {
        errors,
        val_counts,
        subsets: subsets.to_vec(),
        status,
    })
}

/// Pooled loss per subset: total validation errors over total validation
/// samples.
pub fn pool_losses(table: &LossTable) -> Vec<f64> {
    let total = table.total_validation() as f64;
    (0..table.subsets.len())
        .map(|s| table.pooled_errors(s) as f64 / total)
        .collect()
}

/// A (fold, subset column) choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub fold: usize,
    pub subset: usize,
}

/// Index of the best column among `cols` under `key`, ties broken by the
/// subset order (size, then lexicographic).
fn best_column<K: PartialOrd>(table: &LossTable, key: impl Fn(usize) -> K) -> usize {
    (0..table.subsets.len())
        .min_by(|&a, &b| {
            key(a)
                .partial_cmp(&key(b))
                .unwrap_or(Ordering::Equal)
                .then_with(|| table.subsets[a].cmp(&table.subsets[b]))
        })
        .expect("table has at least one subset")
}

/// Fold first: the fold whose best achievable loss is smallest (lowest index
/// on ties), then the best subset within that fold.
pub fn select_classic(table: &LossTable) -> Choice {
    let fold_best = |k: usize| {
        (0..table.subsets.len())
            .map(|s| table.loss(k, s))
            .fold(f64::INFINITY, f64::min)
    };
    let mut fold = 0;
    let mut best = fold_best(0);
    for k in 1..table.k() {
        let v = fold_best(k);
        if v < best {
            best = v;
            fold = k;
        }
    }
    let subset = best_column(table, |s| table.loss(fold, s));
    Choice { fold, subset }
}

/// Subset first: the subset with the smallest pooled loss (smaller, then
/// lexicographically earlier subsets win ties), then the fold with the
/// smallest validation loss for it (lowest index on ties).
pub fn select_pooled(table: &LossTable) -> Choice {
    let subset = best_column(table, |s| table.pooled_errors(s));
    let mut fold = 0;
    for k in 1..table.k() {
        if table.loss(k, subset) < table.loss(fold, subset) {
            fold = k;
        }
    }
    Choice { fold, subset }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Classic,
    Pooled,
}

impl Recipe {
    pub const BOTH: [Recipe; 2] = [Recipe::Classic, Recipe::Pooled];

    pub fn as_str(self) -> &'static str {
        match self {
            Recipe::Classic => "classic",
            Recipe::Pooled => "pooled",
        }
    }

    pub fn select(self, table: &LossTable) -> Choice {
        match self {
            Recipe::Classic => select_classic(table),
            Recipe::Pooled => select_pooled(table),
        }
    }

    /// Loss the recipe used to make its choice.
    pub fn selection_loss(self, table: &LossTable, choice: Choice) -> f64 {
        match self {
            Recipe::Classic => table.loss(choice.fold, choice.subset),
            Recipe::Pooled => {
                table.pooled_errors(choice.subset) as f64 / table.total_validation() as f64
            }
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a recipe picked and how the picked machine did on the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub recipe: Recipe,
    pub subset: FeatureSubset,
    pub fold: usize,
    pub selection_loss: f64,
    pub model: Machine,
    pub test_loss: f64,
}

/// Retrains the machine of the chosen fold and subset. This is the same
/// computation as the loss-table cell, so the result is identical to the
/// model that produced that cell's validation loss.
pub fn finalize_model(
    dataset: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    subset: &FeatureSubset,
    train_cfg: &TrainConfig,
    standardize: bool,
) -> Result<Machine> {
    if fold >= folds.k() {
        return Err(Error::data(format!("fold {fold} out of range")));
    }
    train_machine(dataset, folds, fold, subset, train_cfg, standardize)
}

/// Runs `recipe` on `table`, finalizes its machine and scores it on the
/// held-out test rows.
pub fn run_recipe(
    recipe: Recipe,
    table: &LossTable,
    dataset: &Dataset,
    split: &HoldoutSplit,
    folds: &FoldAssignment,
    train_cfg: &TrainConfig,
    standardize: bool,
) -> Result<SelectionOutcome> {
    let choice = recipe.select(table);
    let subset = table.subsets[choice.subset].clone();
    let model = finalize_model(dataset, folds, choice.fold, &subset, train_cfg, standardize)?;
    let test_loss = model.loss_on(dataset, &split.test_indices)?;
    Ok(SelectionOutcome {
        recipe,
        selection_loss: recipe.selection_loss(table, choice),
        subset,
        fold: choice.fold,
        model,
        test_loss,
    })
}
