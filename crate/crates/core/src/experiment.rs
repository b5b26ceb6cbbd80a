//! Repeated tandem comparison of the classic and pooled recipes.
//!
//! Each iteration draws a fresh stratified holdout split and fold
//! assignment, builds one loss table, and lets both recipes select from that
//! same table. Differences in test loss are therefore due to selection
//! alone.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, FoldAssignment, HoldoutSplit};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::selection::{self, CellStatus, FeatureSubset, LossTable, Recipe, SelectionOutcome};
use crate::stats::{self, SummaryStats, UTestResult};
use crate::svm::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub iterations: usize,
    pub folds: usize,
    pub test_fraction: f64,
    pub max_subset_size: usize,
    pub train: TrainConfig,
    pub standardize: bool,
    pub master_seed: u64,
    pub relevance_cutoff: f64,
    pub alpha: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            iterations: 30,
            folds: 5,
            test_fraction: 0.3,
            max_subset_size: 2,
            train: TrainConfig::default(),
            standardize: true,
            master_seed: 0,
            relevance_cutoff: 0.8,
            alpha: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::data("iterations must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::data("need at least 2 folds"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::data(
                "test fraction must lie strictly between 0 and 1",
            ));
        }
        if self.max_subset_size == 0 {
            return Err(Error::data("maximum subset size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.relevance_cutoff) {
            return Err(Error::data("relevance cutoff must lie in [0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::data(
                "significance level must lie strictly between 0 and 1",
            ));
        }
        self.train.validate()
    }
}

/// Everything produced by one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    pub split: HoldoutSplit,
    pub folds: FoldAssignment,
    /// The single table both recipes selected from.
    pub table: LossTable,
    pub classic: SelectionOutcome,
    pub pooled: SelectionOutcome,
}

impl IterationRecord {
    pub fn outcome(&self, recipe: Recipe) -> &SelectionOutcome {
        match recipe {
            Recipe::Classic => &self.classic,
            Recipe::Pooled => &self.pooled,
        }
    }
}

/// Runs iteration `index`: split, folds, one shared loss table, both
/// recipes, test evaluation.
pub fn run_iteration(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    index: usize,
) -> Result<IterationRecord> {
    cfg.validate()?;
    let subsets = selection::enumerate_subsets(dataset.n_features(), cfg.max_subset_size)?;
    run_iteration_with(dataset, cfg, index, &subsets)
}

fn run_iteration_with(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    index: usize,
    subsets: &[FeatureSubset],
) -> Result<IterationRecord> {
    let labels = dataset.labels();
    let mut holdout_rng = rng::stream(cfg.master_seed, Purpose::Holdout, index as u64);
    let split = dataset::stratified_holdout(labels, cfg.test_fraction, &mut holdout_rng)?;
    let mut fold_rng = rng::stream(cfg.master_seed, Purpose::Folds, index as u64);
    let folds = dataset::stratified_kfold(labels, &split.dev_indices, cfg.folds, &mut fold_rng)?;

    let table = selection::build_loss_table(
        dataset,
        &split,
        &folds,
        subsets,
        &cfg.train,
        cfg.standardize,
    )?;
    let run = |recipe| {
        selection::run_recipe(
            recipe,
            &table,
            dataset,
            &split,
            &folds,
            &cfg.train,
            cfg.standardize,
        )
    };
    let classic = run(Recipe::Classic)?;
    let pooled = run(Recipe::Pooled)?;
    Ok(IterationRecord {
        index,
        split,
        folds,
        table,
        classic,
        pooled,
    })
}

/// Runs all iterations (in parallel), returned in index order.
pub fn run_iterations(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<IterationRecord>> {
    cfg.validate()?;
    let subsets = selection::enumerate_subsets(dataset.n_features(), cfg.max_subset_size)?;
    (0..cfg.iterations)
        .into_par_iter()
        .map(|i| run_iteration_with(dataset, cfg, i, &subsets))
        .collect()
}

/// Per-recipe pair of values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerRecipe<T> {
    pub classic: T,
    pub pooled: T,
}

impl<T> PerRecipe<T> {
    pub fn get(&self, recipe: Recipe) -> &T {
        match recipe {
            Recipe::Classic => &self.classic,
            Recipe::Pooled => &self.pooled,
        }
    }

    fn build(mut f: impl FnMut(Recipe) -> T) -> Self {
        PerRecipe {
            classic: f(Recipe::Classic),
            pooled: f(Recipe::Pooled),
        }
    }
}

impl<T, E> PerRecipe<std::result::Result<T, E>> {
    fn transpose(self) -> std::result::Result<PerRecipe<T>, E> {
        Ok(PerRecipe {
            classic: self.classic?,
            pooled: self.pooled?,
        })
    }
}

/// One recipe's choice in one iteration, as stored in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeChoice {
    pub subset: FeatureSubset,
    pub subset_names: String,
    pub fold: usize,
    pub selection_loss: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub index: usize,
    pub test_size: usize,
    pub classic: RecipeChoice,
    pub pooled: RecipeChoice,
    pub not_converged_cells: usize,
    pub degenerate_cells: usize,
}

impl IterationSummary {
    pub fn choice(&self, recipe: Recipe) -> &RecipeChoice {
        match recipe {
            Recipe::Classic => &self.classic,
            Recipe::Pooled => &self.pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScoreRow {
    pub name: String,
    pub classic: f64,
    pub pooled: f64,
    pub relevant_classic: bool,
    pub relevant_pooled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub not_converged_cells: usize,
    pub degenerate_cells: usize,
}

/// Serializable outcome of a full experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub feature_names: Vec<String>,
    pub iterations: Vec<IterationSummary>,
    pub summary: PerRecipe<SummaryStats>,
    pub utest: UTestResult,
    pub feature_scores: Vec<FeatureScoreRow>,
    pub unique_subset_counts: PerRecipe<usize>,
    pub flags: FlagCounts,
}

impl ExperimentReport {
    /// Test losses of `recipe`, in iteration order.
    pub fn test_losses(&self, recipe: Recipe) -> Vec<f64> {
        self.iterations
            .iter()
            .map(|it| it.choice(recipe).test_loss)
            .collect()
    }

    /// Structural checks on a report, e.g. one read back from disk.
    pub fn validate(&self) -> Result<()> {
        let d = self.feature_names.len();
        if d == 0 {
            return Err(Error::data("report lists no features"));
        }
        if self.iterations.is_empty() {
            return Err(Error::data("report has no iterations"));
        }
        if self.feature_scores.len() != d {
            return Err(Error::data(
                "feature score table does not match feature list",
            ));
        }
        for it in &self.iterations {
            for recipe in Recipe::BOTH {
                let c = it.choice(recipe);
                if c.subset.is_empty() || c.subset.indices().iter().any(|&j| j >= d) {
                    return Err(Error::data(format!(
                        "iteration {}: subset out of range",
                        it.index
                    )));
                }
                for v in [c.selection_loss, c.test_loss] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::data(format!(
                            "iteration {}: loss {v} outside [0, 1]",
                            it.index
                        )));
                    }
                }
            }
        }
        for s in [&self.summary.classic, &self.summary.pooled] {
            if !s.is_consistent() {
                return Err(Error::data("summary statistics are not ordered"));
            }
        }
        if !(0.0..=1.0).contains(&self.utest.p_two_sided) {
            return Err(Error::data("p-value outside [0, 1]"));
        }
        Ok(())
    }
}

/// Feature scores over the deduplicated set of selected subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScores {
    /// Fraction of unique subsets containing each feature.
    pub scores: Vec<f64>,
    pub unique_subsets: usize,
}

/// `score(f) = #unique subsets containing f / #unique subsets`, where
/// subsets are deduplicated by set equality.
pub fn feature_scores<'a>(
    subsets: impl IntoIterator<Item = &'a FeatureSubset>,
    n_features: usize,
) -> FeatureScores {
    let unique: BTreeSet<&FeatureSubset> = subsets.into_iter().collect();
    let mut counts = vec![0usize; n_features];
    for s in &unique {
        for &j in s.indices() {
            if j < n_features {
                counts[j] += 1;
            }
        }
    }
    let total = unique.len();
    FeatureScores {
        scores: counts
            .into_iter()
            .map(|c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            })
            .collect(),
        unique_subsets: total,
    }
}

/// Feature scores of one recipe over a set of iteration records.
pub fn compute_feature_scores(
    records: &[IterationRecord],
    recipe: Recipe,
    n_features: usize,
) -> FeatureScores {
    feature_scores(
        records.iter().map(|r| &r.outcome(recipe).subset),
        n_features,
    )
}

/// `score >= cutoff`.
pub fn mark_relevant(scores: &[f64], cutoff: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= cutoff).collect()
}

/// Aggregates iteration records into a report.
pub fn build_report(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    records: &[IterationRecord],
) -> Result<ExperimentReport> {
    if records.is_empty() {
        return Err(Error::data("no iterations to report"));
    }
    let names = dataset.feature_names();
    let d = dataset.n_features();

    let iterations: Vec<IterationSummary> = records
        .iter()
        .map(|r| {
            let choice = |o: &SelectionOutcome| RecipeChoice {
                subset: o.subset.clone(),
                subset_names: o.subset.label(names),
                fold: o.fold,
                selection_loss: o.selection_loss,
                test_loss: o.test_loss,
            };
            IterationSummary {
                index: r.index,
                test_size: r.split.test_indices.len(),
                classic: choice(&r.classic),
                pooled: choice(&r.pooled),
                not_converged_cells: r.table.count_status(CellStatus::NotConverged),
                degenerate_cells: r.table.count_status(CellStatus::Degenerate),
            }
        })
        .collect();

    let losses = PerRecipe::build(|recipe| {
        records
            .iter()
            .map(|r| r.outcome(recipe).test_loss)
            .collect::<Vec<_>>()
    });
    let summary = PerRecipe::build(|recipe| stats::summarize(losses.get(recipe))).transpose()?;
    let utest = stats::mann_whitney(&losses.classic, &losses.pooled, cfg.alpha)?;

    let scores = PerRecipe::build(|recipe| compute_feature_scores(records, recipe, d));
    let relevant =
        PerRecipe::build(|recipe| mark_relevant(&scores.get(recipe).scores, cfg.relevance_cutoff));
    let feature_scores = (0..d)
        .map(|j| FeatureScoreRow {
            name: names[j].clone(),
            classic: scores.classic.scores[j],
            pooled: scores.pooled.scores[j],
            relevant_classic: relevant.classic[j],
            relevant_pooled: relevant.pooled[j],
        })
        .collect();

    let flags = FlagCounts {
        not_converged_cells: iterations.iter().map(|i| i.not_converged_cells).sum(),
        degenerate_cells: iterations.iter().map(|i| i.degenerate_cells).sum(),
    };

    Ok(ExperimentReport {
        config: *cfg,
        feature_names: names.to_vec(),
        iterations,
        summary,
        utest,
        feature_scores,
        unique_subset_counts: PerRecipe {
            classic: scores.classic.unique_subsets,
            pooled: scores.pooled.unique_subsets,
        },
        flags,
    })
}

/// Runs every iteration and aggregates the report.
pub fn run_experiment(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let records = run_iterations(dataset, cfg)?;
    build_report(dataset, cfg, &records)
}
