//! K-fold cross-validation model selection with a linear soft-margin SVM.
//!
//! Two selection recipes are run side by side on one shared table of
//! per-fold validation losses:
//!
//! * **classic**: pick the fold with the smallest achievable validation
//!   loss, then the best feature subset within that fold;
//! * **pooled**: pool the validation errors of every fold into one loss per
//!   feature subset, pick the best subset, then the best fold for it.
//!
//! The [`experiment`] module repeats both recipes over fresh random splits
//! and summarises the held-out test losses, the rank-sum comparison between
//! recipes and how often each feature ends up in a selected subset.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod report;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod svm;

pub use dataset::{Class, Dataset, FoldAssignment, HoldoutSplit, Standardizer, SynthConfig};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentReport, IterationRecord};
pub use selection::{FeatureSubset, LossTable, Recipe, SelectionOutcome};
pub use stats::{SummaryStats, UTestResult};
pub use svm::{SvmModel, TrainConfig};
