//! Tree ensembles on fixed-length feature vectors: CART, random forest and
//! RUSBoost.

mod forest;
mod rusboost;
mod tree;

pub use forest::{fit_forest, ForestConfig, RandomForest};
pub use rusboost::{balanced_undersample, fit_rusboost, RusBoost, RusBoostConfig, MAX_RETRIES};
pub use tree::{fit_tree, gini, DecisionTree, Node, TreeParams};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("no training data")]
    Empty,
    #[error("feature rows have no columns")]
    NoFeatures,
    #[error("{rows} rows but {labels} labels/weights")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("expected {expected} features per row, found {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("label {0} is out of range")]
    BadLabel(usize),
    #[error("class {0} has no training samples")]
    MissingClass(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no boosting round beat chance after {MAX_RETRIES} retries")]
    NoUsefulStage,
}
