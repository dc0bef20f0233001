//! Evaluation: multiclass metrics, PR curves, stratified and nested
//! cross-validation, grid search and cross-model disagreement.

mod cv;
mod disagreement;
mod metrics;
mod search;

pub use cv::{nested_cv, stratified_kfold, CvPlan, FoldTask, NestedCvOutcome, OuterFoldResult};
pub use disagreement::{ensemble_disagreement, DisagreementReport, WrongRecord};
pub use metrics::{
    argmax, average_precision, confusion, evaluate, micro_metrics, overall_mcc, per_class_f1,
    per_class_mcc, per_class_precision_recall, pr_curve, pr_curves_csv, ClassMetrics,
    ConfusionMatrix, MetricsReport, MicroMetrics, OverallMetrics, PrCurve, PrPoint, Score,
};
pub use search::{HyperGrid, HyperParams};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label {0} is not a known class index")]
    UnknownLabel(usize),
    #[error("probability rows must have {expected} columns, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("precision-recall curve needs at least one positive")]
    NoPositives,
    #[error("invalid fold count k = {k} for {n} records")]
    BadK { k: usize, n: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("record {0} was never assigned to an outer test fold")]
    Untested(usize),
}
