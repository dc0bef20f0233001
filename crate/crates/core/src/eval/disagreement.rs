use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrongRecord {
    pub index: usize,
    pub true_label: usize,
    /// One prediction per model, in model order.
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementReport {
    pub models: Vec<String>,
    pub all_correct: Vec<usize>,
    pub mixed: Vec<usize>,
    pub all_wrong: Vec<usize>,
    pub all_wrong_detail: Vec<WrongRecord>,
    pub all_wrong_fraction: f64,
}

/// Splits records by how many models got them right: all, some, or none.
pub fn ensemble_disagreement(
    predictions: &[(String, Vec<usize>)],
    y_true: &[usize],
) -> Result<DisagreementReport, EvalError> {
    for (_, p) in predictions {
        if p.len() != y_true.len() {
            return Err(EvalError::LengthMismatch { expected: y_true.len(), found: p.len() });
        }
    }
    let mut report = DisagreementReport {
        models: predictions.iter().map(|(m, _)| m.clone()).collect(),
        all_correct: Vec::new(),
        mixed: Vec::new(),
        all_wrong: Vec::new(),
        all_wrong_detail: Vec::new(),
        all_wrong_fraction: 0.0,
    };
    for (i, &y) in y_true.iter().enumerate() {
        let right = predictions.iter().filter(|(_, p)| p[i] == y).count();
        if right == predictions.len() {
            report.all_correct.push(i);
        } else if right == 0 {
            report.all_wrong.push(i);
            report.all_wrong_detail.push(WrongRecord {
                index: i,
                true_label: y,
                predictions: predictions.iter().map(|(_, p)| p[i]).collect(),
            });
        } else {
            report.mixed.push(i);
        }
    }
    if !y_true.is_empty() {
        report.all_wrong_fraction = report.all_wrong.len() as f64 / y_true.len() as f64;
    }
    Ok(report)
}
