//! Stratified k-fold splitting and nested cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsReport, OverallMetrics};
use super::EvalError;
use crate::{derive_seed, par_map, Error, Result};

/// Per class, shuffles the member indices and deals them round-robin into
/// `k` folds. The dealing position carries over from one class to the next
/// so fold sizes stay within one of each other. Each fold is sorted.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> std::result::Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::BadK { k, n: labels.len() });
    }
    if k > labels.len() {
        return Err(EvalError::BadK { k, n: labels.len() });
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Outer and inner fold assignments for a nested run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k_outer: usize,
    pub k_inner: usize,
    pub seed: u64,
    pub n_records: usize,
    /// Test indices of each outer fold.
    pub outer: Vec<Vec<usize>>,
    /// For each outer fold, the validation indices of each inner fold
    /// (global record indices drawn from that outer fold's training side).
    pub inner: Vec<Vec<Vec<usize>>>,
}

impl CvPlan {
    pub fn new(labels: &[usize], k_outer: usize, k_inner: usize, seed: u64) -> std::result::Result<Self, EvalError> {
        let outer = stratified_kfold(labels, k_outer, seed)?;
        let mut inner = Vec::with_capacity(k_outer);
        for (f, test) in outer.iter().enumerate() {
            let train = complement(labels.len(), test);
            let sub: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let local = stratified_kfold(&sub, k_inner, derive_seed(seed, &[1, f as u64]))?;
            inner.push(
                local
                    .into_iter()
                    .map(|fold| fold.into_iter().map(|j| train[j]).collect())
                    .collect(),
            );
        }
        Ok(CvPlan { k_outer, k_inner, seed, n_records: labels.len(), outer, inner })
    }

    pub fn outer_split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (complement(self.n_records, &self.outer[f]), self.outer[f].clone())
    }

    pub fn inner_split(&self, f: usize, i: usize) -> (Vec<usize>, Vec<usize>) {
        let (train, _) = self.outer_split(f);
        let val = &self.inner[f][i];
        let fit: Vec<usize> = train.into_iter().filter(|x| val.binary_search(x).is_err()).collect();
        (fit, val.clone())
    }
}

fn complement(n: usize, sorted: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| sorted.binary_search(i).is_err()).collect()
}

/// One unit of work handed to the model callback.
#[derive(Debug, Clone, Copy)]
pub struct FoldTask<'a> {
    pub outer: usize,
    pub inner: Option<usize>,
    pub train: &'a [usize],
    pub test: &'a [usize],
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterFoldResult<P> {
    pub outer: usize,
    pub chosen_index: usize,
    pub chosen: P,
    /// Mean inner validation score per grid point; empty when the grid has a
    /// single point and no search was needed.
    pub inner_scores: Vec<f64>,
    pub test_size: usize,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct NestedCvOutcome<P> {
    pub folds: Vec<OuterFoldResult<P>>,
    /// Metrics over the union of outer test folds (every record once).
    pub pooled: MetricsReport,
    /// Arithmetic mean of the per-fold overall metrics.
    pub fold_mean: OverallMetrics,
    /// Outer-test class probabilities, indexed by record.
    #[serde(skip)]
    pub oof_proba: Vec<Vec<f64>>,
}

/// Nested cross-validation. For each outer fold, every grid point is scored
/// by its mean inner-validation mean score; the best (first on ties) is refit
/// on the full outer training side and evaluated once on the outer test fold.
///
/// `fit_predict` trains on `task.train` and returns class probabilities for
/// `task.test`, in that order.
pub fn nested_cv<P, F>(
    labels: &[usize],
    class_names: &[String],
    grid: &[P],
    plan: &CvPlan,
    fit_predict: F,
) -> Result<NestedCvOutcome<P>>
where
    P: Clone + Send + Sync,
    F: Fn(&P, &FoldTask<'_>) -> Result<Vec<Vec<f64>>> + Sync,
{
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid.into());
    }
    if plan.n_records != labels.len() {
        return Err(EvalError::LengthMismatch { expected: plan.n_records, found: labels.len() }.into());
    }
    let with_ctx = |outer: usize, inner: Option<usize>| {
        move |e: Error| Error::Fold { outer, inner, source: Box::new(e) }
    };

    let folds: Vec<Result<(OuterFoldResult<P>, Vec<usize>, Vec<Vec<f64>>)>> =
        par_map((0..plan.k_outer).collect(), |outer| {
            let inner_scores = if grid.len() == 1 {
                Vec::new()
            } else {
                let units: Vec<(usize, usize)> = (0..grid.len())
                    .flat_map(|g| (0..plan.k_inner).map(move |i| (g, i)))
                    .collect();
                let scores: Vec<Result<f64>> = par_map(units, |(g, i)| {
                    let (train, val) = plan.inner_split(outer, i);
                    let task = FoldTask {
                        outer,
                        inner: Some(i),
                        train: &train,
                        test: &val,
                        seed: derive_seed(plan.seed, &[3, outer as u64, i as u64]),
                    };
                    let prob = fit_predict(&grid[g], &task).map_err(with_ctx(outer, Some(i)))?;
                    let y: Vec<usize> = val.iter().map(|&r| labels[r]).collect();
                    let rep = evaluate(&prob, &y, class_names).map_err(|e| with_ctx(outer, Some(i))(e.into()))?;
                    Ok(rep.overall.mean_score)
                });
                let scores = scores.into_iter().collect::<Result<Vec<f64>>>()?;
                scores
                    .chunks(plan.k_inner)
                    .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                    .collect()
            };
            let mut chosen_index = 0;
            for (g, &s) in inner_scores.iter().enumerate() {
                if s > inner_scores[chosen_index] {
                    chosen_index = g;
                }
            }

            let (train, test) = plan.outer_split(outer);
            let task = FoldTask {
                outer,
                inner: None,
                train: &train,
                test: &test,
                seed: derive_seed(plan.seed, &[2, outer as u64]),
            };
            let prob = fit_predict(&grid[chosen_index], &task).map_err(with_ctx(outer, None))?;
            let y: Vec<usize> = test.iter().map(|&r| labels[r]).collect();
            let report = evaluate(&prob, &y, class_names).map_err(|e| with_ctx(outer, None)(e.into()))?;
            Ok((
                OuterFoldResult {
                    outer,
                    chosen_index,
                    chosen: grid[chosen_index].clone(),
                    inner_scores,
                    test_size: test.len(),
                    report,
                },
                test,
                prob,
            ))
        });

    let mut results = Vec::with_capacity(plan.k_outer);
    let mut oof: Vec<Option<Vec<f64>>> = vec![None; labels.len()];
    for fold in folds {
        let (res, test, prob) = fold?;
        for (r, p) in test.into_iter().zip(prob) {
            oof[r] = Some(p);
        }
        results.push(res);
    }
    let oof_proba: Vec<Vec<f64>> = oof
        .into_iter()
        .enumerate()
        .map(|(r, p)| p.ok_or(EvalError::Untested(r)))
        .collect::<std::result::Result<_, _>>()?;
    let pooled = evaluate(&oof_proba, labels, class_names)?;
    let k = results.len() as f64;
    let mean = |f: fn(&OverallMetrics) -> f64| results.iter().map(|r| f(&r.report.overall)).sum::<f64>() / k;
    let fold_mean = OverallMetrics {
        micro_f1: mean(|o| o.micro_f1),
        micro_aucpr: mean(|o| o.micro_aucpr),
        overall_mcc: mean(|o| o.overall_mcc),
        mean_score: mean(|o| o.mean_score),
    };
    Ok(NestedCvOutcome { folds: results, pooled, fold_mean, oof_proba })
}
