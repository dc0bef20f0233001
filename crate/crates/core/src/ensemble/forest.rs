use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{check_xy, fit_tree, DecisionTree, TreeParams};
use super::TreeError;
use crate::{derive_seed, par_map};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Defaults to ⌈√d⌉ when `None`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_estimators: 100, max_depth: 10, features_per_split: None, seed: 0, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

/// Per-tree generator: independent of fitting order, so trees can be grown
/// in parallel without changing the result.
pub(crate) fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tree as u64]))
}

pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    cfg: &ForestConfig,
) -> Result<RandomForest, TreeError> {
    let d = check_xy(x, y, n_classes)?;
    if cfg.n_estimators == 0 {
        return Err(TreeError::Config("n_estimators must be >= 1".into()));
    }
    let params = TreeParams {
        max_depth: cfg.max_depth,
        features_per_split: Some(cfg.features_per_split.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)),
    };
    let trees = par_map((0..cfg.n_estimators).collect(), |t| {
        let mut rng = tree_rng(cfg.seed, t);
        if cfg.bootstrap {
            let n = x.len();
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let bx: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
            let by: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            fit_tree(&bx, &by, None, n_classes, params, &mut rng)
        } else {
            fit_tree(x, y, None, n_classes, params, &mut rng)
        }
    });
    Ok(RandomForest { trees: trees.into_iter().collect::<Result<_, _>>()?, n_classes })
}

impl RandomForest {
    /// Mean of the per-tree leaf distributions.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TreeError> {
        for t in &self.trees {
            t.check_rows(x)?;
        }
        let k = self.trees.len() as f64;
        Ok(x
            .iter()
            .map(|row| {
                let mut acc = vec![0.0; self.n_classes];
                for t in &self.trees {
                    for (a, p) in acc.iter_mut().zip(t.proba_row(row)) {
                        *a += p;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= k);
                acc
            })
            .collect())
    }
}
