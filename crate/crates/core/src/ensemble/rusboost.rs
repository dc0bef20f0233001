use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{check_xy, fit_tree, DecisionTree, TreeParams};
use super::TreeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RusBoostConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for RusBoostConfig {
    fn default() -> Self {
        RusBoostConfig { n_estimators: 50, learning_rate: 0.1, max_depth: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RusBoost {
    pub stages: Vec<DecisionTree>,
    pub alphas: Vec<f64>,
    pub n_classes: usize,
}

/// Rounds whose weighted error is too high are redrawn this many times.
pub const MAX_RETRIES: usize = 10;

/// Draws `minority` indices per class without replacement.
pub fn balanced_undersample(by_class: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let minority = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut out = Vec::with_capacity(minority * by_class.len());
    for members in by_class {
        let mut picked: Vec<usize> =
            sample(rng, members.len(), minority).into_iter().map(|k| members[k]).collect();
        picked.sort_unstable();
        out.extend(picked);
    }
    out
}

/// Boosting with random undersampling. Each round fits a tree on a
/// class-balanced subsample (weighted by the current instance weights), then
/// scores it on the full set with the multiclass stage weight
/// α = lr · (ln((1 − ε)/ε) + ln(C − 1)).
pub fn fit_rusboost(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    cfg: &RusBoostConfig,
) -> Result<RusBoost, TreeError> {
    check_xy(x, y, n_classes)?;
    if !(cfg.learning_rate > 0.0) {
        return Err(TreeError::Config("learning_rate must be > 0".into()));
    }
    if cfg.n_estimators == 0 {
        return Err(TreeError::Config("n_estimators must be >= 1".into()));
    }
    if n_classes < 2 {
        return Err(TreeError::Config("boosting needs at least 2 classes".into()));
    }
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        by_class[c].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(TreeError::MissingClass(c));
    }

    let n = x.len();
    let c = n_classes as f64;
    let mut w = vec![1.0 / n as f64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = TreeParams { max_depth: cfg.max_depth, features_per_split: None };
    let mut model = RusBoost { stages: Vec::new(), alphas: Vec::new(), n_classes };

    'rounds: for _ in 0..cfg.n_estimators {
        for _attempt in 0..=MAX_RETRIES {
            let idx = balanced_undersample(&by_class, &mut rng);
            let sx: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
            let sy: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            let sw: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
            let tree = fit_tree(&sx, &sy, Some(&sw), n_classes, params, &mut rng)?;

            let wrong: Vec<bool> = x.iter().zip(y).map(|(r, &t)| tree.predict_row(r) != t).collect();
            let total: f64 = w.iter().sum();
            let err = w.iter().zip(&wrong).filter(|(_, &m)| m).map(|(wi, _)| wi).sum::<f64>() / total;
            if err >= 1.0 - 1.0 / c {
                continue;
            }
            let e = err.max(1e-10);
            let alpha = cfg.learning_rate * (((1.0 - e) / e).ln() + (c - 1.0).ln());
            model.stages.push(tree);
            model.alphas.push(alpha);
            if err == 0.0 {
                break 'rounds;
            }
            for (wi, &m) in w.iter_mut().zip(&wrong) {
                if m {
                    *wi *= alpha.exp();
                }
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|wi| *wi /= total);
            continue 'rounds;
        }
        // every retry was no better than chance
        break;
    }
    if model.stages.is_empty() {
        return Err(TreeError::NoUsefulStage);
    }
    Ok(model)
}

impl RusBoost {
    /// α-weighted vote shares.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TreeError> {
        for t in &self.stages {
            t.check_rows(x)?;
        }
        let total: f64 = self.alphas.iter().sum();
        Ok(x
            .iter()
            .map(|row| {
                let mut votes = vec![0.0; self.n_classes];
                for (t, a) in self.stages.iter().zip(&self.alphas) {
                    votes[t.predict_row(row)] += a;
                }
                votes.iter_mut().for_each(|v| *v /= total);
                votes
            })
            .collect())
    }
}
