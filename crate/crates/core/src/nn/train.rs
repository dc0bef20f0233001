use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::model::{Inputs, ModelSpec, Params};
use super::NnError;
use crate::{derive_seed, par_map};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// L2 penalty added to the gradient of every weight matrix.
    #[serde(default)]
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, batch_size: 128, epochs: 300, seed: 0, optimizer: Optimizer::adam(), l2: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config("learning_rate must be a positive number".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(NnError::Config("l2 must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub params: Params,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

/// Mini-batch training with per-epoch shuffling drawn from `cfg.seed`.
/// Single-threaded so the result depends only on the inputs.
pub fn train(spec: &ModelSpec, x: &Inputs, y: &[usize], cfg: &TrainConfig) -> Result<FittedModel, NnError> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(NnError::Config("no training data".into()));
    }
    if x.len() != y.len() {
        return Err(NnError::Shape(format!("{} inputs but {} labels", x.len(), y.len())));
    }
    if let Some(&label) = y.iter().find(|&&c| c >= spec.n_classes) {
        return Err(NnError::LabelOutOfRange { label, classes: spec.n_classes });
    }
    let mut params = spec.init(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0])))?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1]));
    let decay: Vec<bool> = params.tensors.iter().map(|t| t.shape.len() >= 2).collect();
    let mut adam = AdamState {
        m: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        v: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        step: 0,
    };
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx = x.select(batch);
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let mut g = Graph::new();
            let vars: Vec<Var> = params.tensors.iter().map(|t| g.leaf(t.clone())).collect();
            let logits = spec.forward(&mut g, &params, &vars, &bx)?;
            let loss = g.softmax_cross_entropy(logits, &by)?;
            let lv = g.value(loss).data[0];
            if !lv.is_finite() {
                return Err(NnError::Diverged { epoch });
            }
            total += lv * batch.len() as f64;
            let mut grads = g.backward(loss);
            adam.step += 1;
            for (k, var) in vars.iter().enumerate() {
                let Some(mut grad) = grads.take(*var) else { continue };
                if cfg.l2 > 0.0 && decay[k] {
                    for (gv, w) in grad.iter_mut().zip(&params.tensors[k].data) {
                        *gv += cfg.l2 * w;
                    }
                }
                let w = &mut params.tensors[k].data;
                match cfg.optimizer {
                    Optimizer::Sgd => {
                        for (wi, gi) in w.iter_mut().zip(&grad) {
                            *wi -= cfg.learning_rate * gi;
                        }
                    }
                    Optimizer::Adam { beta1, beta2, eps } => {
                        let c1 = 1.0 - beta1.powi(adam.step);
                        let c2 = 1.0 - beta2.powi(adam.step);
                        let (m, v) = (&mut adam.m[k], &mut adam.v[k]);
                        for i in 0..w.len() {
                            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                            w[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                        }
                    }
                }
            }
        }
        let mean = total / x.len() as f64;
        if !mean.is_finite() || params.tensors.iter().any(|t| t.data.iter().any(|v| !v.is_finite())) {
            return Err(NnError::Diverged { epoch });
        }
        history.push(mean);
    }
    Ok(FittedModel { spec: spec.clone(), params, history })
}

/// Rows per inference batch.
const PREDICT_BATCH: usize = 64;

/// Class probabilities, computed over batches in parallel.
pub fn predict_proba(model: &FittedModel, x: &Inputs) -> Result<Vec<Vec<f64>>, NnError> {
    let idx: Vec<usize> = (0..x.len()).collect();
    let chunks: Vec<Vec<usize>> = idx.chunks(PREDICT_BATCH).map(<[usize]>::to_vec).collect();
    let parts = par_map(chunks, |c| model.spec.probabilities(&model.params, &x.select(&c)));
    let mut out = Vec::with_capacity(x.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

impl FittedModel {
    pub fn predict_proba(&self, x: &Inputs) -> Result<Vec<Vec<f64>>, NnError> {
        predict_proba(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Arch, InputKind};

    fn toy() -> (Inputs, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 10) as f64 / 10.0;
            let b = (i / 10) as f64 / 4.0;
            rows.push(vec![a, b]);
            y.push(usize::from(a + b > 0.8));
        }
        (Inputs::Features(rows), y)
    }

    fn logistic() -> ModelSpec {
        ModelSpec { arch: Arch::Mlp { hidden: vec![] }, input: InputKind::Features { dim: 2 }, embed_dim: 0, n_classes: 2 }
    }

    #[test]
    fn logistic_regression_separates_toy() {
        let (x, y) = toy();
        let cfg = TrainConfig { learning_rate: 0.1, batch_size: 8, epochs: 300, seed: 3, ..Default::default() };
        let m = train(&logistic(), &x, &y, &cfg).unwrap();
        assert_eq!(m.history.len(), 300);
        let p = m.predict_proba(&x).unwrap();
        let acc = p.iter().zip(&y).filter(|(r, &t)| crate::eval::argmax(r) == t).count();
        assert_eq!(acc, y.len());
    }

    #[test]
    fn same_seed_same_parameters() {
        let (x, y) = toy();
        let cfg = TrainConfig { learning_rate: 0.05, batch_size: 5, epochs: 3, seed: 9, ..Default::default() };
        let spec = ModelSpec { arch: Arch::Mlp { hidden: vec![4] }, ..logistic() };
        assert_eq!(train(&spec, &x, &y, &cfg).unwrap(), train(&spec, &x, &y, &cfg).unwrap());
    }

    #[test]
    fn config_errors() {
        let (x, y) = toy();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        assert!(matches!(train(&logistic(), &x, &y, &cfg), Err(NnError::Config(_))));
        let cfg = TrainConfig { learning_rate: 1e300, optimizer: Optimizer::Sgd, epochs: 5, ..Default::default() };
        let big = Inputs::Features(vec![vec![1e200, -1e200]; 4]);
        assert!(matches!(train(&logistic(), &big, &[0, 1, 0, 1], &cfg), Err(NnError::Diverged { epoch: 1 })));
    }
}
