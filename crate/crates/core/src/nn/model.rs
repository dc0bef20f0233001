use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, MhaParams, Var};
use super::tensor::Tensor;
use super::NnError;

/// Widths of the dense head after the CNN flatten layer.
pub const CNN_HEAD: [usize; 3] = [64, 32, 16];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arch {
    /// Dense layers with ReLU; no hidden layers gives multinomial logistic
    /// regression.
    Mlp { hidden: Vec<usize> },
    /// Three valid convolutions (`f`, `f/2`, `f/4` filters) each followed by
    /// ReLU and width-2 max pooling, then a 64/32/16 dense head.
    Cnn { num_filters: usize, kernel_size: usize },
    /// One post-norm encoder block with learned positional embeddings and
    /// mean pooling over positions.
    Transformer { num_heads: usize, ff_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InputKind {
    Features { dim: usize },
    Tokens { vocab_size: usize, max_len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input: InputKind,
    /// Token embedding width, and the model width of the Transformer. Unused
    /// by feature-input MLPs and CNNs.
    pub embed_dim: usize,
    pub n_classes: usize,
}

/// A batch of model inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs {
    Features(Vec<Vec<f64>>),
    Tokens(Vec<Vec<usize>>),
}

impl Inputs {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Features(x) => x.len(),
            Inputs::Tokens(x) => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Inputs {
        match self {
            Inputs::Features(x) => Inputs::Features(idx.iter().map(|&i| x[i].clone()).collect()),
            Inputs::Tokens(x) => Inputs::Tokens(idx.iter().map(|&i| x[i].clone()).collect()),
        }
    }
}

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl Params {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

fn glorot(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    Tensor { shape: shape.to_vec(), data: (0..n).map(|_| rng.gen_range(-limit..limit)).collect() }
}

fn normal(rng: &mut ChaCha8Rng, shape: &[usize], sd: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            // Box-Muller; 1 - u keeps the log argument in (0, 1]
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            sd * (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect();
    Tensor { shape: shape.to_vec(), data }
}

fn cnn_out_len(mut t: usize, k: usize) -> Option<usize> {
    for _ in 0..3 {
        if t < k {
            return None;
        }
        t = (t - k + 1) / 2;
        if t == 0 {
            return None;
        }
    }
    Some(t)
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        let cfg = |m: &str| Err(NnError::Config(m.into()));
        if self.n_classes < 2 {
            return cfg("need at least 2 classes");
        }
        let token_input = matches!(self.input, InputKind::Tokens { .. });
        match &self.input {
            InputKind::Features { dim: 0 } => return cfg("feature dim must be positive"),
            InputKind::Tokens { vocab_size, max_len } if *vocab_size == 0 || *max_len == 0 => {
                return cfg("vocab_size and max_len must be positive")
            }
            _ => {}
        }
        let needs_embed = token_input || matches!(self.arch, Arch::Transformer { .. });
        if needs_embed && self.embed_dim == 0 {
            return cfg("embed_dim must be positive");
        }
        match &self.arch {
            Arch::Mlp { hidden } if hidden.contains(&0) => cfg("hidden sizes must be positive"),
            Arch::Mlp { .. } => Ok(()),
            Arch::Cnn { num_filters, kernel_size } => {
                if *num_filters < 4 || *kernel_size == 0 {
                    return cfg("num_filters must be >= 4 and kernel_size >= 1");
                }
                let t = self.seq_len();
                match cnn_out_len(t, *kernel_size) {
                    Some(_) => Ok(()),
                    None => Err(NnError::TooShort { len: t, need: 7 * kernel_size }),
                }
            }
            Arch::Transformer { num_heads, ff_dim } => {
                if *num_heads == 0 || self.embed_dim % num_heads != 0 {
                    return Err(NnError::HeadDivisibility { dim: self.embed_dim, heads: *num_heads });
                }
                if *ff_dim == 0 {
                    return cfg("ff_dim must be positive");
                }
                Ok(())
            }
        }
    }

    /// Length of the sequence axis seen by CNN and Transformer layers.
    fn seq_len(&self) -> usize {
        match self.input {
            InputKind::Features { dim } => dim,
            InputKind::Tokens { max_len, .. } => max_len,
        }
    }

    /// Channels entering the first sequence layer.
    fn channels(&self) -> usize {
        match self.input {
            InputKind::Features { .. } => 1,
            InputKind::Tokens { .. } => self.embed_dim,
        }
    }

    /// Fresh parameters; weight matrices Glorot-uniform, biases zero,
    /// embedding tables normal(0, 0.05), layer norms at identity.
    pub fn init(&self, rng: &mut ChaCha8Rng) -> Result<Params, NnError> {
        self.validate()?;
        let mut p = Params { names: Vec::new(), tensors: Vec::new() };
        let mut add = |name: &str, t: Tensor| {
            p.names.push(name.to_string());
            p.tensors.push(t);
        };
        let dense = |add: &mut dyn FnMut(&str, Tensor), rng: &mut ChaCha8Rng, name: &str, i: usize, o: usize| {
            add(&format!("{name}.w"), glorot(rng, &[i, o], i, o));
            add(&format!("{name}.b"), Tensor::zeros(&[o]));
        };
        let c = self.n_classes;
        let e = self.embed_dim;
        if let InputKind::Tokens { vocab_size, .. } = self.input {
            add("embed", normal(rng, &[vocab_size, e], 0.05));
        }
        match &self.arch {
            Arch::Mlp { hidden } => {
                let mut width = match self.input {
                    InputKind::Features { dim } => dim,
                    InputKind::Tokens { .. } => e,
                };
                for (i, &h) in hidden.iter().enumerate() {
                    dense(&mut add, rng, &format!("hidden{i}"), width, h);
                    width = h;
                }
                dense(&mut add, rng, "out", width, c);
            }
            Arch::Cnn { num_filters, kernel_size } => {
                let k = *kernel_size;
                let mut ch = self.channels();
                for (i, f) in [*num_filters, num_filters / 2, num_filters / 4].into_iter().enumerate() {
                    add(&format!("conv{i}.w"), glorot(rng, &[k, ch, f], k * ch, k * f));
                    add(&format!("conv{i}.b"), Tensor::zeros(&[f]));
                    ch = f;
                }
                let mut width = ch * cnn_out_len(self.seq_len(), k).unwrap_or(0);
                for (i, h) in CNN_HEAD.into_iter().enumerate() {
                    dense(&mut add, rng, &format!("dense{i}"), width, h);
                    width = h;
                }
                dense(&mut add, rng, "out", width, c);
            }
            Arch::Transformer { ff_dim, .. } => {
                if let InputKind::Features { .. } = self.input {
                    dense(&mut add, rng, "input", 1, e);
                }
                add("pos", normal(rng, &[self.seq_len(), e], 0.05));
                for name in ["attn.q", "attn.k", "attn.v", "attn.o"] {
                    dense(&mut add, rng, name, e, e);
                }
                add("ln1.gamma", Tensor::filled(&[e], 1.0));
                add("ln1.beta", Tensor::zeros(&[e]));
                dense(&mut add, rng, "ff1", e, *ff_dim);
                dense(&mut add, rng, "ff2", *ff_dim, e);
                add("ln2.gamma", Tensor::filled(&[e], 1.0));
                add("ln2.beta", Tensor::zeros(&[e]));
                dense(&mut add, rng, "out", e, c);
            }
        }
        Ok(p)
    }

    fn check_inputs(&self, x: &Inputs) -> Result<(), NnError> {
        match (&self.input, x) {
            (InputKind::Features { dim }, Inputs::Features(rows)) => match rows.iter().find(|r| r.len() != *dim) {
                Some(r) => Err(NnError::Shape(format!("expected {dim} features, found {}", r.len()))),
                None => Ok(()),
            },
            (InputKind::Tokens { vocab_size, max_len }, Inputs::Tokens(rows)) => {
                for r in rows {
                    if r.len() != *max_len {
                        return Err(NnError::Shape(format!("expected {max_len} tokens, found {}", r.len())));
                    }
                    if let Some(&id) = r.iter().find(|&&id| id >= *vocab_size) {
                        return Err(NnError::IdOutOfRange { id, vocab: *vocab_size });
                    }
                }
                Ok(())
            }
            _ => Err(NnError::Shape("input kind does not match the model".into())),
        }
    }

    /// Builds the forward pass on `g` and returns the logits `[B, C]`.
    /// `vars` are leaves holding the parameters, in `Params` order.
    pub fn forward(&self, g: &mut Graph, params: &Params, vars: &[Var], x: &Inputs) -> Result<Var, NnError> {
        self.check_inputs(x)?;
        let by_name: HashMap<&str, Var> = params.names.iter().map(String::as_str).zip(vars.iter().copied()).collect();
        let p = |n: &str| by_name.get(n).copied().ok_or_else(|| NnError::Shape(format!("missing parameter {n}")));
        let b = x.len();
        let t = self.seq_len();

        // Sequence view [B, T, C] for token inputs and for sequence models.
        let seq = |g: &mut Graph| -> Result<Var, NnError> {
            match x {
                Inputs::Tokens(rows) => {
                    let ids: Vec<usize> = rows.iter().flatten().copied().collect();
                    g.embedding(p("embed")?, &ids, &[b, t])
                }
                Inputs::Features(rows) => {
                    let data: Vec<f64> = rows.iter().flatten().copied().collect();
                    Ok(g.leaf(Tensor::new(&[b, t, 1], data)?))
                }
            }
        };

        let dense = |g: &mut Graph, h: Var, name: &str| g.linear(h, p(&format!("{name}.w"))?, p(&format!("{name}.b"))?);

        let logits = match &self.arch {
            Arch::Mlp { hidden } => {
                let mut h = match x {
                    Inputs::Features(rows) => {
                        let d = t;
                        g.leaf(Tensor::new(&[b, d], rows.iter().flatten().copied().collect())?)
                    }
                    Inputs::Tokens(_) => {
                        let s = seq(g)?;
                        g.mean_pool(s)?
                    }
                };
                for i in 0..hidden.len() {
                    h = dense(g, h, &format!("hidden{i}"))?;
                    h = g.relu(h);
                }
                dense(g, h, "out")?
            }
            Arch::Cnn { .. } => {
                let mut h = seq(g)?;
                for i in 0..3 {
                    h = g.conv1d(h, p(&format!("conv{i}.w"))?, p(&format!("conv{i}.b"))?)?;
                    h = g.relu(h);
                    h = g.maxpool1d(h, 2)?;
                }
                let flat: usize = g.shape(h)[1..].iter().product();
                h = g.reshape(h, &[b, flat])?;
                for i in 0..CNN_HEAD.len() {
                    h = dense(g, h, &format!("dense{i}"))?;
                    h = g.relu(h);
                }
                dense(g, h, "out")?
            }
            Arch::Transformer { num_heads, .. } => {
                let mut h = seq(g)?;
                if let Inputs::Features(_) = x {
                    h = dense(g, h, "input")?;
                }
                h = g.add_broadcast(h, p("pos")?)?;
                let mha = MhaParams {
                    wq: p("attn.q.w")?,
                    bq: p("attn.q.b")?,
                    wk: p("attn.k.w")?,
                    bk: p("attn.k.b")?,
                    wv: p("attn.v.w")?,
                    bv: p("attn.v.b")?,
                    wo: p("attn.o.w")?,
                    bo: p("attn.o.b")?,
                };
                let a = g.multi_head_attention(h, &mha, *num_heads)?;
                let r = g.add(h, a)?;
                let h1 = g.layer_norm(r, p("ln1.gamma")?, p("ln1.beta")?)?;
                let f = dense(g, h1, "ff1")?;
                let f = g.relu(f);
                let f = dense(g, f, "ff2")?;
                let r = g.add(h1, f)?;
                let h2 = g.layer_norm(r, p("ln2.gamma")?, p("ln2.beta")?)?;
                let pooled = g.mean_pool(h2)?;
                dense(g, pooled, "out")?
            }
        };
        Ok(logits)
    }

    /// Softmax probabilities for `x` under `params`.
    pub fn probabilities(&self, params: &Params, x: &Inputs) -> Result<Vec<Vec<f64>>, NnError> {
        if x.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new();
        let vars: Vec<Var> = params.tensors.iter().map(|t| g.leaf(t.clone())).collect();
        let logits = self.forward(&mut g, params, &vars, x)?;
        let probs = g.softmax(logits);
        Ok(g.value(probs).rows().map(<[f64]>::to_vec).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn transformer(heads: usize) -> ModelSpec {
        ModelSpec {
            arch: Arch::Transformer { num_heads: heads, ff_dim: 16 },
            input: InputKind::Tokens { vocab_size: 7, max_len: 5 },
            embed_dim: 8,
            n_classes: 3,
        }
    }

    #[test]
    fn transformer_rows_sum_to_one_and_repeat() {
        let spec = transformer(2);
        let params = spec.init(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let x = Inputs::Tokens(vec![vec![0, 0, 2, 3, 4], vec![1, 5, 6, 2, 2]]);
        let p = spec.probabilities(&params, &x).unwrap();
        for row in &p {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(p, spec.probabilities(&params, &x).unwrap());
    }

    #[test]
    fn permuting_vocabulary_leaves_output_unchanged() {
        let spec = transformer(1);
        let params = spec.init(&mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let perm = [3, 6, 0, 1, 5, 2, 4];
        let mut permuted = params.clone();
        let table = params.get("embed").unwrap();
        let e = table.shape[1];
        let slot = permuted.names.iter().position(|n| n == "embed").unwrap();
        for (old, &new) in perm.iter().enumerate() {
            permuted.tensors[slot].data[new * e..(new + 1) * e].copy_from_slice(table.row(old));
        }
        let rows = vec![vec![0, 1, 2, 3, 4], vec![6, 5, 4, 4, 0]];
        let mapped: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|&i| perm[i]).collect()).collect();
        let a = spec.probabilities(&params, &Inputs::Tokens(rows)).unwrap();
        let b = spec.probabilities(&permuted, &Inputs::Tokens(mapped)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(transformer(3).validate(), Err(NnError::HeadDivisibility { .. })));
        let cnn = ModelSpec {
            arch: Arch::Cnn { num_filters: 8, kernel_size: 3 },
            input: InputKind::Features { dim: 10 },
            embed_dim: 0,
            n_classes: 2,
        };
        assert!(matches!(cnn.validate(), Err(NnError::TooShort { .. })));
        let ok = ModelSpec { input: InputKind::Features { dim: 100 }, ..cnn };
        let params = ok.init(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let x = Inputs::Features(vec![vec![0.5; 100]; 3]);
        assert_eq!(ok.probabilities(&params, &x).unwrap().len(), 3);
        assert!(ok.probabilities(&params, &Inputs::Features(vec![vec![0.0; 9]])).is_err());
    }

    #[test]
    fn output_shape_for_all_head_counts() {
        for heads in 1..=5 {
            let spec = ModelSpec {
                arch: Arch::Transformer { num_heads: heads, ff_dim: 2 * 60 },
                input: InputKind::Tokens { vocab_size: 4, max_len: 3 },
                embed_dim: 60,
                n_classes: 2,
            };
            let params = spec.init(&mut ChaCha8Rng::seed_from_u64(heads as u64)).unwrap();
            let p = spec.probabilities(&params, &Inputs::Tokens(vec![vec![1, 2, 3]])).unwrap();
            assert_eq!(p[0].len(), 2);
        }
    }
}
