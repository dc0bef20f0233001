//! Glue between representations, models and evaluation: turns a labeled
//! corpus plus a model kind and hyperparameters into trained models and
//! probability matrices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{fit_forest, fit_rusboost, ForestConfig, RusBoostConfig};
use crate::eval::{nested_cv, CvPlan, HyperGrid, HyperParams, NestedCvOutcome};
use crate::io::{Checkpoint, SavedModel};
use crate::ngram::{build_vocab, encode_pad, tokenize, Vocabulary};
use crate::nn::{self, Arch, InputKind, Inputs, ModelSpec, Optimizer, TrainConfig};
use crate::pssm::{encode, gpssm_from_raw, RawPssm, Scheme};
use crate::seqio::LabeledDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Cnn,
    Transformer,
    Rf,
    RusBoost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Mlp, ModelKind::Cnn, ModelKind::Transformer, ModelKind::Rf, ModelKind::RusBoost];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
            ModelKind::Transformer => "transformer",
            ModelKind::Rf => "rf",
            ModelKind::RusBoost => "rusboost",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Mlp | ModelKind::Cnn | ModelKind::Transformer)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown model '{s}' (expected mlp|cnn|transformer|rf|rusboost)"))
    }
}

/// How a record is presented to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Fixed-length PSSM encoding.
    Pssm(Scheme),
    /// Left-padded overlapping n-gram ids.
    Ngrams(usize),
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representation::Pssm(s) => write!(f, "{s}-pssm"),
            Representation::Ngrams(n) => write!(f, "{n}-grams"),
        }
    }
}

/// The search space per model. Axis values follow the published grids; the
/// Transformer learning rate and the MLP hidden width, batch size and
/// RUSBoost base depth are fixed library defaults.
pub fn default_grid(kind: ModelKind) -> HyperGrid {
    match kind {
        ModelKind::Rf => HyperGrid::new()
            .axis("n_estimators", &[100.0, 200.0, 500.0, 1000.0, 1500.0, 2000.0])
            .axis("max_depth", &[5.0, 10.0, 15.0, 20.0]),
        ModelKind::RusBoost => HyperGrid::new()
            .axis("n_estimators", &[50.0, 100.0, 200.0, 500.0, 1000.0, 1500.0, 2000.0])
            .axis("learning_rate", &[0.001, 0.01, 0.1])
            .axis("max_depth", &[1.0]),
        ModelKind::Mlp => HyperGrid::new()
            .axis("alpha", &[0.001, 0.01, 0.05])
            .axis("learning_rate", &[0.001, 0.01, 0.05])
            .axis("epochs", &[500.0])
            .axis("hidden", &[100.0])
            .axis("batch_size", &[200.0]),
        ModelKind::Cnn => HyperGrid::new()
            .axis("num_filters", &[64.0, 128.0, 256.0])
            .axis("learning_rate", &[0.01, 0.05, 0.001, 0.0001])
            .axis("batch_size", &[128.0])
            .axis("epochs", &[300.0])
            .axis("kernel_size", &[3.0])
            .axis("embed_dim", &[32.0]),
        ModelKind::Transformer => HyperGrid::new()
            .axis("embed_dim", &[32.0, 64.0, 128.0])
            .axis("num_heads", &[1.0, 2.0, 3.0, 4.0, 5.0])
            .axis("batch_size", &[128.0])
            .axis("epochs", &[300.0])
            .axis("learning_rate", &[0.001]),
    }
}

/// Grid points a model can actually be built from; drops Transformer points
/// whose embed_dim is not divisible by num_heads.
pub fn grid_points(kind: ModelKind, grid: &HyperGrid) -> Vec<HyperParams> {
    grid.expand()
        .into_iter()
        .filter(|p| {
            kind != ModelKind::Transformer || {
                let e = param(p, "embed_dim", 32.0) as usize;
                let h = param(p, "num_heads", 1.0) as usize;
                h > 0 && e % h == 0
            }
        })
        .collect()
}

fn param(p: &HyperParams, key: &str, default: f64) -> f64 {
    p.get(key).copied().unwrap_or(default)
}

fn uparam(p: &HyperParams, key: &str, default: usize) -> Result<usize> {
    let v = param(p, key, default as f64);
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::Config(format!("{key} must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Records with their labels and, when PSSM features are in use, one feature
/// row per record.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub ids: Vec<String>,
    pub residues: Vec<String>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub features: Option<(Scheme, Vec<Vec<f64>>)>,
}

impl Corpus {
    pub fn from_dataset(ds: &LabeledDataset) -> Self {
        Corpus {
            ids: ds.records.iter().map(|r| r.id.clone()).collect(),
            residues: ds.records.iter().map(|r| r.residues.clone()).collect(),
            labels: ds.label_indices(),
            class_names: ds.class_names.clone(),
            features: None,
        }
    }

    /// Encodes one PSSM per record (same order as the records).
    pub fn with_pssm_features(mut self, pssms: &[RawPssm], scheme: Scheme) -> Result<Self> {
        if pssms.len() != self.ids.len() {
            return Err(Error::Config(format!("{} PSSMs for {} records", pssms.len(), self.ids.len())));
        }
        let rows = crate::par_map(pssms.iter().collect(), |m| encode(&gpssm_from_raw(m), scheme).map(|f| f.values));
        let rows = rows.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
        self.features = Some((scheme, rows));
        Ok(self)
    }

    pub fn with_features(mut self, scheme: Scheme, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != self.ids.len() {
            return Err(Error::Config(format!("{} feature rows for {} records", rows.len(), self.ids.len())));
        }
        self.features = Some((scheme, rows));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn feature_rows(&self, scheme: Scheme, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        match &self.features {
            Some((s, rows)) if *s == scheme => Ok(idx.iter().map(|&i| rows[i].clone()).collect()),
            _ => Err(Error::Config(format!("corpus has no {scheme} features"))),
        }
    }

    /// Longest n-gram sentence over every record. Padding to the corpus-wide
    /// length means held-out sequences never overflow.
    fn max_tokens(&self, n: usize) -> usize {
        self.residues.iter().map(|r| (r.len() + 1).saturating_sub(n)).max().unwrap_or(0)
    }
}

/// A fitted model together with what it needs to score new records.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub representation: Representation,
    pub class_names: Vec<String>,
    pub params: HyperParams,
    pub vocab: Option<Vocabulary>,
    pub model: SavedModel,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    kind: ModelKind,
    representation: Representation,
    class_names: Vec<String>,
    params: HyperParams,
    vocab: Option<Vocabulary>,
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = Meta {
            kind: self.kind,
            representation: self.representation,
            class_names: self.class_names.clone(),
            params: self.params.clone(),
            vocab: self.vocab.clone(),
        };
        Ok(Checkpoint { meta: serde_json::to_value(meta)?, model: self.model.clone() })
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        let meta: Meta = serde_json::from_value(c.meta)?;
        Ok(TrainedModel {
            kind: meta.kind,
            representation: meta.representation,
            class_names: meta.class_names,
            params: meta.params,
            vocab: meta.vocab,
            model: c.model,
        })
    }

    /// Class probabilities for residue strings (n-gram models) or feature
    /// rows (PSSM models).
    pub fn predict_proba(&self, residues: &[String], features: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        let inputs = match (self.representation, &self.vocab) {
            (Representation::Ngrams(_), Some(vocab)) => Inputs::Tokens(token_ids(residues.iter(), vocab)?),
            (Representation::Pssm(scheme), _) => {
                let rows = features.ok_or_else(|| Error::Config(format!("model needs {scheme} features")))?;
                Inputs::Features(rows.to_vec())
            }
            (Representation::Ngrams(_), None) => return Err(Error::Config("n-gram model without a vocabulary".into())),
        };
        predict_inputs(&self.model, &inputs)
    }
}

fn token_ids<'a>(residues: impl Iterator<Item = &'a String>, vocab: &Vocabulary) -> Result<Vec<Vec<usize>>> {
    residues
        .map(|r| Ok(encode_pad(&tokenize(r, vocab.n)?, vocab, vocab.max_len)?.ids))
        .collect()
}

fn predict_inputs(model: &SavedModel, x: &Inputs) -> Result<Vec<Vec<f64>>> {
    match (model, x) {
        (SavedModel::Neural(m), _) => Ok(m.predict_proba(x)?),
        (SavedModel::Forest(f), Inputs::Features(rows)) => Ok(f.predict_proba(rows)?),
        (SavedModel::RusBoost(b), Inputs::Features(rows)) => Ok(b.predict_proba(rows)?),
        _ => Err(Error::Config("tree ensembles need PSSM feature inputs".into())),
    }
}

fn neural_spec(kind: ModelKind, p: &HyperParams, input: InputKind, n_classes: usize) -> Result<ModelSpec> {
    let embed_dim = uparam(p, "embed_dim", 32)?;
    let arch = match kind {
        ModelKind::Mlp => {
            let h = uparam(p, "hidden", 100)?;
            Arch::Mlp { hidden: if h == 0 { vec![] } else { vec![h] } }
        }
        ModelKind::Cnn => Arch::Cnn { num_filters: uparam(p, "num_filters", 64)?, kernel_size: uparam(p, "kernel_size", 3)? },
        ModelKind::Transformer => Arch::Transformer { num_heads: uparam(p, "num_heads", 1)?, ff_dim: 2 * embed_dim },
        _ => unreachable!("tree models have no network spec"),
    };
    let spec = ModelSpec { arch, input, embed_dim, n_classes };
    spec.validate()?;
    Ok(spec)
}

/// Trains `kind` on the records `train` and returns the fitted model.
pub fn fit(
    corpus: &Corpus,
    kind: ModelKind,
    representation: Representation,
    p: &HyperParams,
    train: &[usize],
    seed: u64,
) -> Result<TrainedModel> {
    if train.is_empty() {
        return Err(Error::Config("empty training split".into()));
    }
    let n_classes = corpus.class_names.len();
    let y: Vec<usize> = train.iter().map(|&i| corpus.labels[i]).collect();
    let (inputs, vocab) = match representation {
        Representation::Pssm(scheme) => (Inputs::Features(corpus.feature_rows(scheme, train)?), None),
        Representation::Ngrams(n) => {
            if !kind.is_neural() {
                return Err(Error::Config(format!("{kind} needs PSSM features, not n-grams")));
            }
            let sentences = train.iter().map(|&i| tokenize(&corpus.residues[i], n)).collect::<std::result::Result<Vec<_>, _>>()?;
            let mut vocab = build_vocab(n, &sentences)?;
            vocab.max_len = corpus.max_tokens(n);
            let ids = token_ids(train.iter().map(|&i| &corpus.residues[i]), &vocab)?;
            (Inputs::Tokens(ids), Some(vocab))
        }
    };
    let model = match kind {
        ModelKind::Rf => {
            let Inputs::Features(x) = &inputs else { unreachable!() };
            let cfg = ForestConfig {
                n_estimators: uparam(p, "n_estimators", 100)?,
                max_depth: uparam(p, "max_depth", 10)?,
                features_per_split: p.get("features_per_split").map(|v| *v as usize),
                seed,
                bootstrap: true,
            };
            SavedModel::Forest(fit_forest(x, &y, n_classes, &cfg)?)
        }
        ModelKind::RusBoost => {
            let Inputs::Features(x) = &inputs else { unreachable!() };
            let cfg = RusBoostConfig {
                n_estimators: uparam(p, "n_estimators", 50)?,
                learning_rate: param(p, "learning_rate", 0.1),
                max_depth: uparam(p, "max_depth", 1)?,
                seed,
            };
            SavedModel::RusBoost(fit_rusboost(x, &y, n_classes, &cfg)?)
        }
        _ => {
            let input = match (&inputs, &vocab) {
                (Inputs::Tokens(_), Some(v)) => InputKind::Tokens { vocab_size: v.size(), max_len: v.max_len },
                _ => InputKind::Features { dim: representation_dim(representation) },
            };
            let spec = neural_spec(kind, p, input, n_classes)?;
            let cfg = TrainConfig {
                learning_rate: param(p, "learning_rate", 1e-3),
                batch_size: uparam(p, "batch_size", 128)?,
                epochs: uparam(p, "epochs", 300)?,
                seed,
                optimizer: Optimizer::adam(),
                l2: param(p, "alpha", 0.0),
            };
            SavedModel::Neural(nn::train(&spec, &inputs, &y, &cfg)?)
        }
    };
    Ok(TrainedModel { kind, representation, class_names: corpus.class_names.clone(), params: p.clone(), vocab, model })
}

fn representation_dim(r: Representation) -> usize {
    match r {
        Representation::Pssm(s) => s.dim(),
        Representation::Ngrams(_) => 0,
    }
}

/// Trains on `train` and scores `test`.
pub fn fit_predict(
    corpus: &Corpus,
    kind: ModelKind,
    representation: Representation,
    p: &HyperParams,
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let m = fit(corpus, kind, representation, p, train, seed)?;
    let residues: Vec<String> = test.iter().map(|&i| corpus.residues[i].clone()).collect();
    let features = match representation {
        Representation::Pssm(s) => Some(corpus.feature_rows(s, test)?),
        Representation::Ngrams(_) => None,
    };
    m.predict_proba(&residues, features.as_deref())
}

/// Nested cross-validation of one model family over `grid`.
pub fn run_nested_cv(
    corpus: &Corpus,
    kind: ModelKind,
    representation: Representation,
    grid: &[HyperParams],
    plan: &CvPlan,
) -> Result<NestedCvOutcome<HyperParams>> {
    nested_cv(&corpus.labels, &corpus.class_names, grid, plan, |p, task| {
        fit_predict(corpus, kind, representation, p, task.train, task.test, task.seed)
    })
}
