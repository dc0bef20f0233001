//! Small neural-network kernel: a reverse-mode tape over f64 tensors and the
//! three classifiers built on it (MLP, 1-D CNN, single-block Transformer
//! encoder).

mod graph;
mod model;
mod tensor;
mod train;

pub use graph::{Grads, Graph, MhaParams, Var};
pub use model::{Arch, Inputs, InputKind, ModelSpec, Params};
pub use tensor::{softmax_rows, Tensor};
pub use train::{predict_proba, train, FittedModel, Optimizer, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },
    #[error("sequence length {len} is shorter than the required {need}")]
    TooShort { len: usize, need: usize },
    #[error("embed_dim {dim} is not divisible by num_heads {heads}")]
    HeadDivisibility { dim: usize, heads: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },
}
