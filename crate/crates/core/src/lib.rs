//! Influenza A host prediction from hemagglutinin protein sequences.
//!
//! Sequences are read and labeled ([`seqio`]), turned into fixed-length PSSM
//! features ([`pssm`]) or n-gram token sequences ([`ngram`]), classified by
//! tree ensembles ([`ensemble`]) or small neural networks ([`nn`]), and scored
//! under stratified nested cross-validation ([`eval`]). [`testbench`] makes
//! synthetic corpora with a known signal; [`pipeline`] ties it together.

pub mod ensemble;
pub mod eval;
pub mod io;
pub mod ngram;
pub mod nn;
pub mod pipeline;
pub mod pssm;
pub mod seqio;
pub mod testbench;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Seq(#[from] seqio::SeqError),
    #[error(transparent)]
    Pssm(#[from] pssm::PssmError),
    #[error(transparent)]
    Ngram(#[from] ngram::NgramError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Tree(#[from] ensemble::TreeError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", fold_context(*.outer, *.inner))]
    Fold { outer: usize, inner: Option<usize>, source: Box<Error> },
}

fn fold_context(outer: usize, inner: Option<usize>) -> String {
    match inner {
        Some(i) => format!("outer fold {outer}, inner fold {i}"),
        None => format!("outer fold {outer}"),
    }
}

impl Error {
    /// True when the root cause is non-finite training loss.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Nn(nn::NnError::Diverged { .. }) => true,
            Error::Fold { source, .. } => source.is_divergence(),
            _ => false,
        }
    }

    /// Innermost error, with fold context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fold { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Mixes a base seed with a path of indices (fold, grid point, tree, ...)
/// into an independent seed, so parallel work units never share a stream.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p.wrapping_add(1))))
}

/// Order-preserving map, parallel when the `parallel` feature is on.
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_path() {
        let a = derive_seed(7, &[1, 2]);
        assert_eq!(a, derive_seed(7, &[1, 2]));
        assert_ne!(a, derive_seed(7, &[2, 1]));
        assert_ne!(a, derive_seed(8, &[1, 2]));
        assert_ne!(derive_seed(7, &[]), derive_seed(7, &[0]));
    }

    #[test]
    fn par_map_keeps_order() {
        assert_eq!(par_map((0..100).collect(), |i: i32| i * 2), (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn fold_error_context() {
        let e = Error::Fold { outer: 1, inner: None, source: Box::new(nn::NnError::Diverged { epoch: 4 }.into()) };
        assert!(e.is_divergence());
        assert!(e.to_string().starts_with("outer fold 1: training diverged at epoch 4"));
    }
}
