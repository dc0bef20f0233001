//! Overlapping n-gram tokenization, training-set vocabularies and left-padded
//! id sequences.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<oov>";
pub const MAX_N: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum NgramError {
    #[error("n must be in 1..={MAX_N}, got {0}")]
    BadN(usize),
    #[error("sequence of length {len} is shorter than n = {n}")]
    TooShort { len: usize, n: usize },
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("{count} tokens exceed max_len {max_len}")]
    Overflow { count: usize, max_len: usize },
    #[error("max_len must be at least 1")]
    ZeroMaxLen,
}

/// Overlapping windows of `n` residues, in order.
pub fn tokenize(residues: &str, n: usize) -> Result<Vec<String>, NgramError> {
    if n == 0 {
        return Err(NgramError::BadN(n));
    }
    if n > residues.len() {
        return Err(NgramError::TooShort { len: residues.len(), n });
    }
    Ok(residues
        .as_bytes()
        .windows(n)
        .map(|w| String::from_utf8_lossy(w).into_owned())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    pub n: usize,
    pub max_len: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    n: usize,
    max_len: usize,
    tokens: Vec<String>,
}

impl TryFrom<VocabFile> for Vocabulary {
    type Error = String;
    fn try_from(f: VocabFile) -> Result<Self, Self::Error> {
        if f.tokens.len() < 2 || f.tokens[PAD] != PAD_TOKEN || f.tokens[OOV] != OOV_TOKEN {
            return Err("vocabulary must start with <pad>, <oov>".into());
        }
        let index: HashMap<String, usize> =
            f.tokens.iter().enumerate().skip(2).map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != f.tokens.len() - 2 {
            return Err("vocabulary tokens are not unique".into());
        }
        Ok(Vocabulary { n: f.n, max_len: f.max_len, tokens: f.tokens, index })
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile { n: v.n, max_len: v.max_len, tokens: v.tokens }
    }
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Tokens in id order, including the two reserved entries.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Assigns ids from 2 upward in first-appearance order. `max_len` is the
/// longest token list in the corpus.
pub fn build_vocab(n: usize, corpus: &[Vec<String>]) -> Result<Vocabulary, NgramError> {
    if n == 0 || n > MAX_N {
        return Err(NgramError::BadN(n));
    }
    if corpus.is_empty() || corpus.iter().all(Vec::is_empty) {
        return Err(NgramError::EmptyCorpus);
    }
    let mut tokens = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
    let mut index = HashMap::new();
    for tok in corpus.iter().flatten() {
        if !index.contains_key(tok) {
            index.insert(tok.clone(), tokens.len());
            tokens.push(tok.clone());
        }
    }
    let max_len = corpus.iter().map(Vec::len).max().unwrap_or(0);
    Ok(Vocabulary { n, max_len, tokens, index })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub true_len: usize,
}

/// Maps tokens to ids and prepends PAD up to `max_len`.
pub fn encode_pad(
    tokens: &[String],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<TokenSequence, NgramError> {
    if max_len == 0 {
        return Err(NgramError::ZeroMaxLen);
    }
    if tokens.len() > max_len {
        return Err(NgramError::Overflow { count: tokens.len(), max_len });
    }
    let mut ids = vec![PAD; max_len - tokens.len()];
    ids.extend(tokens.iter().map(|t| vocab.id(t)));
    Ok(TokenSequence { ids, true_len: tokens.len() })
}

/// Inverse of [`encode_pad`]: drops the padding and maps ids back to tokens.
pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.ids[seq.ids.len() - seq.true_len..]
        .iter()
        .map(|&id| vocab.token(id).unwrap_or(OOV_TOKEN).to_string())
        .collect()
}

/// Tokenizes and encodes a sequence against a vocabulary in one step, using
/// the vocabulary's own `max_len`.
pub fn encode_residues(residues: &str, vocab: &Vocabulary) -> Result<TokenSequence, NgramError> {
    encode_pad(&tokenize(residues, vocab.n)?, vocab, vocab.max_len)
}

/// Per-class token counts, sorted by descending count then token.
pub fn token_frequencies<'a>(
    sequences: impl IntoIterator<Item = (&'a str, &'a str)>,
    n: usize,
) -> Result<BTreeMap<String, Vec<(String, usize)>>, NgramError> {
    let mut counts: BTreeMap<String, HashMap<String, usize>> = BTreeMap::new();
    for (label, residues) in sequences {
        let per = counts.entry(label.to_string()).or_default();
        for t in tokenize(residues, n)? {
            *per.entry(t).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(label, m)| {
            let mut v: Vec<(String, usize)> = m.into_iter().collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            (label, v)
        })
        .collect())
}
