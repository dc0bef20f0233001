//! wasm-bindgen exports behind `www/index.html`. Every function returns a
//! JSON string so the page needs nothing beyond `JSON.parse`.

use hostpred::eval::{average_precision, pr_curve, PrPoint};
use hostpred::ngram::{build_vocab, encode_pad, tokenize};
use hostpred::pssm::{encode, gpssm_from_raw, parse_psiblast_pssm, synth_pssm, RawPssm, Scheme};
use hostpred::seqio::{validate_record, ProteinRecord};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Encoded {
    scheme: Scheme,
    length: usize,
    /// Column-grouped profile, one row per position (ten groups).
    gpssm: Vec<[f64; 10]>,
    values: Vec<f64>,
}

fn encode_matrix(m: &RawPssm, scheme: &str) -> Result<String, String> {
    let scheme: Scheme = scheme.parse().map_err(|e| format!("{e}"))?;
    let g = gpssm_from_raw(m);
    let f = encode(&g, scheme).map_err(|e| e.to_string())?;
    let out = Encoded { scheme, length: g.len(), gpssm: g.values.clone(), values: f.values };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Encodes a protein sequence through a synthetic BLOSUM-derived profile.
pub fn encode_sequence_json(residues: &str, scheme: &str, seed: u64) -> Result<String, String> {
    let r = ProteinRecord::new("query", residues.trim());
    let v = validate_record(&r);
    if !v.is_accept() {
        return Err(v.to_string());
    }
    encode_matrix(&synth_pssm(&r, seed), scheme)
}

/// Encodes pasted PSI-BLAST ASCII output.
pub fn encode_pssm_json(text: &str, scheme: &str) -> Result<String, String> {
    let m = parse_psiblast_pssm(text).map_err(|e| e.to_string())?;
    encode_matrix(&m, scheme)
}

#[derive(Serialize)]
struct Tokens {
    tokens: Vec<String>,
    ids: Vec<usize>,
    vocab_size: usize,
}

/// Overlapping n-grams of one sequence, with ids from a vocabulary built on
/// that sequence alone.
pub fn tokenize_json(residues: &str, n: usize) -> Result<String, String> {
    let residues = residues.trim().to_ascii_uppercase();
    let tokens = tokenize(&residues, n).map_err(|e| e.to_string())?;
    let vocab = build_vocab(n, std::slice::from_ref(&tokens)).map_err(|e| e.to_string())?;
    let seq = encode_pad(&tokens, &vocab, tokens.len()).map_err(|e| e.to_string())?;
    serde_json::to_string(&Tokens { ids: seq.ids, vocab_size: vocab.size(), tokens }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    points: Vec<PrPoint>,
    average_precision: f64,
    prevalence: f64,
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

/// Precision-recall curve from comma or space separated scores and 0/1
/// labels.
pub fn pr_curve_json(scores: &str, labels: &str) -> Result<String, String> {
    let s = numbers(scores)?;
    let positive = numbers(labels)?
        .into_iter()
        .map(|v| match v {
            v if v == 1.0 => Ok(true),
            v if v == 0.0 => Ok(false),
            v => Err(format!("label {v} is not 0 or 1")),
        })
        .collect::<Result<Vec<bool>, String>>()?;
    let curve = pr_curve(&s, &positive).map_err(|e| e.to_string())?;
    let out = Curve { average_precision: average_precision(&curve), prevalence: curve.prevalence(), points: curve.points };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = encodeSequence)]
pub fn encode_sequence(residues: &str, scheme: &str, seed: u32) -> Result<String, JsError> {
    encode_sequence_json(residues, scheme, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = encodePssm)]
pub fn encode_pssm(text: &str, scheme: &str) -> Result<String, JsError> {
    encode_pssm_json(text, scheme).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tokenizeSequence)]
pub fn tokenize_sequence(residues: &str, n: usize) -> Result<String, JsError> {
    tokenize_json(residues, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = prCurve)]
pub fn pr_curve_demo(scores: &str, labels: &str) -> Result<String, JsError> {
    pr_curve_json(scores, labels).map_err(|e| JsError::new(&e))
}
