//! PSI-BLAST PSSM parsing, sigmoid normalization, residue grouping, and the
//! three fixed-length encoders built on the grouped matrix (EG, GDPC, ER).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqio::{residue_index, ProteinRecord, AMINO_ACIDS};

#[derive(Debug, Error, PartialEq)]
pub enum PssmError {
    #[error("PSSM text contains no position rows")]
    Empty,
    #[error("line {line}: expected 42 data fields after index and residue, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: residue '{letter}' is outside the 20-letter alphabet")]
    BadResidue { line: usize, letter: String },
    #[error("line {line}: cannot parse '{token}' as an integer score")]
    BadScore { line: usize, token: String },
    #[error("line {line}: position index {found} out of sequence (expected {expected})")]
    BadIndex { line: usize, expected: usize, found: usize },
    #[error("{scheme} encoding needs a sequence of length >= {min}, got {len}")]
    TooShort { scheme: Scheme, len: usize, min: usize },
    #[error("PSSM shape mismatch: {rows} score rows for {residues} residues")]
    Shape { rows: usize, residues: usize },
}

/// Residue groups G1..G10, listed as letters.
pub const GROUPS: [&str; 10] = ["FYW", "ML", "IV", "ATS", "NH", "QED", "RK", "C", "G", "P"];

/// Group index (0-based) of a canonical residue letter.
pub fn group_of(letter: u8) -> Option<usize> {
    GROUPS.iter().position(|g| g.as_bytes().contains(&letter))
}

/// For each PSI-BLAST column, the index of the group its residue belongs to.
fn column_groups() -> [usize; 20] {
    let mut out = [0; 20];
    for (c, &a) in AMINO_ACIDS.iter().enumerate() {
        out[c] = group_of(a).expect("groups partition the alphabet");
    }
    out
}

/// L×20 integer log-odds scores, columns in PSI-BLAST order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPssm {
    pub residues: String,
    pub scores: Vec<[i32; 20]>,
}

impl RawPssm {
    pub fn new(residues: impl Into<String>, scores: Vec<[i32; 20]>) -> Result<Self, PssmError> {
        let residues = residues.into();
        if residues.len() != scores.len() {
            return Err(PssmError::Shape { rows: scores.len(), residues: residues.len() });
        }
        Ok(RawPssm { residues, scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// L×20 values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPssm {
    pub residues: String,
    pub values: Vec<[f64; 20]>,
}

/// L×10 grouped matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Gpssm {
    pub residues: String,
    pub values: Vec<[f64; 10]>,
}

impl Gpssm {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn group_table(&self) -> &'static [&'static str; 10] {
        &GROUPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Eg,
    Gdpc,
    Er,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Eg, Scheme::Gdpc, Scheme::Er];

    pub fn dim(self) -> usize {
        match self {
            Scheme::Eg | Scheme::Gdpc => 100,
            Scheme::Er => 910,
        }
    }

    pub fn min_len(self) -> usize {
        match self {
            Scheme::Eg => 1,
            Scheme::Gdpc => 2,
            Scheme::Er => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Eg => "eg",
            Scheme::Gdpc => "gdpc",
            Scheme::Er => "er",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Scheme::Eg => 1,
            Scheme::Gdpc => 2,
            Scheme::Er => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.code() == code)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eg" => Ok(Scheme::Eg),
            "gdpc" => Ok(Scheme::Gdpc),
            "er" => Ok(Scheme::Er),
            other => Err(format!("unknown scheme '{other}' (expected eg|gdpc|er)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub scheme: Scheme,
    pub values: Vec<f64>,
}

/// Parses PSI-BLAST `-out_ascii_pssm` output. Position rows are recognized by
/// a leading integer index followed by a residue letter; everything else
/// (banner, column header, footer statistics) is skipped.
pub fn parse_psiblast_pssm(text: &str) -> Result<RawPssm, PssmError> {
    let mut residues = String::new();
    let mut scores = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 2 || tokens[0].parse::<usize>().is_err() {
            continue;
        }
        let letter = tokens[1];
        if !(letter.len() == 1 && letter.as_bytes()[0].is_ascii_alphabetic()) {
            continue;
        }
        let data = &tokens[2..];
        if data.len() != 42 {
            return Err(PssmError::FieldCount { line: line_no, found: data.len() });
        }
        let index: usize = tokens[0].parse().expect("checked above");
        if index != scores.len() + 1 {
            return Err(PssmError::BadIndex { line: line_no, expected: scores.len() + 1, found: index });
        }
        let aa = letter.as_bytes()[0].to_ascii_uppercase();
        if residue_index(aa).is_none() {
            return Err(PssmError::BadResidue { line: line_no, letter: letter.to_string() });
        }
        let mut row = [0i32; 20];
        for (slot, tok) in row.iter_mut().zip(data) {
            *slot = tok
                .parse()
                .map_err(|_| PssmError::BadScore { line: line_no, token: (*tok).to_string() })?;
        }
        residues.push(aa as char);
        scores.push(row);
    }
    if scores.is_empty() {
        return Err(PssmError::Empty);
    }
    Ok(RawPssm { residues, scores })
}

/// Renders a matrix in the PSI-BLAST ASCII layout. The percentage block is
/// filled with 100 on the query residue's column; the two trailing reals are
/// zero.
pub fn write_psiblast_pssm(m: &RawPssm) -> String {
    let mut out = String::from(
        "\nLast position-specific scoring matrix computed, weighted observed percentages rounded down, information per position, and relative weight of gapless real matches to pseudocounts\n",
    );
    out.push_str("         ");
    for _ in 0..2 {
        for &a in &AMINO_ACIDS {
            out.push_str(&format!("   {}", a as char));
        }
    }
    out.push('\n');
    for (i, (row, aa)) in m.scores.iter().zip(m.residues.bytes()).enumerate() {
        out.push_str(&format!("{:>5} {} ", i + 1, aa as char));
        for s in row {
            out.push_str(&format!("{s:>4}"));
        }
        let own = residue_index(aa);
        for c in 0..20 {
            let pct = if Some(c) == own { 100 } else { 0 };
            out.push_str(&format!("{pct:>4}"));
        }
        out.push_str("  0.00 0.00\n");
    }
    out.push_str("\n                      K         Lambda\nStandard Ungapped    0.1346     0.3160\nPSI Ungapped         0.1346     0.3160\n");
    out
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid_normalize(m: &RawPssm) -> NormalizedPssm {
    let values = m
        .scores
        .iter()
        .map(|row| {
            let mut out = [0.0; 20];
            for (o, &s) in out.iter_mut().zip(row) {
                *o = sigmoid(f64::from(s));
            }
            out
        })
        .collect();
    NormalizedPssm { residues: m.residues.clone(), values }
}

/// Averages the 20 columns within each residue group.
pub fn group_columns(m: &NormalizedPssm) -> Gpssm {
    let col_group = column_groups();
    let sizes: Vec<f64> = GROUPS.iter().map(|g| g.len() as f64).collect();
    let values = m
        .values
        .iter()
        .map(|row| {
            let mut sums = [0.0; 10];
            for (c, &v) in row.iter().enumerate() {
                sums[col_group[c]] += v;
            }
            for (s, n) in sums.iter_mut().zip(&sizes) {
                *s /= n;
            }
            sums
        })
        .collect();
    Gpssm { residues: m.residues.clone(), values }
}

/// Raw scores straight to the grouped matrix.
pub fn gpssm_from_raw(m: &RawPssm) -> Gpssm {
    group_columns(&sigmoid_normalize(m))
}

/// Row-group means: entry (i, j) averages column j over the positions whose
/// residue belongs to group i. Groups absent from the sequence give zero rows.
pub fn encode_eg(g: &Gpssm) -> Result<FeatureVector, PssmError> {
    check_len(g, Scheme::Eg)?;
    let mut sums = [[0.0f64; 10]; 10];
    let mut counts = [0usize; 10];
    for (row, aa) in g.values.iter().zip(g.residues.bytes()) {
        let gi = group_of(aa.to_ascii_uppercase()).expect("validated residue");
        counts[gi] += 1;
        for (s, v) in sums[gi].iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut values = Vec::with_capacity(100);
    for (row, &n) in sums.iter().zip(&counts) {
        for &s in row {
            values.push(if n == 0 { 0.0 } else { s / n as f64 });
        }
    }
    Ok(FeatureVector { scheme: Scheme::Eg, values })
}

/// Grouped dipeptide composition over adjacent positions.
pub fn encode_gdpc(g: &Gpssm) -> Result<FeatureVector, PssmError> {
    check_len(g, Scheme::Gdpc)?;
    let l = g.len();
    let mut d = [[0.0f64; 10]; 10];
    for pair in g.values.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for i in 0..10 {
            for j in 0..10 {
                d[i][j] += a[i] * b[j];
            }
        }
    }
    let norm = (l - 1) as f64;
    let values = d.iter().flatten().map(|v| v / norm).collect();
    Ok(FeatureVector { scheme: Scheme::Gdpc, values })
}

/// Number of gaps used by the ER encoding.
pub const ER_GAPS: usize = 9;

/// Offset of M[i][j][t] (t in 1..=9) in the ER vector.
pub fn er_index(i: usize, j: usize, t: usize) -> usize {
    (i * 10 + j) * ER_GAPS + (t - 1)
}

/// Gapped squared-difference pseudo-composition followed by per-column
/// variances. Layout: M in (i, j, t) order with t innermost, then T1..T10.
pub fn encode_er(g: &Gpssm) -> Result<FeatureVector, PssmError> {
    check_len(g, Scheme::Er)?;
    let l = g.len();
    let rows = &g.values;
    let mut values = vec![0.0; Scheme::Er.dim()];
    for t in 1..=ER_GAPS {
        let norm = (l - t) as f64;
        for i in 0..10 {
            for j in 0..10 {
                let s: f64 = (0..l - t)
                    .map(|k| {
                        let d = rows[k][i] - rows[k + t][j];
                        d * d / 2.0
                    })
                    .sum();
                values[er_index(i, j, t)] = s / norm;
            }
        }
    }
    for c in 0..10 {
        // Welford, so a constant column gives exactly zero
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, r) in rows.iter().enumerate() {
            let d = r[c] - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (r[c] - mean);
        }
        values[900 + c] = m2 / l as f64;
    }
    Ok(FeatureVector { scheme: Scheme::Er, values })
}

pub fn encode(g: &Gpssm, scheme: Scheme) -> Result<FeatureVector, PssmError> {
    match scheme {
        Scheme::Eg => encode_eg(g),
        Scheme::Gdpc => encode_gdpc(g),
        Scheme::Er => encode_er(g),
    }
}

fn check_len(g: &Gpssm, scheme: Scheme) -> Result<(), PssmError> {
    if g.len() < scheme.min_len() {
        return Err(PssmError::TooShort { scheme, len: g.len(), min: scheme.min_len() });
    }
    Ok(())
}

/// BLOSUM62 in PSI-BLAST column order.
#[rustfmt::skip]
pub const BLOSUM62: [[i32; 20]; 20] = [
    // A   R   N   D   C   Q   E   G   H   I   L   K   M   F   P   S   T   W   Y   V
    [  4, -1, -2, -2,  0, -1, -1,  0, -2, -1, -1, -1, -1, -2, -1,  1,  0, -3, -2,  0], // A
    [ -1,  5,  0, -2, -3,  1,  0, -2,  0, -3, -2,  2, -1, -3, -2, -1, -1, -3, -2, -3], // R
    [ -2,  0,  6,  1, -3,  0,  0,  0,  1, -3, -3,  0, -2, -3, -2,  1,  0, -4, -2, -3], // N
    [ -2, -2,  1,  6, -3,  0,  2, -1, -1, -3, -4, -1, -3, -3, -1,  0, -1, -4, -3, -3], // D
    [  0, -3, -3, -3,  9, -3, -4, -3, -3, -1, -1, -3, -1, -2, -3, -1, -1, -2, -2, -1], // C
    [ -1,  1,  0,  0, -3,  5,  2, -2,  0, -3, -2,  1,  0, -3, -1,  0, -1, -2, -1, -2], // Q
    [ -1,  0,  0,  2, -4,  2,  5, -2,  0, -3, -3,  1, -2, -3, -1,  0, -1, -3, -2, -2], // E
    [  0, -2,  0, -1, -3, -2, -2,  6, -2, -4, -4, -2, -3, -3, -2,  0, -2, -2, -3, -3], // G
    [ -2,  0,  1, -1, -3,  0,  0, -2,  8, -3, -3, -1, -2, -1, -2, -1, -2, -2,  2, -3], // H
    [ -1, -3, -3, -3, -1, -3, -3, -4, -3,  4,  2, -3,  1,  0, -3, -2, -1, -3, -1,  3], // I
    [ -1, -2, -3, -4, -1, -2, -3, -4, -3,  2,  4, -2,  2,  0, -3, -2, -1, -2, -1,  1], // L
    [ -1,  2,  0, -1, -3,  1,  1, -2, -1, -3, -2,  5, -1, -3, -1,  0, -1, -3, -2, -2], // K
    [ -1, -1, -2, -3, -1,  0, -2, -3, -2,  1,  2, -1,  5,  0, -2, -1, -1, -1, -1,  1], // M
    [ -2, -3, -3, -3, -2, -3, -3, -3, -1,  0,  0, -3,  0,  6, -4, -2, -2,  1,  3, -1], // F
    [ -1, -2, -2, -1, -3, -1, -1, -2, -2, -3, -3, -1, -2, -4,  7, -1, -1, -4, -3, -2], // P
    [  1, -1,  1,  0, -1,  0,  0,  0, -1, -2, -2,  0, -1, -2, -1,  4,  1, -3, -2, -2], // S
    [  0, -1,  0, -1, -1, -1, -1, -2, -2, -1, -1, -1, -1, -2, -1,  1,  5, -2, -2,  0], // T
    [ -3, -3, -4, -4, -2, -2, -3, -2, -2, -3, -2, -3, -1,  1, -4, -3, -2, 11,  2, -3], // W
    [ -2, -2, -2, -3, -2, -1, -2, -3,  2, -1, -1, -2, -1,  3, -3, -2, -2,  2,  7, -1], // Y
    [  0, -3, -3, -3, -1, -2, -2, -3, -3,  3,  1, -2,  1, -1, -2, -2,  0, -3, -1,  4], // V
];

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Deterministic stand-in for a PSI-BLAST profile: each row is the BLOSUM62
/// row of the position's residue plus integer noise in [-1, 1], with the
/// residue's own column boosted so it is the strict row maximum.
pub fn synth_pssm(r: &ProteinRecord, seed: u64) -> RawPssm {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(r.residues.as_bytes()) ^ seed.rotate_left(17));
    let scores = r
        .residues
        .bytes()
        .map(|aa| {
            let own = residue_index(aa.to_ascii_uppercase()).expect("validated residue");
            let mut row = [0i32; 20];
            for (c, slot) in row.iter_mut().enumerate() {
                let noise = rng.gen_range(-1..=1);
                *slot = if c == own { BLOSUM62[own][own] + 2 } else { BLOSUM62[own][c] + noise };
            }
            row
        })
        .collect();
    RawPssm { residues: r.residues.clone(), scores }
}
