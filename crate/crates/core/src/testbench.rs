//! Synthetic labeled corpora: uniform random residues with one class motif
//! implanted per record, so any competent model has a known signal to find.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pssm::{synth_pssm, RawPssm};
use crate::seqio::{residue_index, HostCoarse, LabeledDataset, Level, ProteinRecord, Taxonomy, AMINO_ACIDS};
use crate::{derive_seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    pub motif: String,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    pub min_len: usize,
    pub max_len: usize,
    pub n_records: usize,
    pub seed: u64,
}

/// Motifs for the coarse hosts. Each is built from a different pair of
/// residue groups so both raw residues and grouped profiles carry it.
pub const COARSE_MOTIFS: [(&str, &str); 3] = [("human", "WWWHHH"), ("avian", "CCCGGG"), ("swine", "KKKPPP")];

/// Avian sub-hosts used by [`SynthSpec::fine`].
const FINE_AVIAN: [&str; 24] = [
    "chicken", "duck", "mallard", "goose", "turkey", "quail", "pheasant", "gull", "tern", "swan",
    "teal", "pintail", "wigeon", "shoveler", "shorebird", "guineafowl", "peafowl", "ostrich",
    "pigeon", "partridge", "egret", "heron", "crane", "grebe",
];

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl SynthSpec {
    /// Three coarse hosts with the given proportions (human, avian, swine).
    pub fn coarse(n_records: usize, proportions: [f64; 3], seed: u64) -> Self {
        let classes = COARSE_MOTIFS
            .iter()
            .zip(proportions)
            .map(|(&(name, motif), p)| SynthClass { name: name.into(), motif: motif.into(), proportion: p })
            .collect();
        SynthSpec { classes, min_len: 30, max_len: 50, n_records, seed }
    }

    /// The first `k` classes of the coarse spec, in equal shares (k ≤ 3).
    pub fn balanced(n_records: usize, k: usize, seed: u64) -> Result<Self> {
        if !(2..=3).contains(&k) {
            return Err(config(format!("built-in motif corpora have 2 or 3 classes, got {k}")));
        }
        let mut spec = Self::coarse(n_records, [0.0; 3], seed);
        spec.classes.truncate(k);
        spec.classes.iter_mut().for_each(|c| c.proportion = 1.0 / k as f64);
        Ok(spec)
    }

    /// 26 fine-level hosts: 24 avian sub-hosts plus human and swine, each
    /// with a distinct 5-residue motif.
    pub fn fine(n_records: usize, seed: u64) -> Self {
        let names = FINE_AVIAN.iter().copied().chain(["human", "swine"]);
        let classes = names
            .enumerate()
            .map(|(i, name)| {
                let a = AMINO_ACIDS[i % 20] as char;
                let b = AMINO_ACIDS[(i / 20 + 3 * i + 7) % 20] as char;
                let b = if a == b { AMINO_ACIDS[(i + 1) % 20] as char } else { b };
                SynthClass { name: name.into(), motif: format!("{a}{a}{b}{b}{a}"), proportion: 1.0 / 26.0 }
            })
            .collect();
        SynthSpec { classes, min_len: 30, max_len: 50, n_records, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(config("need at least 2 classes"));
        }
        if self.n_records == 0 {
            return Err(config("n_records must be >= 1"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(config(format!("bad length range {}..={}", self.min_len, self.max_len)));
        }
        let total: f64 = self.classes.iter().map(|c| c.proportion).sum();
        if (total - 1.0).abs() > 1e-9 || self.classes.iter().any(|c| !(c.proportion >= 0.0)) {
            return Err(config(format!("class proportions must be non-negative and sum to 1, got {total}")));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if c.motif.is_empty() || c.motif.bytes().any(|b| residue_index(b).is_none()) {
                return Err(config(format!("class {}: motif must be canonical residues", c.name)));
            }
            if c.motif.len() > self.min_len {
                return Err(config(format!(
                    "class {}: motif of length {} does not fit min length {}",
                    c.name,
                    c.motif.len(),
                    self.min_len
                )));
            }
            for other in &self.classes[..i] {
                if other.name.eq_ignore_ascii_case(&c.name) {
                    return Err(config(format!("duplicate class name {}", c.name)));
                }
                if other.motif.contains(&c.motif) || c.motif.contains(&other.motif) {
                    return Err(config(format!("motifs of {} and {} overlap", other.name, c.name)));
                }
            }
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n_records` over the classes.
    pub fn class_counts(&self) -> Vec<usize> {
        let n = self.n_records;
        let exact: Vec<f64> = self.classes.iter().map(|c| c.proportion * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let short = n.saturating_sub(counts.iter().sum());
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        counts
    }

    fn level(&self) -> Level {
        let coarse = |n: &str| HostCoarse::ALL.iter().any(|h| h.name().eq_ignore_ascii_case(n));
        if self.classes.iter().all(|c| coarse(&c.name)) {
            Level::Coarse
        } else {
            Level::Fine
        }
    }
}

fn occurrences(hay: &str, needle: &str) -> usize {
    (0..=hay.len().saturating_sub(needle.len())).filter(|&i| hay[i..].starts_with(needle)).count()
}

fn draw_sequence(spec: &SynthSpec, class: usize, rng: &mut ChaCha8Rng) -> String {
    let motif = &spec.classes[class].motif;
    loop {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let at = rng.gen_range(0..=len - motif.len());
        let mut s: Vec<u8> = (0..len).map(|_| AMINO_ACIDS[rng.gen_range(0..20)]).collect();
        s[at..at + motif.len()].copy_from_slice(motif.as_bytes());
        let s = String::from_utf8(s).expect("ascii residues");
        let clean = spec
            .classes
            .iter()
            .enumerate()
            .all(|(k, c)| occurrences(&s, &c.motif) == usize::from(k == class));
        if clean {
            return s;
        }
    }
}

/// Deterministic corpus for `spec`. Records carry the class name as their
/// host; class order in the output is shuffled.
pub fn generate(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let taxonomy = Taxonomy::default();
    let mut assignment: Vec<usize> =
        spec.class_counts().iter().enumerate().flat_map(|(c, &n)| std::iter::repeat(c).take(n)).collect();
    assignment.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[0])));

    let level = spec.level();
    let records: Vec<ProteinRecord> = crate::par_map(assignment.into_iter().enumerate().collect(), |(i, class)| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[1, i as u64]));
        let name = &spec.classes[class].name;
        let mut r = ProteinRecord::new(format!("synth{i:05}"), draw_sequence(spec, class, &mut rng)).with_host(name);
        r.coarse_label = taxonomy.coarse_of(name);
        r.fine_label = Some(taxonomy.fine_name(name).unwrap_or_else(|| name.to_ascii_lowercase()));
        r
    });

    let mut class_names: Vec<String> =
        records.iter().filter_map(|r| r.label(level).map(str::to_string)).collect();
    class_names.sort();
    class_names.dedup();
    if records.iter().any(|r| r.label(level).is_none()) {
        return Err(config("class names must be known hosts for a coarse-level corpus"));
    }
    Ok(LabeledDataset { records, level, class_names })
}

/// Synthetic PSI-BLAST-style profile for every record of `ds`.
pub fn synth_pssms(ds: &LabeledDataset, seed: u64) -> Vec<RawPssm> {
    crate::par_map(ds.records.iter().collect(), |r| synth_pssm(r, seed))
}
