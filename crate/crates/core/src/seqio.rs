//! Protein sequence ingestion: FASTA parsing, alphabet validation,
//! deduplication with multi-label removal, and host taxonomy relabeling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical amino-acid alphabet in PSI-BLAST column order.
pub const AMINO_ACIDS: [u8; 20] = *b"ARNDCQEGHILKMFPSTWYV";

/// Index of `letter` in [`AMINO_ACIDS`], if it is a canonical residue.
pub fn residue_index(letter: u8) -> Option<usize> {
    AMINO_ACIDS.iter().position(|&a| a == letter)
}

#[derive(Debug, Error, PartialEq)]
pub enum SeqError {
    #[error("line {line}: sequence data before any '>' header")]
    SequenceBeforeHeader { line: usize },
    #[error("record '{id}' has an empty sequence")]
    EmptySequence { id: String },
    #[error("duplicate record id '{id}'")]
    DuplicateId { id: String },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("unknown host label(s): {}", .0.join(", "))]
    UnknownHost(Vec<String>),
    #[error("record '{id}' has no host label")]
    MissingLabel { id: String },
    #[error("fine-level labels requested but record '{id}' has none")]
    MissingFineLabel { id: String },
}

/// Coarse host class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HostCoarse {
    Human,
    Avian,
    Swine,
}

impl HostCoarse {
    pub const ALL: [HostCoarse; 3] = [HostCoarse::Human, HostCoarse::Avian, HostCoarse::Swine];

    pub fn name(self) -> &'static str {
        match self {
            HostCoarse::Human => "human",
            HostCoarse::Avian => "avian",
            HostCoarse::Swine => "swine",
        }
    }
}

impl fmt::Display for HostCoarse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Taxonomic level at which records are labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Coarse,
    Fine,
}

impl std::str::FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "coarse" => Ok(Level::Coarse),
            "fine" => Ok(Level::Fine),
            other => Err(format!("unknown level '{other}' (expected coarse|fine)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub id: String,
    pub residues: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_label: Option<HostCoarse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_label: Option<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ProteinRecord {
    pub fn new(id: impl Into<String>, residues: impl Into<String>) -> Self {
        ProteinRecord {
            id: id.into(),
            residues: residues.into().to_ascii_uppercase(),
            coarse_label: None,
            fine_label: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_host(mut self, host: &str) -> Self {
        self.metadata.insert("host".into(), host.to_string());
        self.fine_label = Some(host.to_ascii_lowercase());
        self
    }

    /// Flag carried in the `incomplete=true` header field.
    pub fn is_incomplete(&self) -> bool {
        self.metadata
            .get("incomplete")
            .is_some_and(|v| matches!(v.to_ascii_lowercase().as_str(), "true" | "yes" | "1"))
    }

    /// Label at the requested level, as stored on the record.
    pub fn label(&self, level: Level) -> Option<&str> {
        match level {
            Level::Coarse => self.coarse_label.map(HostCoarse::name),
            Level::Fine => self.fine_label.as_deref(),
        }
    }
}

/// Maps a FASTA header (without the leading `>`) to an id and metadata table.
pub trait HeaderMapper {
    fn map_header(&self, header: &str) -> Result<(String, BTreeMap<String, String>), String>;
}

/// The `id|key=value|key=value` header grammar.
#[derive(Debug, Clone, Copy, Default)]
pub struct PipeHeaderMapper;

impl HeaderMapper for PipeHeaderMapper {
    fn map_header(&self, header: &str) -> Result<(String, BTreeMap<String, String>), String> {
        let mut fields = header.split('|');
        let id = fields.next().unwrap_or("").trim();
        if id.is_empty() {
            return Err("empty record id".into());
        }
        let mut metadata = BTreeMap::new();
        for field in fields {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| format!("field '{field}' is not key=value"))?;
            metadata.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        Ok((id.to_string(), metadata))
    }
}

/// Parses FASTA text using the default `id|k=v` header grammar.
pub fn parse_fasta(text: &str) -> Result<Vec<ProteinRecord>, SeqError> {
    parse_fasta_with(text, &PipeHeaderMapper)
}

pub fn parse_fasta_with(
    text: &str,
    mapper: &dyn HeaderMapper,
) -> Result<Vec<ProteinRecord>, SeqError> {
    let mut records: Vec<ProteinRecord> = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('>') {
            if let Some(prev) = records.last() {
                if prev.residues.is_empty() {
                    return Err(SeqError::EmptySequence { id: prev.id.clone() });
                }
            }
            let (id, metadata) = mapper
                .map_header(header.trim())
                .map_err(|reason| SeqError::MalformedHeader { line: lineno + 1, reason })?;
            if seen.insert(id.clone(), ()).is_some() {
                return Err(SeqError::DuplicateId { id });
            }
            let fine_label = metadata.get("host").map(|h| h.to_ascii_lowercase());
            records.push(ProteinRecord {
                id,
                residues: String::new(),
                coarse_label: None,
                fine_label,
                metadata,
            });
            continue;
        }
        let chunk: String = line.split_whitespace().collect();
        if chunk.is_empty() {
            continue;
        }
        match records.last_mut() {
            Some(rec) => rec.residues.push_str(&chunk.to_ascii_uppercase()),
            None => return Err(SeqError::SequenceBeforeHeader { line: lineno + 1 }),
        }
    }
    if let Some(last) = records.last() {
        if last.residues.is_empty() {
            return Err(SeqError::EmptySequence { id: last.id.clone() });
        }
    }
    Ok(records)
}

/// Serializes records back to FASTA, 60 residues per line.
pub fn write_fasta(records: &[ProteinRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push('>');
        out.push_str(&r.id);
        for (k, v) in &r.metadata {
            out.push('|');
            out.push_str(k);
            out.push('=');
            out.push_str(v);
        }
        out.push('\n');
        for chunk in r.residues.as_bytes().chunks(60) {
            out.push_str(std::str::from_utf8(chunk).expect("residues are ASCII"));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Accept,
    Reject { letter: char, position: usize },
}

impl Validation {
    pub fn is_accept(&self) -> bool {
        matches!(self, Validation::Accept)
    }
}

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Validation::Accept => f.write_str("accept"),
            Validation::Reject { letter, position } => {
                write!(f, "reject({letter} at position {position})")
            }
        }
    }
}

/// Rejects any record holding a letter outside the 20 canonical residues.
/// Positions are 1-based.
pub fn validate_record(r: &ProteinRecord) -> Validation {
    if r.residues.is_empty() {
        return Validation::Reject { letter: ' ', position: 0 };
    }
    for (i, c) in r.residues.bytes().enumerate() {
        if residue_index(c.to_ascii_uppercase()).is_none() {
            return Validation::Reject { letter: c as char, position: i + 1 };
        }
    }
    Validation::Accept
}

/// Host vocabulary: which fine host names roll up to which coarse class.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    hosts: BTreeMap<String, HostCoarse>,
}

const AVIAN_HOSTS: &[&str] = &[
    "avian", "bird", "chicken", "duck", "mallard", "goose", "turkey", "quail", "pheasant",
    "gull", "tern", "swan", "teal", "pintail", "wigeon", "shoveler", "shorebird", "guineafowl",
    "peafowl", "ostrich", "pigeon", "partridge", "egret", "heron", "crane", "grebe", "sparrow",
    "magpie", "crow", "falcon", "eagle", "owl", "murre", "environment",
];

impl Default for Taxonomy {
    fn default() -> Self {
        let mut hosts = BTreeMap::new();
        hosts.insert("human".to_string(), HostCoarse::Human);
        hosts.insert("swine".to_string(), HostCoarse::Swine);
        hosts.insert("pig".to_string(), HostCoarse::Swine);
        for h in AVIAN_HOSTS {
            hosts.insert((*h).to_string(), HostCoarse::Avian);
        }
        Taxonomy { hosts }
    }
}

impl Taxonomy {
    pub fn add(&mut self, fine: &str, coarse: HostCoarse) {
        self.hosts.insert(fine.to_ascii_lowercase(), coarse);
    }

    pub fn coarse_of(&self, fine: &str) -> Option<HostCoarse> {
        self.hosts.get(&fine.to_ascii_lowercase()).copied()
    }

    /// Fine-level class name: avian sub-hosts stay distinct, every human or
    /// swine host collapses to its coarse name.
    pub fn fine_name(&self, fine: &str) -> Option<String> {
        match self.coarse_of(fine)? {
            HostCoarse::Avian => Some(fine.to_ascii_lowercase()),
            other => Some(other.name().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub records: Vec<ProteinRecord>,
    pub level: Level,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Class index of every record.
    pub fn label_indices(&self) -> Vec<usize> {
        self.records
            .iter()
            .map(|r| {
                let l = r.label(self.level).expect("dataset records are labeled");
                self.class_names
                    .iter()
                    .position(|c| c == l)
                    .expect("labels are members of class_names")
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            level: self.level,
            class_names: self.class_names.clone(),
        }
    }
}

/// Counts emitted by the filtering pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub parsed: usize,
    pub rejected_alphabet: usize,
    pub dropped_duplicate: usize,
    pub dropped_multilabel: usize,
    pub kept: usize,
}

fn assign_labels(r: &mut ProteinRecord, taxonomy: &Taxonomy) -> Result<(), String> {
    let host = match r.fine_label.clone() {
        Some(h) => h,
        None => return Ok(()),
    };
    let coarse = taxonomy.coarse_of(&host).ok_or(host.clone())?;
    r.coarse_label = Some(coarse);
    r.fine_label = taxonomy.fine_name(&host);
    Ok(())
}

/// Collapses identical residue strings. Duplicates that agree on their label
/// keep the first occurrence; duplicates with conflicting labels at `level`
/// are dropped entirely.
pub fn dedup_and_resolve(
    records: Vec<ProteinRecord>,
    level: Level,
    taxonomy: &Taxonomy,
) -> Result<(LabeledDataset, FilterReport), SeqError> {
    let mut report = FilterReport { parsed: records.len(), ..Default::default() };

    let mut unknown = Vec::new();
    let mut labeled = Vec::with_capacity(records.len());
    for mut r in records {
        if r.fine_label.is_none() && r.coarse_label.is_none() {
            return Err(SeqError::MissingLabel { id: r.id });
        }
        if let Err(host) = assign_labels(&mut r, taxonomy) {
            if !unknown.contains(&host) {
                unknown.push(host);
            }
        }
        labeled.push(r);
    }
    if !unknown.is_empty() {
        return Err(SeqError::UnknownHost(unknown));
    }

    // residues -> (first index, conflicting?, group size)
    let mut groups: HashMap<&str, (usize, bool, usize)> = HashMap::new();
    for (i, r) in labeled.iter().enumerate() {
        let entry = groups.entry(r.residues.as_str()).or_insert((i, false, 0));
        entry.2 += 1;
        if labeled[entry.0].label(level) != r.label(level) {
            entry.1 = true;
        }
    }

    let mut keep = vec![false; labeled.len()];
    for &(first, conflict, size) in groups.values() {
        if conflict {
            report.dropped_multilabel += size;
        } else {
            keep[first] = true;
            report.dropped_duplicate += size - 1;
        }
    }
    drop(groups);

    let kept: Vec<ProteinRecord> = labeled
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    report.kept = kept.len();
    let ds = build_dataset(kept, level)?;
    Ok((ds, report))
}

fn build_dataset(records: Vec<ProteinRecord>, level: Level) -> Result<LabeledDataset, SeqError> {
    let mut names: Vec<String> = Vec::new();
    for r in &records {
        let l = r.label(level).ok_or_else(|| match level {
            Level::Fine => SeqError::MissingFineLabel { id: r.id.clone() },
            Level::Coarse => SeqError::MissingLabel { id: r.id.clone() },
        })?;
        if !names.iter().any(|n| n == l) {
            names.push(l.to_string());
        }
    }
    names.sort();
    Ok(LabeledDataset { records, level, class_names: names })
}

/// Runs validation and deduplication in one pass, filling in the rejection
/// count of the report.
pub fn filter_records(
    records: Vec<ProteinRecord>,
    level: Level,
    taxonomy: &Taxonomy,
) -> Result<(LabeledDataset, FilterReport), SeqError> {
    let parsed = records.len();
    let valid: Vec<ProteinRecord> =
        records.into_iter().filter(|r| validate_record(r).is_accept()).collect();
    let rejected = parsed - valid.len();
    let (ds, mut report) = dedup_and_resolve(valid, level, taxonomy)?;
    report.parsed = parsed;
    report.rejected_alphabet = rejected;
    Ok((ds, report))
}

/// Re-derives labels at `level`. Coarse labels are recomputed from fine host
/// names through `taxonomy`.
pub fn relabel(
    ds: &LabeledDataset,
    level: Level,
    taxonomy: &Taxonomy,
) -> Result<LabeledDataset, SeqError> {
    let mut records = ds.records.clone();
    let mut unknown = Vec::new();
    for r in &mut records {
        match (&r.fine_label, level) {
            (Some(_), _) => {
                if let Err(host) = assign_labels(r, taxonomy) {
                    if !unknown.contains(&host) {
                        unknown.push(host);
                    }
                }
            }
            (None, Level::Fine) => return Err(SeqError::MissingFineLabel { id: r.id.clone() }),
            (None, Level::Coarse) => {
                if r.coarse_label.is_none() {
                    return Err(SeqError::MissingLabel { id: r.id.clone() });
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(SeqError::UnknownHost(unknown));
    }
    build_dataset(records, level)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub label: String,
    pub count: usize,
    pub fraction: f64,
}

/// Per-class record counts and fractions, in `class_names` order.
pub fn class_distribution(ds: &LabeledDataset) -> Vec<ClassShare> {
    if ds.is_empty() {
        return Vec::new();
    }
    let mut counts = vec![0usize; ds.class_names.len()];
    for i in ds.label_indices() {
        counts[i] += 1;
    }
    let total = ds.len() as f64;
    ds.class_names
        .iter()
        .zip(counts)
        .map(|(label, count)| ClassShare {
            label: label.clone(),
            count,
            fraction: count as f64 / total,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, seq: &str, host: &str) -> ProteinRecord {
        ProteinRecord::new(id, seq).with_host(host)
    }

    #[test]
    fn parse_empty_text() {
        assert!(parse_fasta("").unwrap().is_empty());
    }

    #[test]
    fn parse_concatenates_lines() {
        let recs = parse_fasta(">s1|host=human\nMLSI\nTILFL").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, "s1");
        assert_eq!(recs[0].residues, "MLSITILFL");
        assert_eq!(recs[0].metadata["host"], "human");
    }

    #[test]
    fn parse_crlf_lowercase_and_spaces() {
        let recs = parse_fasta(">a|host=Duck\r\nml si\r\ntil\r\n").unwrap();
        assert_eq!(recs[0].residues, "MLSITIL");
        assert_eq!(recs[0].fine_label.as_deref(), Some("duck"));
    }

    #[test]
    fn parse_duplicate_id() {
        let err = parse_fasta(">s1\nAAA\n>s2\nCCC\n>s1\nDDD\n").unwrap_err();
        assert_eq!(err, SeqError::DuplicateId { id: "s1".into() });
        assert!(err.to_string().contains("s1"));
    }

    #[test]
    fn parse_sequence_before_header() {
        let err = parse_fasta("\nMLS\n>s1\nAAA").unwrap_err();
        assert_eq!(err, SeqError::SequenceBeforeHeader { line: 2 });
    }

    #[test]
    fn parse_empty_body() {
        let err = parse_fasta(">s1\n>s2\nAAA").unwrap_err();
        assert_eq!(err, SeqError::EmptySequence { id: "s1".into() });
        let err = parse_fasta(">s1\nAAA\n>s2\n").unwrap_err();
        assert_eq!(err, SeqError::EmptySequence { id: "s2".into() });
    }

    #[test]
    fn incomplete_flag_from_metadata() {
        let recs = parse_fasta(">s1|host=human|incomplete=true\nAAA\n>s2\nCC").unwrap();
        assert!(recs[0].is_incomplete());
        assert!(!recs[1].is_incomplete());
    }

    #[test]
    fn validation_examples() {
        assert_eq!(validate_record(&ProteinRecord::new("a", "MLSITILFL")), Validation::Accept);
        assert_eq!(
            validate_record(&ProteinRecord::new("a", "MLXSI")),
            Validation::Reject { letter: 'X', position: 3 }
        );
        assert_eq!(
            validate_record(&ProteinRecord::new("a", "MLBZI")),
            Validation::Reject { letter: 'B', position: 3 }
        );
        assert_eq!(
            validate_record(&ProteinRecord::new("a", "MLBZI")).to_string(),
            "reject(B at position 3)"
        );
    }

    #[test]
    fn dedup_same_label_keeps_one() {
        let (ds, rep) = dedup_and_resolve(
            vec![rec("a", "MLS", "human"), rec("b", "MLS", "human")],
            Level::Coarse,
            &Taxonomy::default(),
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records[0].id, "a");
        assert_eq!(rep.dropped_duplicate, 1);
    }

    #[test]
    fn dedup_conflicting_labels_drops_all() {
        let (ds, rep) = dedup_and_resolve(
            vec![rec("a", "MLS", "human"), rec("b", "MLS", "swine")],
            Level::Coarse,
            &Taxonomy::default(),
        )
        .unwrap();
        assert!(ds.is_empty());
        assert_eq!(rep.dropped_multilabel, 2);
        assert_eq!(rep.kept, 0);
    }

    #[test]
    fn dedup_conflict_depends_on_level() {
        let recs = vec![rec("a", "MLS", "chicken"), rec("b", "MLS", "duck")];
        let tax = Taxonomy::default();
        let (coarse, _) = dedup_and_resolve(recs.clone(), Level::Coarse, &tax).unwrap();
        assert_eq!(coarse.len(), 1);
        let (fine, rep) = dedup_and_resolve(recs, Level::Fine, &tax).unwrap();
        assert!(fine.is_empty());
        assert_eq!(rep.dropped_multilabel, 2);
    }

    #[test]
    fn dedup_distinct_is_identity() {
        let recs = vec![rec("a", "MLS", "human"), rec("b", "MLT", "swine"), rec("c", "MLA", "duck")];
        let (ds, rep) = dedup_and_resolve(recs.clone(), Level::Coarse, &Taxonomy::default()).unwrap();
        assert_eq!(ds.len(), 3);
        let ids: Vec<_> = ds.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(rep.kept, 3);
        assert_eq!(ds.class_names, ["avian", "human", "swine"]);
    }

    #[test]
    fn unknown_host_is_error() {
        let err = dedup_and_resolve(vec![rec("a", "MLS", "unicorn")], Level::Coarse, &Taxonomy::default())
            .unwrap_err();
        assert_eq!(err, SeqError::UnknownHost(vec!["unicorn".into()]));
        assert!(err.to_string().contains("unicorn"));
    }

    #[test]
    fn relabel_levels() {
        let tax = Taxonomy::default();
        let (fine, _) = dedup_and_resolve(
            vec![rec("a", "MLS", "chicken"), rec("b", "MLT", "human"), rec("c", "MLA", "duck"), rec("d", "MLC", "pig")],
            Level::Fine,
            &tax,
        )
        .unwrap();
        assert_eq!(fine.class_names, ["chicken", "duck", "human", "swine"]);
        let coarse = relabel(&fine, Level::Coarse, &tax).unwrap();
        assert_eq!(coarse.records[0].coarse_label, Some(HostCoarse::Avian));
        assert_eq!(coarse.records[1].coarse_label, Some(HostCoarse::Human));
        assert_eq!(coarse.class_names, ["avian", "human", "swine"]);
        assert!(coarse.class_names.len() <= fine.class_names.len());
    }

    #[test]
    fn relabel_unknown_and_missing() {
        let tax = Taxonomy::default();
        let ds = LabeledDataset {
            records: vec![rec("a", "MLS", "unicorn")],
            level: Level::Fine,
            class_names: vec!["unicorn".into()],
        };
        assert!(matches!(relabel(&ds, Level::Coarse, &tax), Err(SeqError::UnknownHost(_))));

        let mut r = ProteinRecord::new("b", "MLS");
        r.coarse_label = Some(HostCoarse::Human);
        let ds = LabeledDataset { records: vec![r], level: Level::Coarse, class_names: vec!["human".into()] };
        assert!(matches!(relabel(&ds, Level::Fine, &tax), Err(SeqError::MissingFineLabel { .. })));
    }

    #[test]
    fn distribution() {
        let empty = LabeledDataset { records: vec![], level: Level::Coarse, class_names: vec![] };
        assert!(class_distribution(&empty).is_empty());

        let recs = vec![
            rec("a", "AAA", "human"),
            rec("b", "AAC", "human"),
            rec("c", "AAD", "human"),
            rec("d", "AAE", "swine"),
        ];
        let (ds, _) = dedup_and_resolve(recs, Level::Coarse, &Taxonomy::default()).unwrap();
        let dist = class_distribution(&ds);
        assert_eq!(dist[0].label, "human");
        assert_eq!(dist[0].fraction, 0.75);
        assert_eq!(dist[1].fraction, 0.25);
    }

    #[test]
    fn filter_counts() {
        let recs = vec![
            rec("a", "MLS", "human"),
            rec("b", "MLX", "human"),
            rec("c", "MLS", "human"),
            rec("d", "GGG", "human"),
            rec("e", "GGG", "swine"),
        ];
        let (ds, rep) = filter_records(recs, Level::Coarse, &Taxonomy::default()).unwrap();
        assert_eq!(
            rep,
            FilterReport { parsed: 5, rejected_alphabet: 1, dropped_duplicate: 1, dropped_multilabel: 2, kept: 1 }
        );
        assert_eq!(ds.len(), 1);
    }
}
