//! On-disk formats: model checkpoints, feature tables, training history, and
//! atomic file writes.
//!
//! A checkpoint is `HPMODEL1`, a little-endian u64 header length, a JSON
//! header, then (for neural models) every parameter tensor as little-endian
//! f64 in header order. Tree ensembles live entirely in the header.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ensemble::{RandomForest, RusBoost};
use crate::nn::{FittedModel, ModelSpec, Params, Tensor};
use crate::pssm::Scheme;
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"HPMODEL1";
pub const FEATURE_MAGIC: &[u8; 8] = b"HPFEAT\0\0";
pub const FEATURE_VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| format_err(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Neural(FittedModel),
    Forest(RandomForest),
    RusBoost(RusBoost),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Free-form context the caller needs to reuse the model (class names,
    /// input representation, ...).
    pub meta: Value,
    pub model: SavedModel,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Header {
    Neural { spec: ModelSpec, history: Vec<f64>, params: Vec<ParamEntry>, meta: Value },
    Forest { model: RandomForest, meta: Value },
    RusBoost { model: RusBoost, meta: Value },
}

pub fn encode_checkpoint(c: &Checkpoint) -> Result<Vec<u8>> {
    let mut blocks: Vec<u8> = Vec::new();
    let header = match &c.model {
        SavedModel::Neural(m) => {
            let params = m
                .params
                .names
                .iter()
                .zip(&m.params.tensors)
                .map(|(name, t)| {
                    blocks.extend(t.data.iter().flat_map(|v| v.to_le_bytes()));
                    ParamEntry { name: name.clone(), shape: t.shape.clone() }
                })
                .collect();
            Header::Neural { spec: m.spec.clone(), history: m.history.clone(), params, meta: c.meta.clone() }
        }
        SavedModel::Forest(f) => Header::Forest { model: f.clone(), meta: c.meta.clone() },
        SavedModel::RusBoost(b) => Header::RusBoost { model: b.clone(), meta: c.meta.clone() },
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + blocks.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blocks);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 16 || &bytes[..8] != MODEL_MAGIC {
        return Err(format_err("not a model checkpoint (bad magic)"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if hlen > body.len() {
        return Err(format_err("truncated checkpoint header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])?;
    let mut rest = &body[hlen..];
    let (meta, model) = match header {
        Header::Neural { spec, history, params, meta } => {
            let mut p = Params { names: Vec::new(), tensors: Vec::new() };
            for e in params {
                let n: usize = e.shape.iter().product();
                if rest.len() < n * 8 {
                    return Err(format_err(format!("truncated parameter block {}", e.name)));
                }
                let data = rest[..n * 8]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                rest = &rest[n * 8..];
                p.names.push(e.name);
                p.tensors.push(Tensor::new(&e.shape, data)?);
            }
            (meta, SavedModel::Neural(FittedModel { spec, params: p, history }))
        }
        Header::Forest { model, meta } => (meta, SavedModel::Forest(model)),
        Header::RusBoost { model, meta } => (meta, SavedModel::RusBoost(model)),
    };
    if !rest.is_empty() {
        return Err(format_err(format!("{} trailing bytes after checkpoint", rest.len())));
    }
    Ok(Checkpoint { meta, model })
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    atomic_write(path, &encode_checkpoint(c)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

/// `epoch,loss` with 1-based epochs.
pub fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        s.push_str(&format!("{},{}\n", i + 1, l));
    }
    s
}

/// Fixed-length feature vectors for a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub scheme: Scheme,
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn dim(&self) -> usize {
        self.scheme.dim()
    }

    fn check(&self) -> Result<()> {
        if self.ids.len() != self.rows.len() || self.labels.len() != self.rows.len() {
            return Err(format_err("feature table columns have different lengths"));
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != self.dim()) {
            return Err(format_err(format!("{} row has {} values, expected {}", self.scheme, r.len(), self.dim())));
        }
        Ok(())
    }

    /// `id,label,scheme,v0,...` with one record per line.
    pub fn to_csv(&self) -> Result<String> {
        self.check()?;
        let mut s = String::from("id,label,scheme");
        for i in 0..self.dim() {
            s.push_str(&format!(",v{i}"));
        }
        s.push('\n');
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            if id.contains(',') || label.contains(',') {
                return Err(format_err(format!("id or label of {id} contains a comma")));
            }
            s.push_str(&format!("{id},{label},{}", self.scheme));
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<FeatureTable> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| format_err("empty feature file"))?;
        let dim = header.split(',').count().saturating_sub(3);
        let mut scheme = None;
        let mut t = FeatureTable { scheme: Scheme::Eg, ids: Vec::new(), labels: Vec::new(), rows: Vec::new() };
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 3 {
                return Err(format_err(format!("line {}: expected {} fields, found {}", n + 2, dim + 3, fields.len())));
            }
            let s: Scheme = fields[2].parse().map_err(|e| format_err(format!("line {}: {e}", n + 2)))?;
            if scheme.is_some_and(|prev| prev != s) {
                return Err(format_err(format!("line {}: mixed schemes", n + 2)));
            }
            scheme = Some(s);
            let row = fields[3..]
                .iter()
                .map(|v| v.trim().parse::<f64>().map_err(|_| format_err(format!("line {}: bad value {v}", n + 2))))
                .collect::<Result<Vec<f64>>>()?;
            t.ids.push(fields[0].to_string());
            t.labels.push(fields[1].to_string());
            t.rows.push(row);
        }
        t.scheme = scheme.ok_or_else(|| format_err("feature file has no rows"))?;
        t.check()?;
        Ok(t)
    }

    /// Columnar binary layout: 16-byte header (magic, u32 version, u32
    /// scheme code), u64 rows, u64 cols, length-prefixed ids and labels, then
    /// the values column by column.
    pub fn to_binary(&self) -> Result<Vec<u8>> {
        self.check()?;
        let mut out = Vec::new();
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.scheme.code().to_le_bytes());
        out.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for s in self.ids.iter().chain(&self.labels) {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for c in 0..self.dim() {
            for r in &self.rows {
                out.extend_from_slice(&r[c].to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<FeatureTable> {
        let mut cur = Cursor { bytes, at: 0 };
        if cur.take(8)? != FEATURE_MAGIC {
            return Err(format_err("not a feature file (bad magic)"));
        }
        let version = cur.u32()?;
        if version != FEATURE_VERSION {
            return Err(format_err(format!("unsupported feature file version {version}")));
        }
        let code = cur.u32()?;
        let scheme = Scheme::from_code(code).ok_or_else(|| format_err(format!("unknown scheme code {code}")))?;
        let rows = cur.u64()? as usize;
        let cols = cur.u64()? as usize;
        if cols != scheme.dim() {
            return Err(format_err(format!("{scheme} needs {} columns, file has {cols}", scheme.dim())));
        }
        let mut strings = Vec::with_capacity(2 * rows);
        for _ in 0..2 * rows {
            let n = cur.u32()? as usize;
            let s = std::str::from_utf8(cur.take(n)?).map_err(|_| format_err("non-UTF-8 id or label"))?;
            strings.push(s.to_string());
        }
        let labels = strings.split_off(rows);
        let mut data = vec![vec![0.0; cols]; rows];
        for c in 0..cols {
            for row in data.iter_mut() {
                row[c] = f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if cur.at != bytes.len() {
            return Err(format_err("trailing bytes in feature file"));
        }
        Ok(FeatureTable { scheme, ids: strings, labels, rows: data })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format_err("truncated feature file"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{fit_forest, ForestConfig};
    use crate::nn::{train, Arch, InputKind, Inputs, TrainConfig};

    fn table() -> FeatureTable {
        FeatureTable {
            scheme: Scheme::Eg,
            ids: vec!["a".into(), "b".into()],
            labels: vec!["human".into(), "avian".into()],
            rows: vec![(0..100).map(|i| i as f64 / 7.0).collect(), (0..100).map(|i| -(i as f64) * 1e-3).collect()],
        }
    }

    #[test]
    fn feature_round_trips() {
        let t = table();
        assert_eq!(FeatureTable::from_csv(&t.to_csv().unwrap()).unwrap(), t);
        let bin = t.to_binary().unwrap();
        assert_eq!(&bin[..8], FEATURE_MAGIC);
        assert_eq!(FeatureTable::from_binary(&bin).unwrap(), t);
        assert!(FeatureTable::from_binary(&bin[..bin.len() - 1]).is_err());
    }

    #[test]
    fn checkpoint_round_trips() {
        let spec = ModelSpec { arch: Arch::Mlp { hidden: vec![3] }, input: InputKind::Features { dim: 2 }, embed_dim: 0, n_classes: 2 };
        let x = Inputs::Features(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let cfg = TrainConfig { epochs: 2, batch_size: 1, ..Default::default() };
        let m = train(&spec, &x, &[0, 1], &cfg).unwrap();
        let c = Checkpoint { meta: serde_json::json!({"classes": ["a", "b"]}), model: SavedModel::Neural(m) };
        let bytes = encode_checkpoint(&c).unwrap();
        assert_eq!(&bytes[..8], MODEL_MAGIC);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), c);

        let f = fit_forest(&[vec![0.0], vec![1.0]], &[0, 1], 2, &ForestConfig { n_estimators: 2, ..Default::default() }).unwrap();
        let c = Checkpoint { meta: Value::Null, model: SavedModel::Forest(f) };
        assert_eq!(decode_checkpoint(&encode_checkpoint(&c).unwrap()).unwrap(), c);
        assert!(decode_checkpoint(b"HPMODEL0\0\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn history_layout() {
        assert_eq!(history_csv(&[0.5, 0.25]), "epoch,loss\n1,0.5\n2,0.25\n");
    }
}
