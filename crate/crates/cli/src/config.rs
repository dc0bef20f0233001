//! Run configuration: one JSON document, with command-line flags layered on
//! top (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hostpred::pipeline::{ModelKind, Representation};
use hostpred::pssm::Scheme;
use hostpred::seqio::Level;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub fasta: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub pssm_dir: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k_outer: usize,
    pub k_inner: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { k_outer: 5, k_inner: 4 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: DataPaths,
    pub level: Option<Level>,
    pub scheme: Option<Scheme>,
    pub ngrams: Option<usize>,
    pub model: Option<ModelKind>,
    /// Axis overrides on top of the model's default grid.
    pub grid: BTreeMap<String, Vec<f64>>,
    /// Evaluate at most this many grid points, chosen at random from the seed.
    pub max_grid_points: Option<usize>,
    pub cv: CvConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Usage("a seed is required (--seed or \"seed\" in the config)".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn representation(&self) -> Result<Representation, CliError> {
        match (self.scheme, self.ngrams) {
            (Some(s), None) => Ok(Representation::Pssm(s)),
            (None, Some(n)) => Ok(Representation::Ngrams(n)),
            (Some(_), Some(_)) => Err(CliError::Usage("choose either --scheme or --ngrams, not both".into())),
            (None, None) => Err(CliError::Usage("a representation is required (--scheme eg|gdpc|er or --ngrams N)".into())),
        }
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        self.model.ok_or_else(|| CliError::Usage("a model is required (--model mlp|cnn|transformer|rf|rusboost)".into()))
    }

    /// Every configured input path must exist before any work starts.
    pub fn check_paths(&self) -> Result<(), CliError> {
        let d = &self.data;
        for p in [&d.fasta, &d.dataset, &d.pssm_dir, &d.features, &d.model].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Data(format!("input path does not exist: {}", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Parses `key=value` grid overrides; `value` may be a comma list.
pub fn parse_set(s: &str) -> Result<(String, Vec<f64>), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let values = v
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number in '{s}'")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((k.trim().to_string(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_set_values() {
        assert_eq!(parse_set("epochs=30").unwrap(), ("epochs".into(), vec![30.0]));
        assert_eq!(parse_set("lr=0.1, 0.01").unwrap().1, vec![0.1, 0.01]);
        assert!(parse_set("epochs").is_err());
        assert!(parse_set("epochs=x").is_err());
    }

    #[test]
    fn config_json_shape() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 7, "model": "rf", "scheme": "er", "grid": {"n_estimators": [50]}}"#).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.representation().unwrap(), Representation::Pssm(Scheme::Er));
        assert_eq!(c.cv, CvConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 7}"#).is_err());
        assert_eq!(c.hash(), c.clone().hash());
        assert_eq!(c.hash().len(), 64);
    }
}
