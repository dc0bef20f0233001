use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use hostpred::io::atomic_write;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const RUN_LOG: &str = "run.log";

/// Collects the files a command writes under `--out`, then records them in
/// the manifest. Every file is written to a temp name and renamed.
pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    config_hash: String,
    config: &'a RunConfig,
    outputs: &'a [String],
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

impl Output {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Output { dir, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        atomic_write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` and appends a timestamped line to `run.log`.
    /// Timestamps live only in the log so every other output is a pure
    /// function of the configuration.
    pub fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
        let outputs = self.written.clone();
        let manifest = Manifest {
            tool: "hostpred",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg,
            outputs: &outputs,
        };
        self.write_json(MANIFEST, &manifest)?;

        let log = self.path(RUN_LOG);
        let mut text = fs::read_to_string(&log).unwrap_or_default();
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        text.push_str(&format!("{secs} {command} config={} wrote {}\n", cfg.hash(), outputs.join(",")));
        atomic_write(&log, text.as_bytes()).map_err(|e| io_err(&log, e))?;
        for name in outputs.iter().take(8) {
            eprintln!("wrote {}", self.path(name).display());
        }
        if outputs.len() > 8 {
            eprintln!("... and {} more under {}", outputs.len() - 8, self.dir.display());
        }
        Ok(())
    }
}
