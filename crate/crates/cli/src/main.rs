//! `hostpred` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 diverged training.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<hostpred::Error> for CliError {
    fn from(e: hostpred::Error) -> Self {
        if e.is_divergence() {
            CliError::Diverged(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hostpred", version, about = "Influenza A host prediction from protein sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Inputs {
    /// Labeled dataset written by `prepare` or `synth`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// FASTA file with `id|host=...` headers, used when no dataset is given.
    #[arg(long)]
    fasta: Option<PathBuf>,
    /// Feature table written by `encode` (CSV or binary).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Directory of `<id>.pssm` PSI-BLAST profiles.
    #[arg(long)]
    pssm_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelChoice {
    #[arg(long)]
    model: Option<hostpred::pipeline::ModelKind>,
    #[arg(long)]
    scheme: Option<hostpred::pssm::Scheme>,
    #[arg(long)]
    ngrams: Option<usize>,
    /// Grid override `key=value[,value...]`, repeatable.
    #[arg(long = "set", value_parser = config::parse_set)]
    set: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, validate and deduplicate a FASTA file into a labeled dataset.
    Prepare {
        #[arg(long)]
        fasta: Option<PathBuf>,
        #[arg(long)]
        level: Option<hostpred::seqio::Level>,
        #[command(flatten)]
        common: Common,
    },
    /// Encode PSSM profiles into fixed-length features, or sequences into
    /// n-gram ids.
    Encode {
        #[arg(long)]
        scheme: Option<hostpred::pssm::Scheme>,
        #[arg(long)]
        ngrams: Option<usize>,
        /// Individual PSSM files, repeatable.
        #[arg(long)]
        pssm: Vec<PathBuf>,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        common: Common,
    },
    /// Fit one model on the whole dataset.
    Train {
        #[command(flatten)]
        choice: ModelChoice,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        common: Common,
    },
    /// Score a saved model on a labeled dataset.
    Evaluate {
        #[arg(long = "model-file")]
        model_file: Option<PathBuf>,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        common: Common,
    },
    /// Stratified nested cross-validation with grid search.
    NestedCv {
        #[command(flatten)]
        choice: ModelChoice,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        k_outer: Option<usize>,
        #[arg(long)]
        k_inner: Option<usize>,
        #[arg(long)]
        max_grid_points: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Class probabilities for new sequences.
    Predict {
        #[arg(long = "model-file")]
        model_file: Option<PathBuf>,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic motif corpus.
    Synth {
        #[arg(long, default_value_t = 300)]
        records: usize,
        /// 2 or 3 coarse classes.
        #[arg(long, default_value_t = 3)]
        classes: usize,
        /// 26 fine-level hosts instead of coarse classes.
        #[arg(long)]
        fine: bool,
        /// Also write a synthetic PSSM per record under `pssm/`.
        #[arg(long)]
        pssm: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Tables for downstream plotting: metrics summary, token frequencies,
    /// cross-model disagreement.
    Report {
        #[command(flatten)]
        inputs: Inputs,
        /// Metrics JSON from `evaluate` or `nested-cv`.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Prediction CSVs from `predict` or `nested-cv`, repeatable.
        #[arg(long)]
        predictions: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        ngrams: usize,
        /// Tokens kept per class in the frequency table.
        #[arg(long, default_value_t = 20)]
        top: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn apply_inputs(cfg: &mut RunConfig, i: &Inputs) {
    let d = &mut cfg.data;
    for (slot, flag) in [
        (&mut d.dataset, &i.dataset),
        (&mut d.fasta, &i.fasta),
        (&mut d.features, &i.features),
        (&mut d.pssm_dir, &i.pssm_dir),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
}

fn apply_choice(cfg: &mut RunConfig, c: &ModelChoice) {
    if c.model.is_some() {
        cfg.model = c.model;
    }
    if c.scheme.is_some() {
        cfg.scheme = c.scheme;
        cfg.ngrams = None;
    }
    if c.ngrams.is_some() {
        cfg.ngrams = c.ngrams;
        if c.scheme.is_none() {
            cfg.scheme = None;
        }
    }
    for (k, v) in &c.set {
        cfg.grid.insert(k.clone(), v.clone());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare { fasta, level, common } => {
            let mut cfg = base_config(&common)?;
            if fasta.is_some() {
                cfg.data.fasta = fasta;
            }
            if level.is_some() {
                cfg.level = level;
            }
            commands::prepare(&cfg)
        }
        Command::Encode { scheme, ngrams, pssm, inputs, common } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, &inputs);
            apply_choice(&mut cfg, &ModelChoice { scheme, ngrams, ..Default::default() });
            commands::encode(&cfg, &pssm)
        }
        Command::Train { choice, inputs, common } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, &inputs);
            apply_choice(&mut cfg, &choice);
            commands::train(&cfg)
        }
        Command::Evaluate { model_file, inputs, common } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, &inputs);
            if model_file.is_some() {
                cfg.data.model = model_file;
            }
            commands::evaluate(&cfg)
        }
        Command::NestedCv { choice, inputs, k_outer, k_inner, max_grid_points, common } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, &inputs);
            apply_choice(&mut cfg, &choice);
            if let Some(k) = k_outer {
                cfg.cv.k_outer = k;
            }
            if let Some(k) = k_inner {
                cfg.cv.k_inner = k;
            }
            if max_grid_points.is_some() {
                cfg.max_grid_points = max_grid_points;
            }
            commands::nested_cv(&cfg)
        }
        Command::Predict { model_file, inputs, common } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, &inputs);
            if model_file.is_some() {
                cfg.data.model = model_file;
            }
            commands::predict(&cfg)
        }
        Command::Synth { records, classes, fine, pssm, common } => {
            let cfg = base_config(&common)?;
            commands::synth(&cfg, records, classes, fine, pssm)
        }
        Command::Report { inputs, metrics, predictions, ngrams, top, common } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, &inputs);
            cfg.ngrams = Some(ngrams);
            commands::report(&cfg, metrics.as_deref(), &predictions, top)
        }
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("HOSTPRED_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second initialization (never happens in the binary) is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `hostpred --help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
