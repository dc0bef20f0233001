//! One function per subcommand.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use hostpred::eval::{self, ensemble_disagreement, pr_curves_csv, CvPlan, HyperGrid, HyperParams, MetricsReport};
use hostpred::io::{decode_checkpoint, encode_checkpoint, history_csv, FeatureTable, SavedModel, FEATURE_MAGIC};
use hostpred::ngram::{build_vocab, encode_pad, token_frequencies, tokenize};
use hostpred::pipeline::{default_grid, fit, grid_points, run_nested_cv, Corpus, ModelKind, Representation, TrainedModel};
use hostpred::pssm::{encode as encode_pssm, gpssm_from_raw, parse_psiblast_pssm, write_psiblast_pssm, RawPssm, Scheme};
use hostpred::seqio::{filter_records, parse_fasta, validate_record, write_fasta, LabeledDataset, Level, ProteinRecord, Taxonomy};
use hostpred::testbench::{generate, synth_pssms, SynthSpec};
use hostpred::derive_seed;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::Output;
use crate::CliError;

fn data(e: impl Into<hostpred::Error>) -> CliError {
    CliError::from(e.into())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn read_fasta(path: &Path) -> Result<Vec<ProteinRecord>, CliError> {
    parse_fasta(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// The labeled dataset from `--dataset`, or filtered from `--fasta`.
fn load_dataset(cfg: &RunConfig) -> Result<LabeledDataset, CliError> {
    if let Some(p) = &cfg.data.dataset {
        let ds: LabeledDataset = hostpred::io::read_json(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        if ds.is_empty() {
            return Err(CliError::Data(format!("{}: dataset is empty", p.display())));
        }
        return Ok(ds);
    }
    if let Some(p) = &cfg.data.fasta {
        let (ds, _) = filter_records(read_fasta(p)?, cfg.level.unwrap_or(Level::Coarse), &Taxonomy::default())
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        if ds.is_empty() {
            return Err(CliError::Data(format!("{}: no records survived filtering", p.display())));
        }
        return Ok(ds);
    }
    Err(CliError::Usage("an input dataset is required (--dataset or --fasta)".into()))
}

fn read_feature_table(path: &Path) -> Result<FeatureTable, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let t = if bytes.starts_with(FEATURE_MAGIC) {
        FeatureTable::from_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{}: not UTF-8 text", path.display())))?;
        FeatureTable::from_csv(&text)
    };
    t.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_pssm(path: &Path) -> Result<RawPssm, CliError> {
    parse_psiblast_pssm(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn pssm_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.pssm"))
}

/// PSSMs for `records`, read from `<dir>/<id>.pssm`. The matrix's query
/// residues must match the record.
fn load_pssms(dir: &Path, records: &[ProteinRecord]) -> Result<Vec<RawPssm>, CliError> {
    records
        .iter()
        .map(|r| {
            let path = pssm_path(dir, &r.id);
            if !path.exists() {
                return Err(CliError::Data(format!("no PSSM for {} (expected {})", r.id, path.display())));
            }
            let m = read_pssm(&path)?;
            if m.residues != r.residues {
                return Err(CliError::Data(format!("{}: PSSM query does not match the sequence of {}", path.display(), r.id)));
            }
            Ok(m)
        })
        .collect()
}

/// Feature rows for `records` in record order, from a feature table or a
/// PSSM directory.
fn load_features(cfg: &RunConfig, scheme: Scheme, records: &[ProteinRecord]) -> Result<Vec<Vec<f64>>, CliError> {
    if let Some(p) = &cfg.data.features {
        let t = read_feature_table(p)?;
        if t.scheme != scheme {
            return Err(CliError::Data(format!("{} holds {} features, {scheme} requested", p.display(), t.scheme)));
        }
        let by_id: HashMap<&str, usize> = t.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        return records
            .iter()
            .map(|r| {
                by_id
                    .get(r.id.as_str())
                    .map(|&i| t.rows[i].clone())
                    .ok_or_else(|| CliError::Data(format!("{} has no row for {}", p.display(), r.id)))
            })
            .collect();
    }
    if let Some(dir) = &cfg.data.pssm_dir {
        let pssms = load_pssms(dir, records)?;
        return hostpred::par_map(pssms, |m| encode_pssm(&gpssm_from_raw(&m), scheme).map(|f| f.values))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(data);
    }
    Err(CliError::Usage(format!("{scheme} features need --features or --pssm-dir")))
}

fn corpus(cfg: &RunConfig, ds: &LabeledDataset, repr: Representation) -> Result<Corpus, CliError> {
    let c = Corpus::from_dataset(ds);
    match repr {
        Representation::Pssm(s) => c.with_features(s, load_features(cfg, s, &ds.records)?).map_err(CliError::from),
        Representation::Ngrams(_) => Ok(c),
    }
}

/// Keys a model reads beyond its default grid axes.
fn extra_keys(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Rf => &["features_per_split"],
        ModelKind::Mlp => &["embed_dim"],
        ModelKind::Cnn => &[],
        ModelKind::Transformer => &[],
        ModelKind::RusBoost => &[],
    }
}

fn grid(cfg: &RunConfig, kind: ModelKind) -> Result<HyperGrid, CliError> {
    let mut g = default_grid(kind);
    for (k, v) in &cfg.grid {
        if !g.0.contains_key(k) && !extra_keys(kind).contains(&k.as_str()) {
            let known: Vec<&str> = g.0.keys().map(String::as_str).chain(extra_keys(kind).iter().copied()).collect();
            return Err(CliError::Usage(format!("{kind} has no parameter '{k}' (known: {})", known.join(", "))));
        }
        if v.is_empty() {
            return Err(CliError::Usage(format!("parameter '{k}' has no values")));
        }
        g.0.insert(k.clone(), v.clone());
    }
    Ok(g)
}

fn check_repr(kind: ModelKind, repr: Representation) -> Result<(), CliError> {
    if !kind.is_neural() && matches!(repr, Representation::Ngrams(_)) {
        return Err(CliError::Usage(format!("{kind} needs PSSM features (--scheme), not n-grams")));
    }
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<TrainedModel, CliError> {
    let p = cfg.data.model.as_ref().ok_or_else(|| CliError::Usage("--model-file is required".into()))?;
    let bytes = fs::read(p).map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
    decode_checkpoint(&bytes)
        .and_then(TrainedModel::from_checkpoint)
        .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn model_features(cfg: &RunConfig, m: &TrainedModel, records: &[ProteinRecord]) -> Result<Option<Vec<Vec<f64>>>, CliError> {
    match m.representation {
        Representation::Pssm(s) => Ok(Some(load_features(cfg, s, records)?)),
        Representation::Ngrams(_) => Ok(None),
    }
}

fn predictions_csv(ids: &[String], truth: &[Option<String>], prob: &[Vec<f64>], class_names: &[String]) -> String {
    let mut s = String::from("id,true,predicted");
    for c in class_names {
        s.push_str(&format!(",p_{c}"));
    }
    s.push('\n');
    for ((id, t), row) in ids.iter().zip(truth).zip(prob) {
        let pred = &class_names[eval::argmax(row)];
        s.push_str(&format!("{id},{},{pred}", t.as_deref().unwrap_or("")));
        for p in row {
            s.push_str(&format!(",{p}"));
        }
        s.push('\n');
    }
    s
}

pub fn prepare(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.check_paths()?;
    let path = cfg.data.fasta.as_ref().ok_or_else(|| CliError::Usage("--fasta is required".into()))?;
    let (ds, report) = filter_records(read_fasta(path)?, cfg.level.unwrap_or(Level::Coarse), &Taxonomy::default())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("{}: no records survived filtering", path.display())));
    }
    let mut out = Output::create(cfg)?;
    out.write_json("dataset.json", &ds)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        report: hostpred::seqio::FilterReport,
        classes: Vec<hostpred::seqio::ClassShare>,
        level: &'a Level,
    }
    out.write_json(
        "filter_report.json",
        &Summary { report, classes: hostpred::seqio::class_distribution(&ds), level: &ds.level },
    )?;
    out.finish("prepare", cfg)
}

pub fn encode(cfg: &RunConfig, pssm_files: &[PathBuf]) -> Result<(), CliError> {
    cfg.check_paths()?;
    for p in pssm_files {
        if !p.exists() {
            return Err(CliError::Data(format!("input path does not exist: {}", p.display())));
        }
    }
    match cfg.representation()? {
        Representation::Pssm(scheme) => encode_pssms(cfg, scheme, pssm_files),
        Representation::Ngrams(n) => encode_ngrams(cfg, n),
    }
}

fn encode_pssms(cfg: &RunConfig, scheme: Scheme, pssm_files: &[PathBuf]) -> Result<(), CliError> {
    // (id, label, matrix)
    let mut items: Vec<(String, String, RawPssm)> = Vec::new();
    for p in pssm_files {
        let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("record").to_string();
        items.push((id, String::new(), read_pssm(p)?));
    }
    if cfg.data.dataset.is_some() || (cfg.data.fasta.is_some() && pssm_files.is_empty()) {
        let ds = load_dataset(cfg)?;
        let dir = cfg
            .data
            .pssm_dir
            .as_ref()
            .ok_or_else(|| CliError::Usage("encoding a dataset needs --pssm-dir".into()))?;
        let pssms = load_pssms(dir, &ds.records)?;
        for (r, m) in ds.records.iter().zip(pssms) {
            let label = r.label(ds.level).unwrap_or("").to_string();
            items.push((r.id.clone(), label, m));
        }
    } else if let Some(dir) = &cfg.data.pssm_dir {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pssm"))
            .collect();
        paths.sort();
        for p in paths {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("record").to_string();
            items.push((id, String::new(), read_pssm(&p)?));
        }
    }
    if items.is_empty() {
        return Err(CliError::Usage("nothing to encode (give --pssm files, --pssm-dir or --dataset with --pssm-dir)".into()));
    }

    let mut table = FeatureTable { scheme, ids: Vec::new(), labels: Vec::new(), rows: Vec::new() };
    for (id, label, m) in items {
        let f = encode_pssm(&gpssm_from_raw(&m), scheme).map_err(|e| CliError::Data(format!("{id}: {e}")))?;
        table.ids.push(id);
        table.labels.push(label);
        table.rows.push(f.values);
    }
    let mut out = Output::create(cfg)?;
    out.write("features.csv", table.to_csv().map_err(data)?.as_bytes())?;
    out.write("features.bin", &table.to_binary().map_err(data)?)?;
    out.finish("encode", cfg)
}

fn encode_ngrams(cfg: &RunConfig, n: usize) -> Result<(), CliError> {
    let ds = load_dataset(cfg)?;
    let sentences = ds
        .records
        .iter()
        .map(|r| tokenize(&r.residues, n).map_err(|e| CliError::Data(format!("{}: {e}", r.id))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut vocab = build_vocab(n, &sentences).map_err(data)?;
    vocab.max_len = sentences.iter().map(Vec::len).max().unwrap_or(0);

    #[derive(Serialize)]
    struct Encoded<'a> {
        id: &'a str,
        label: Option<&'a str>,
        ids: Vec<usize>,
        length: usize,
    }
    let mut encoded = Vec::with_capacity(ds.len());
    for (r, s) in ds.records.iter().zip(&sentences) {
        let seq = encode_pad(s, &vocab, vocab.max_len).map_err(data)?;
        encoded.push(Encoded { id: &r.id, label: r.label(ds.level), ids: seq.ids, length: seq.true_len });
    }
    let mut out = Output::create(cfg)?;
    out.write_json("vocab.json", &vocab)?;
    out.write_json("tokens.json", &encoded)?;
    out.finish("encode", cfg)
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.check_paths()?;
    let kind = cfg.model_kind()?;
    let repr = cfg.representation()?;
    check_repr(kind, repr)?;
    let seed = cfg.seed()?;
    let points = grid_points(kind, &grid(cfg, kind)?);
    let params = points
        .first()
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("no valid {kind} parameter combination")))?;
    let ds = load_dataset(cfg)?;
    let c = corpus(cfg, &ds, repr)?;
    let all: Vec<usize> = (0..c.len()).collect();
    let m = fit(&c, kind, repr, &params, &all, seed)?;

    let mut out = Output::create(cfg)?;
    out.write("model.bin", &encode_checkpoint(&m.to_checkpoint()?)?)?;
    if let SavedModel::Neural(n) = &m.model {
        out.write("history.csv", history_csv(&n.history).as_bytes())?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        model: ModelKind,
        representation: String,
        params: &'a HyperParams,
        class_names: &'a [String],
        n_records: usize,
    }
    out.write_json(
        "train_summary.json",
        &Summary { model: kind, representation: repr.to_string(), params: &params, class_names: &m.class_names, n_records: c.len() },
    )?;
    out.finish("train", cfg)
}

/// Maps dataset labels onto the model's class order.
fn model_labels(ds: &LabeledDataset, m: &TrainedModel) -> Result<Vec<usize>, CliError> {
    ds.records
        .iter()
        .map(|r| {
            let l = r.label(ds.level).unwrap_or("");
            m.class_names
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| CliError::Data(format!("{}: label '{l}' is not one of the model's classes", r.id)))
        })
        .collect()
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.check_paths()?;
    let m = load_model(cfg)?;
    let ds = load_dataset(cfg)?;
    let y = model_labels(&ds, &m)?;
    let residues: Vec<String> = ds.records.iter().map(|r| r.residues.clone()).collect();
    let features = model_features(cfg, &m, &ds.records)?;
    let prob = m.predict_proba(&residues, features.as_deref())?;
    let report = eval::evaluate(&prob, &y, &m.class_names).map_err(data)?;

    #[derive(Serialize)]
    struct Metrics<'a> {
        model: ModelKind,
        representation: String,
        params: &'a HyperParams,
        #[serde(flatten)]
        report: &'a MetricsReport,
    }
    let ids: Vec<String> = ds.records.iter().map(|r| r.id.clone()).collect();
    let truth: Vec<Option<String>> = y.iter().map(|&i| Some(m.class_names[i].clone())).collect();
    let mut out = Output::create(cfg)?;
    out.write_json(
        "metrics.json",
        &Metrics { model: m.kind, representation: m.representation.to_string(), params: &m.params, report: &report },
    )?;
    out.write("pr_curves.csv", pr_curves_csv(&report).as_bytes())?;
    out.write("predictions.csv", predictions_csv(&ids, &truth, &prob, &m.class_names).as_bytes())?;
    out.finish("evaluate", cfg)
}

pub fn nested_cv(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.check_paths()?;
    let kind = cfg.model_kind()?;
    let repr = cfg.representation()?;
    check_repr(kind, repr)?;
    let seed = cfg.seed()?;
    let g = grid(cfg, kind)?;
    let mut points = grid_points(kind, &g);
    if points.is_empty() {
        return Err(CliError::Usage(format!("no valid {kind} parameter combination")));
    }
    if let Some(max) = cfg.max_grid_points {
        if max == 0 {
            return Err(CliError::Usage("--max-grid-points must be at least 1".into()));
        }
        if points.len() > max {
            points = subset(points, max, derive_seed(seed, &[9]));
        }
    }
    let ds = load_dataset(cfg)?;
    let c = corpus(cfg, &ds, repr)?;
    let plan = CvPlan::new(&c.labels, cfg.cv.k_outer, cfg.cv.k_inner, seed).map_err(data)?;
    let outcome = run_nested_cv(&c, kind, repr, &points, &plan)?;

    #[derive(Serialize)]
    struct Metrics<'a> {
        model: ModelKind,
        representation: String,
        grid_points: usize,
        k_outer: usize,
        k_inner: usize,
        seed: u64,
        #[serde(flatten)]
        outcome: &'a eval::NestedCvOutcome<HyperParams>,
    }
    let truth: Vec<Option<String>> = c.labels.iter().map(|&i| Some(c.class_names[i].clone())).collect();
    let mut out = Output::create(cfg)?;
    out.write_json(
        "metrics.json",
        &Metrics {
            model: kind,
            representation: repr.to_string(),
            grid_points: points.len(),
            k_outer: plan.k_outer,
            k_inner: plan.k_inner,
            seed,
            outcome: &outcome,
        },
    )?;
    out.write("pr_curves.csv", pr_curves_csv(&outcome.pooled).as_bytes())?;
    out.write_json("cv_plan.json", &plan)?;
    out.write("oof_predictions.csv", predictions_csv(&c.ids, &truth, &outcome.oof_proba, &c.class_names).as_bytes())?;
    out.finish("nested-cv", cfg)
}

/// `max` points drawn without replacement, kept in grid order.
fn subset(points: Vec<HyperParams>, max: usize, seed: u64) -> Vec<HyperParams> {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, points.len(), max).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| points[i].clone()).collect()
}

pub fn predict(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.check_paths()?;
    let m = load_model(cfg)?;
    // Prediction inputs may be unlabeled, so FASTA input skips the label
    // filter and only checks the alphabet.
    let (records, level) = if cfg.data.dataset.is_some() {
        let ds = load_dataset(cfg)?;
        (ds.records, Some(ds.level))
    } else if let Some(p) = &cfg.data.fasta {
        let records = read_fasta(p)?;
        for r in &records {
            let v = validate_record(r);
            if !v.is_accept() {
                return Err(CliError::Data(format!("{}: {}: {v}", p.display(), r.id)));
            }
        }
        (records, cfg.level)
    } else {
        return Err(CliError::Usage("an input is required (--dataset or --fasta)".into()));
    };
    if records.is_empty() {
        return Err(CliError::Data("no records to predict".into()));
    }
    let taxonomy = Taxonomy::default();
    let truth: Vec<Option<String>> = records
        .iter()
        .map(|r| match level {
            Some(l) if r.label(l).is_some() => r.label(l).map(str::to_string),
            _ => r.fine_label.as_deref().and_then(|h| match level {
                Some(Level::Fine) => taxonomy.fine_name(h),
                _ => taxonomy.coarse_of(h).map(|c| c.name().to_string()),
            }),
        })
        .collect();
    let residues: Vec<String> = records.iter().map(|r| r.residues.clone()).collect();
    let features = model_features(cfg, &m, &records)?;
    let prob = m.predict_proba(&residues, features.as_deref())?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let mut out = Output::create(cfg)?;
    out.write("predictions.csv", predictions_csv(&ids, &truth, &prob, &m.class_names).as_bytes())?;
    out.finish("predict", cfg)
}

pub fn synth(cfg: &RunConfig, records: usize, classes: usize, fine: bool, pssm: bool) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let spec = if fine { SynthSpec::fine(records, seed) } else { SynthSpec::balanced(records, classes, seed).map_err(|e| CliError::Usage(e.to_string()))? };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = generate(&spec)?;
    let mut out = Output::create(cfg)?;
    out.write_json("dataset.json", &ds)?;
    out.write("synth.fasta", write_fasta(&ds.records).as_bytes())?;
    if pssm {
        let mats = synth_pssms(&ds, derive_seed(seed, &[2]));
        for (r, m) in ds.records.iter().zip(&mats) {
            out.write(&format!("pssm/{}.pssm", r.id), write_psiblast_pssm(m).as_bytes())?;
        }
    }
    out.finish("synth", cfg)
}

/// `(id, predicted label)` pairs from a predictions CSV.
fn read_predictions(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Data(format!("{}: no '{name}' column", path.display())))
    };
    let (id_col, pred_col) = (col("id")?, col("predicted")?);
    let mut map = HashMap::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(CliError::Data(format!("{}: malformed row '{line}'", path.display())));
        }
        map.insert(f[id_col].to_string(), f[pred_col].to_string());
    }
    Ok(map)
}

fn model_name(path: &Path, taken: &[String]) -> String {
    let mut name = path.display().to_string();
    if let Some(parent) = path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let short = if stem.ends_with("predictions") { parent.to_string() } else { format!("{parent}/{stem}") };
        if !taken.contains(&short) {
            name = short;
        }
    }
    name
}

pub fn report(cfg: &RunConfig, metrics: Option<&Path>, predictions: &[PathBuf], top: usize) -> Result<(), CliError> {
    cfg.check_paths()?;
    for p in metrics.into_iter().chain(predictions.iter().map(PathBuf::as_path)) {
        if !p.exists() {
            return Err(CliError::Data(format!("input path does not exist: {}", p.display())));
        }
    }
    let has_data = cfg.data.dataset.is_some() || cfg.data.fasta.is_some();
    if !has_data && metrics.is_none() {
        return Err(CliError::Usage("report needs --dataset/--fasta, --metrics, or both".into()));
    }
    let mut out = Output::create(cfg)?;

    if let Some(mp) = metrics {
        let v: serde_json::Value = serde_json::from_str(&read_text(mp)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", mp.display())))?;
        let report = v.get("pooled").unwrap_or(&v);
        let per_class = report
            .get("per_class")
            .and_then(|p| p.as_array())
            .ok_or_else(|| CliError::Data(format!("{}: no per-class metrics", mp.display())))?;
        let num = |c: &serde_json::Value, path: &[&str]| -> String {
            let mut cur = c;
            for k in path {
                match cur.get(k) {
                    Some(x) => cur = x,
                    None => return String::new(),
                }
            }
            cur.as_f64().map(|x| x.to_string()).unwrap_or_default()
        };
        let mut s = String::from("label,support,prevalence,precision,recall,f1,mcc,aucpr\n");
        for c in per_class {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.get("label").and_then(|l| l.as_str()).unwrap_or(""),
                c.get("support").and_then(|x| x.as_u64()).map(|x| x.to_string()).unwrap_or_default(),
                num(c, &["prevalence"]),
                num(c, &["precision"]),
                num(c, &["recall"]),
                num(c, &["f1", "value"]),
                num(c, &["mcc", "value"]),
                num(c, &["aucpr", "value"]),
            ));
        }
        let overall = report.get("overall").cloned().unwrap_or_default();
        for key in ["micro_f1", "micro_aucpr", "overall_mcc", "mean_score"] {
            s.push_str(&format!("{key},,,,,,,{}\n", num(&overall, &[key])));
        }
        out.write("metrics_summary.csv", s.as_bytes())?;
    }

    if has_data {
        let ds = load_dataset(cfg)?;
        let n = cfg.ngrams.unwrap_or(3);
        let freqs = token_frequencies(ds.records.iter().map(|r| (r.label(ds.level).unwrap_or(""), r.residues.as_str())), n)
            .map_err(data)?;
        let mut s = String::from("label,rank,token,count\n");
        for (label, toks) in &freqs {
            for (rank, (tok, count)) in toks.iter().take(top).enumerate() {
                s.push_str(&format!("{label},{},{tok},{count}\n", rank + 1));
            }
        }
        out.write("token_frequencies.csv", s.as_bytes())?;

        if !predictions.is_empty() {
            let labels = ds.label_indices();
            let mut named: Vec<(String, Vec<usize>)> = Vec::new();
            for p in predictions {
                let map = read_predictions(p)?;
                let preds = ds
                    .records
                    .iter()
                    .map(|r| {
                        let l = map
                            .get(&r.id)
                            .ok_or_else(|| CliError::Data(format!("{} has no prediction for {}", p.display(), r.id)))?;
                        // a label outside the dataset's classes can never be right
                        Ok(ds.class_names.iter().position(|c| c == l).unwrap_or(usize::MAX))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                let taken: Vec<String> = named.iter().map(|(n, _)| n.clone()).collect();
                named.push((model_name(p, &taken), preds));
            }
            let rep = ensemble_disagreement(&named, &labels).map_err(data)?;
            out.write_json("disagreement.json", &rep)?;
            let mut s = String::from("id,true,outcome");
            for (m, _) in &named {
                s.push_str(&format!(",{m}"));
            }
            s.push('\n');
            let mut outcome = BTreeMap::new();
            for &i in &rep.all_correct {
                outcome.insert(i, "all_correct");
            }
            for &i in &rep.mixed {
                outcome.insert(i, "mixed");
            }
            for &i in &rep.all_wrong {
                outcome.insert(i, "all_wrong");
            }
            for (i, r) in ds.records.iter().enumerate() {
                s.push_str(&format!("{},{},{}", r.id, ds.class_names[labels[i]], outcome.get(&i).copied().unwrap_or("")));
                for (_, preds) in &named {
                    s.push_str(&format!(",{}", ds.class_names.get(preds[i]).map(String::as_str).unwrap_or("other")));
                }
                s.push('\n');
            }
            out.write("disagreement.csv", s.as_bytes())?;
        }
    } else if !predictions.is_empty() {
        return Err(CliError::Usage("--predictions needs --dataset or --fasta for the true labels".into()));
    }
    out.finish("report", cfg)
}
