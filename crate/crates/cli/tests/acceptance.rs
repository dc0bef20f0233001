//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs under `cargo test` (no libtest harness, so the
//! lines are never captured).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use hostpred::ensemble::{fit_rusboost, fit_tree, RusBoostConfig, TreeParams};
use hostpred::eval::{
    average_precision, confusion, micro_metrics, overall_mcc, per_class_f1, per_class_mcc, pr_curve,
    CvPlan, ConfusionMatrix, HyperParams,
};
use hostpred::ngram::tokenize;
use hostpred::nn::{Graph, MhaParams, Tensor, Var};
use hostpred::pipeline::{run_nested_cv, Corpus, ModelKind, Representation};
use hostpred::pssm::{encode_eg, encode_er, encode_gdpc, sigmoid, Gpssm, Scheme, GROUPS};
use hostpred::seqio::AMINO_ACIDS;
use hostpred::testbench::{generate, synth_pssms, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) || a == b
}

// ---- 1. encoders against loop oracles -------------------------------------

fn random_gpssm(rng: &mut ChaCha8Rng, len: usize) -> Gpssm {
    Gpssm {
        residues: (0..len).map(|_| AMINO_ACIDS[rng.gen_range(0..20)] as char).collect(),
        values: (0..len).map(|_| std::array::from_fn(|_| rng.gen::<f64>())).collect(),
    }
}

fn oracle_eg(g: &Gpssm) -> Vec<f64> {
    let mut out = vec![0.0; 100];
    for (i, members) in GROUPS.iter().enumerate() {
        let rows: Vec<&[f64; 10]> =
            g.residues.chars().zip(&g.values).filter(|(c, _)| members.contains(*c)).map(|(_, r)| r).collect();
        for j in 0..10 {
            if !rows.is_empty() {
                out[i * 10 + j] = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            }
        }
    }
    out
}

fn oracle_gdpc(g: &Gpssm) -> Vec<f64> {
    let l = g.values.len();
    let mut out = vec![0.0; 100];
    for i in 0..10 {
        for j in 0..10 {
            let mut s = 0.0;
            for k in 0..l - 1 {
                s += g.values[k][i] * g.values[k + 1][j];
            }
            out[i * 10 + j] = s / (l - 1) as f64;
        }
    }
    out
}

fn oracle_er(g: &Gpssm) -> Vec<f64> {
    let l = g.values.len();
    let mut out = Vec::with_capacity(910);
    for i in 0..10 {
        for j in 0..10 {
            for t in 1..=9 {
                let mut s = 0.0;
                for k in 0..l - t {
                    s += (g.values[k][i] - g.values[k + t][j]).powi(2) / 2.0;
                }
                out.push(s / (l - t) as f64);
            }
        }
    }
    for i in 0..10 {
        let mean = g.values.iter().map(|r| r[i]).sum::<f64>() / l as f64;
        out.push(g.values.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / l as f64);
    }
    out
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let len = rng.gen_range(10..=40);
        let g = random_gpssm(&mut rng, len);
        let pairs = [
            ("EG", encode_eg(&g).map_err(|e| e.to_string())?.values, oracle_eg(&g), 100),
            ("GDPC", encode_gdpc(&g).map_err(|e| e.to_string())?.values, oracle_gdpc(&g), 100),
            ("ER", encode_er(&g).map_err(|e| e.to_string())?.values, oracle_er(&g), 910),
        ];
        for (name, got, want, dim) in pairs {
            ensure(got.len() == dim, || format!("case {case}: {name} has {} values", got.len()))?;
            for (k, (a, b)) in got.iter().zip(&want).enumerate() {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                worst = worst.max(if a == b { 0.0 } else { rel });
                ensure(close(*a, *b, 1e-12), || format!("case {case}: {name}[{k}] {a} vs oracle {b}"))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!("100 random profiles, worst relative error {worst:.1e}, {secs:.2}s"))
}

// ---- 2. closed forms -----------------------------------------------------

fn criterion_2() -> Check {
    for c in [0.0, 0.37, 1.0] {
        let g = Gpssm { residues: "MLSITILFLAVG".into(), values: vec![[c; 10]; 12] };
        let gdpc = encode_gdpc(&g).map_err(|e| e.to_string())?.values;
        ensure(gdpc.iter().all(|&v| close(v, c * c, 1e-15)), || format!("GDPC of constant {c} is not {}", c * c))?;
        let er = encode_er(&g).map_err(|e| e.to_string())?.values;
        ensure(er.iter().all(|&v| v == 0.0), || format!("ER of constant {c} is not all zero"))?;
    }
    ensure(sigmoid(0.0) == 0.5, || format!("sigmoid(0) = {}", sigmoid(0.0)))?;
    let tokens = tokenize("MLSITILFL", 3).map_err(|e| e.to_string())?;
    let want = ["MLS", "LSI", "SIT", "ITI", "TIL", "ILF", "LFL"];
    ensure(tokens == want, || format!("trigrams {tokens:?}"))?;
    Ok("GDPC = c², ER = 0, sigmoid(0) = 0.5, 7 trigrams of MLSITILFL".into())
}

// ---- 3. gradients --------------------------------------------------------

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Central differences against the tape for every input element; returns the
/// largest relative error.
fn grad_check(inputs: &[Tensor], f: &dyn Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let run = |ins: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars);
        (g, vars, out)
    };
    let (g, vars, out) = run(inputs);
    let grads = g.backward(out);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
        for i in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data[i] += eps;
            let mut minus = inputs.to_vec();
            minus[k].data[i] -= eps;
            let (gp, _, op) = run(&plus);
            let (gm, _, om) = run(&minus);
            let numeric = (gp.value(op).data[0] - gm.value(om).data[0]) / (2.0 * eps);
            let rel = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Reduces any output to a scalar with fixed random weights so every output
/// element contributes a distinct gradient.
fn project(g: &mut Graph, y: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let w: Vec<f64> = (0..g.value(y).len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    g.weighted_sum(y, &w).unwrap()
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut report = Vec::new();
    let ops: Vec<(&str, Box<dyn Fn(u64) -> f64>)> = vec![
        ("dense", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let ins = [rand_tensor(&mut r, &[3, 4]), rand_tensor(&mut r, &[4, 5]), rand_tensor(&mut r, &[5])];
            grad_check(&ins, &|g, v| {
                let y = g.linear(v[0], v[1], v[2]).unwrap();
                project(g, y, s)
            })
        })),
        ("conv1d", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let ins = [rand_tensor(&mut r, &[2, 6, 3]), rand_tensor(&mut r, &[3, 3, 4]), rand_tensor(&mut r, &[4])];
            grad_check(&ins, &|g, v| {
                let y = g.conv1d(v[0], v[1], v[2]).unwrap();
                project(g, y, s)
            })
        })),
        ("maxpool", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let ins = [rand_tensor(&mut r, &[2, 7, 3])];
            grad_check(&ins, &|g, v| {
                let y = g.maxpool1d(v[0], 2).unwrap();
                project(g, y, s)
            })
        })),
        ("embedding", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let ins = [rand_tensor(&mut r, &[6, 4])];
            let ids: Vec<usize> = (0..10).map(|_| r.gen_range(0..6)).collect();
            grad_check(&ins, &|g, v| {
                let y = g.embedding(v[0], &ids, &[2, 5]).unwrap();
                project(g, y, s)
            })
        })),
        ("attention", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let ins = [rand_tensor(&mut r, &[2, 4, 3]), rand_tensor(&mut r, &[2, 4, 3]), rand_tensor(&mut r, &[2, 4, 3])];
            grad_check(&ins, &|g, v| {
                let y = g.attention(v[0], v[1], v[2]).unwrap();
                project(g, y, s)
            })
        })),
        ("multi-head", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let d = 4;
            let mut ins = vec![rand_tensor(&mut r, &[2, 3, d])];
            for _ in 0..4 {
                ins.push(rand_tensor(&mut r, &[d, d]));
                ins.push(rand_tensor(&mut r, &[d]));
            }
            grad_check(&ins, &|g, v| {
                let p = MhaParams { wq: v[1], bq: v[2], wk: v[3], bk: v[4], wv: v[5], bv: v[6], wo: v[7], bo: v[8] };
                let y = g.multi_head_attention(v[0], &p, 2).unwrap();
                project(g, y, s)
            })
        })),
        ("layer norm", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let ins = [rand_tensor(&mut r, &[3, 5]), rand_tensor(&mut r, &[5]), rand_tensor(&mut r, &[5])];
            grad_check(&ins, &|g, v| {
                let y = g.layer_norm(v[0], v[1], v[2]).unwrap();
                project(g, y, s)
            })
        })),
        ("softmax cross-entropy", Box::new(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let ins = [rand_tensor(&mut r, &[4, 3])];
            let labels: Vec<usize> = (0..4).map(|_| r.gen_range(0..3)).collect();
            grad_check(&ins, &|g, v| g.softmax_cross_entropy(v[0], &labels).unwrap())
        })),
    ];
    for (name, op) in &ops {
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let e = op(seed);
            ensure(e < 1e-4, || format!("{name} seed {seed}: relative error {e:.2e}"))?;
            worst = worst.max(e);
        }
        report.push(format!("{name} {worst:.0e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("10 seeds each, worst: {} ({secs:.1}s)", report.join(", ")))
}

// ---- 4. metrics against oracles -------------------------------------------

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let n = rng.gen_range(2..=5);
        let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let len = rng.gen_range(5..80);
        let yt: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n)).collect();
        let yp: Vec<usize> = yt.iter().map(|&t| if rng.gen_bool(0.6) { t } else { rng.gen_range(0..n) }).collect();
        let cm = confusion(&yt, &yp, &names).map_err(|e| e.to_string())?;
        let (f1, mcc) = (per_class_f1(&cm), per_class_mcc(&cm));
        for c in 0..n {
            let count = |pt: bool, pp: bool| yt.iter().zip(&yp).filter(|&(&t, &p)| (t == c) == pt && (p == c) == pp).count() as f64;
            let (tp, fp, fn_, tn) = (count(true, true), count(false, true), count(true, false), count(false, false));
            let f1_o = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
            let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
            let mcc_o = if den == 0.0 { 0.0 } else { (tp * tn - fp * fn_) / den };
            ensure((f1[c].value - f1_o).abs() < 1e-12, || format!("case {case}: F1[{c}] {} vs {f1_o}", f1[c].value))?;
            ensure((mcc[c].value - mcc_o).abs() < 1e-12, || format!("case {case}: MCC[{c}] {} vs {mcc_o}", mcc[c].value))?;
        }
        // overall MCC as the correlation of one-hot indicator matrices
        let s = len as f64;
        let ind = |y: &[usize], k: usize| -> Vec<f64> { y.iter().map(|&v| (v == k) as u8 as f64).collect() };
        let cov = |a: &[usize], b: &[usize]| -> f64 {
            (0..n)
                .map(|k| {
                    let (x, y) = (ind(a, k), ind(b, k));
                    let (mx, my) = (x.iter().sum::<f64>() / s, y.iter().sum::<f64>() / s);
                    x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>()
                })
                .sum()
        };
        let den = (cov(&yt, &yt) * cov(&yp, &yp)).sqrt();
        let omcc_o = if den == 0.0 { 0.0 } else { cov(&yt, &yp) / den };
        let omcc = overall_mcc(&cm).value;
        ensure((omcc - omcc_o).abs() < 1e-12, || format!("case {case}: overall MCC {omcc} vs {omcc_o}"))?;

        // micro F1 from probabilities whose argmax is yp
        let prob: Vec<Vec<f64>> = yp
            .iter()
            .map(|&p| (0..n).map(|k| if k == p { 0.5 } else { 0.5 / (n - 1) as f64 - 1e-3 }).collect())
            .collect();
        let micro = micro_metrics(&prob, &yt).map_err(|e| e.to_string())?;
        let acc = yt.iter().zip(&yp).filter(|(t, p)| t == p).count() as f64 / s;
        ensure(micro.micro_f1 == acc, || format!("case {case}: micro F1 {} != accuracy {acc}", micro.micro_f1))?;

        // AP: mean precision at each positive's rank, ties counted together
        let scores: Vec<f64> = (0..len).map(|_| rng.gen_range(0..6) as f64).collect();
        let mut positive: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.3)).collect();
        positive[0] = true;
        let ap = average_precision(&pr_curve(&scores, &positive).map_err(|e| e.to_string())?);
        let mut acc_p = 0.0;
        for i in (0..len).filter(|&i| positive[i]) {
            let above = (0..len).filter(|&j| scores[j] >= scores[i]).count() as f64;
            let hits = (0..len).filter(|&j| scores[j] >= scores[i] && positive[j]).count() as f64;
            acc_p += hits / above;
        }
        let ap_o = acc_p / positive.iter().filter(|&&p| p).count() as f64;
        ensure((ap - ap_o).abs() < 1e-12, || format!("case {case}: AP {ap} vs {ap_o}"))?;
    }
    let cm = ConfusionMatrix { counts: vec![vec![2, 1], vec![1, 2]], class_names: vec!["a".into(), "b".into()] };
    let omcc = overall_mcc(&cm).value;
    ensure((omcc - 1.0 / 3.0).abs() < 1e-15, || format!("[[2,1],[1,2]] overall MCC {omcc}"))?;
    let ap = average_precision(&pr_curve(&[0.9, 0.8, 0.7], &[true, false, true]).map_err(|e| e.to_string())?);
    ensure((ap - 5.0 / 6.0).abs() < 1e-15, || format!("AP {ap}"))?;
    Ok("100 random cases: F1, MCC, overall MCC, micro F1 = accuracy, AP; 1/3 and 5/6 exact".into())
}

// ---- 5. CV integrity -----------------------------------------------------

fn criterion_5() -> Check {
    let ds = generate(&SynthSpec::coarse(500, [0.5, 0.3, 0.2], 5)).map_err(|e| e.to_string())?;
    let labels = ds.label_indices();
    let plan = CvPlan::new(&labels, 5, 4, 17).map_err(|e| e.to_string())?;
    let mut seen: Vec<usize> = plan.outer.concat();
    seen.sort_unstable();
    ensure(seen == (0..500).collect::<Vec<_>>(), || "outer test folds do not partition the records".into())?;

    let deviation = |pool: &[usize], folds: &[Vec<usize>]| -> f64 {
        let k = folds.len() as f64;
        let mut worst: f64 = 0.0;
        for c in 0..ds.class_names.len() {
            let total = pool.iter().filter(|&&i| labels[i] == c).count() as f64;
            for f in folds {
                let here = f.iter().filter(|&&i| labels[i] == c).count() as f64;
                worst = worst.max((here - total / k).abs());
            }
        }
        worst
    };
    let all: Vec<usize> = (0..500).collect();
    let mut worst = deviation(&all, &plan.outer);
    for f in 0..5 {
        let (train, test) = plan.outer_split(f);
        ensure(train.iter().all(|i| test.binary_search(i).is_err()), || format!("outer fold {f} leaks"))?;
        worst = worst.max(deviation(&train, &plan.inner[f]));
    }
    ensure(worst <= 1.0, || format!("stratification deviation {worst}"))?;

    let again = CvPlan::new(&labels, 5, 4, 17).map_err(|e| e.to_string())?;
    let (a, b) = (serde_json::to_vec(&plan).unwrap(), serde_json::to_vec(&again).unwrap());
    ensure(a == b, || "plan differs on rerun".into())?;

    // a tiny forest run must repeat byte for byte too
    let corpus = Corpus::from_dataset(&ds).with_pssm_features(&synth_pssms(&ds, 5), Scheme::Eg).map_err(|e| e.to_string())?;
    let grid: Vec<HyperParams> = vec![[("n_estimators", 5.0), ("max_depth", 4.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect()];
    let run = || {
        run_nested_cv(&corpus, ModelKind::Rf, Representation::Pssm(Scheme::Eg), &grid, &plan)
            .map(|o| serde_json::to_vec(&o).unwrap())
            .map_err(|e| e.to_string())
    };
    ensure(run()? == run()?, || "nested CV output differs on rerun".into())?;
    Ok(format!("500 records, 5×4 folds, max per-class deviation {worst:.2}, rerun byte-identical"))
}

// ---- 6. end-to-end learnability -------------------------------------------

fn criterion_6() -> Check {
    let start = Instant::now();
    let ds = generate(&SynthSpec::coarse(600, [0.4, 0.35, 0.25], 42)).map_err(|e| e.to_string())?;
    let corpus = Corpus::from_dataset(&ds)
        .with_pssm_features(&synth_pssms(&ds, 7), Scheme::Er)
        .map_err(|e| e.to_string())?;
    let plan = CvPlan::new(&corpus.labels, 5, 4, 11).map_err(|e| e.to_string())?;
    let point = |kv: &[(&str, f64)]| -> Vec<HyperParams> { vec![kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()] };

    let runs = [
        ("random forest on ER", ModelKind::Rf, Representation::Pssm(Scheme::Er), point(&[("n_estimators", 50.0), ("max_depth", 10.0)])),
        (
            "3-gram transformer",
            ModelKind::Transformer,
            Representation::Ngrams(3),
            point(&[("embed_dim", 32.0), ("num_heads", 1.0), ("epochs", 30.0), ("batch_size", 32.0), ("learning_rate", 0.001)]),
        ),
    ];
    let mut parts = Vec::new();
    for (name, kind, repr, grid) in runs {
        let out = run_nested_cv(&corpus, kind, repr, &grid, &plan).map_err(|e| format!("{name}: {e}"))?;
        let pooled = out.pooled.overall.mean_score;
        let fold_mean = out.fold_mean.mean_score;
        ensure(pooled >= 0.90 && fold_mean >= 0.90, || format!("{name}: mean score {pooled:.3} (folds {fold_mean:.3})"))?;
        for c in &out.pooled.per_class {
            ensure(c.aucpr.value > c.prevalence, || format!("{name}: {} AUCPR {:.3} <= prevalence {:.3}", c.label, c.aucpr.value, c.prevalence))?;
        }
        let min_gap = out.pooled.per_class.iter().map(|c| c.aucpr.value - c.prevalence).fold(f64::INFINITY, f64::min);
        parts.push(format!("{name} {pooled:.3} (min AUCPR lift {min_gap:.2})"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), || format!("took {:.0}s", elapsed.as_secs_f64()))?;
    Ok(format!("{}; {:.0}s", parts.join(", "), elapsed.as_secs_f64()))
}

// ---- 7. imbalance --------------------------------------------------------

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sample = |major: usize, minor: usize| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (class, count, centre) in [(0usize, major, 0.0), (1, minor, 1.2)] {
            for _ in 0..count {
                x.push(vec![centre + rng.gen_range(-1.5..1.5), centre + rng.gen_range(-1.5..1.5)]);
                y.push(class);
            }
        }
        (x, y)
    };
    let (x, y) = sample(900, 100);
    let (xt, yt) = sample(900, 100);
    let recall = |pred: &[usize]| {
        pred.iter().zip(&yt).filter(|&(&p, &t)| p == 1 && t == 1).count() as f64 / 100.0
    };
    let mut tree_rng = ChaCha8Rng::seed_from_u64(70);
    let tree = fit_tree(&x, &y, None, 2, TreeParams { max_depth: 3, features_per_split: None }, &mut tree_rng)
        .map_err(|e| e.to_string())?;
    let tree_recall = recall(&tree.predict(&xt).map_err(|e| e.to_string())?);
    let boost = fit_rusboost(&x, &y, 2, &RusBoostConfig { n_estimators: 50, learning_rate: 0.1, max_depth: 3, seed: 71 })
        .map_err(|e| e.to_string())?;
    let proba = boost.predict_proba(&xt).map_err(|e| e.to_string())?;
    let boost_recall = recall(&proba.iter().map(|p| (p[1] > p[0]) as usize).collect::<Vec<_>>());
    ensure(boost_recall > tree_recall, || format!("RUSBoost minority recall {boost_recall:.2} vs tree {tree_recall:.2}"))?;
    Ok(format!("9:1 set, minority recall RUSBoost {boost_recall:.2} vs single tree {tree_recall:.2}"))
}

// ---- 8. CLI determinism ---------------------------------------------------

fn criterion_8() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_hostpred");
    let run = |args: &[&str]| -> Result<(), String> {
        let o = Command::new(bin).args(args).current_dir(dir.path()).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    };
    run(&["synth", "--records", "150", "--classes", "3", "--seed", "8", "--pssm", "--out", "data"])?;
    let config = r#"{
        "seed": 8, "model": "rf", "scheme": "er",
        "data": {"dataset": "data/dataset.json", "pssm_dir": "data/pssm"},
        "grid": {"n_estimators": [10, 20], "max_depth": [4, 8]},
        "cv": {"k_outer": 5, "k_inner": 4}
    }"#;
    std::fs::write(dir.path().join("run.json"), config).map_err(|e| e.to_string())?;
    run(&["nested-cv", "--config", "run.json", "--out", "a"])?;
    run(&["nested-cv", "--config", "run.json", "--out", "b"])?;
    let read = |p: &str| std::fs::read(dir.path().join(p)).map_err(|e| e.to_string());
    let (a, b) = (read("a/metrics.json")?, read("b/metrics.json")?);
    ensure(a == b, || "metrics.json differs between runs".into())?;
    ensure(read("a/oof_predictions.csv")? == read("b/oof_predictions.csv")?, || "predictions differ".into())?;
    Ok(format!("two nested-cv runs, metrics.json identical ({} bytes)", a.len()))
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let criteria: [(&str, fn() -> Check); 8] = [
        ("encoder oracle equivalence", criterion_1),
        ("closed forms", criterion_2),
        ("gradient suite", criterion_3),
        ("metric oracle equivalence", criterion_4),
        ("CV integrity", criterion_5),
        ("end-to-end learnability", criterion_6),
        ("imbalance behavior", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
