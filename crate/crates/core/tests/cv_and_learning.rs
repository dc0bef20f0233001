use std::collections::HashMap;

use hostpred::ensemble::{fit_rusboost, fit_tree, RusBoostConfig, TreeParams};
use hostpred::eval::{stratified_kfold, CvPlan, HyperParams};
use hostpred::ngram::tokenize;
use hostpred::pipeline::{run_nested_cv, Corpus, ModelKind, Representation};
use hostpred::pssm::Scheme;
use hostpred::testbench::{generate, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_fold_deviation(labels: &[usize], folds: &[Vec<usize>]) -> f64 {
    let k = folds.len() as f64;
    let n_classes = labels.iter().max().unwrap() + 1;
    let mut worst: f64 = 0.0;
    for c in 0..n_classes {
        let total = labels.iter().filter(|&&y| y == c).count() as f64;
        for f in folds {
            let here = f.iter().filter(|&&i| labels[i] == c).count() as f64;
            worst = worst.max((here - total / k).abs());
        }
    }
    worst
}

#[test]
fn fine_corpus_folds_are_stratified() {
    let ds = generate(&SynthSpec::fine(520, 3)).unwrap();
    assert_eq!(ds.class_names.len(), 26);
    let labels = ds.label_indices();
    for k in [3, 5, 10] {
        let folds = stratified_kfold(&labels, k, 9).unwrap();
        assert!(max_fold_deviation(&labels, &folds) <= 1.0, "k={k}");
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }
}

#[test]
fn outer_and_inner_proportions_on_100_records() {
    let ds = generate(&SynthSpec::balanced(100, 2, 5).unwrap()).unwrap();
    let plan = CvPlan::new(&ds.label_indices(), 5, 4, 1).unwrap();
    for f in 0..5 {
        let (train, test) = plan.outer_split(f);
        assert_eq!((train.len(), test.len()), (80, 20));
        assert!(train.iter().all(|i| test.binary_search(i).is_err()));
        for i in 0..4 {
            let (fit, val) = plan.inner_split(f, i);
            assert_eq!((fit.len(), val.len()), (60, 20));
            assert!(val.iter().all(|v| train.binary_search(v).is_ok()));
        }
    }
}

/// Counts of each trigram, as a sparse vector.
fn trigram_bag(residues: &str) -> HashMap<String, f64> {
    let mut bag = HashMap::new();
    for t in tokenize(residues, 3).unwrap() {
        *bag.entry(t).or_insert(0.0) += 1.0;
    }
    bag
}

#[test]
fn trigram_centroids_separate_generated_classes() {
    let ds = generate(&SynthSpec::coarse(600, [0.4, 0.35, 0.25], 21)).unwrap();
    let labels = ds.label_indices();
    let bags: Vec<HashMap<String, f64>> = ds.records.iter().map(|r| trigram_bag(&r.residues)).collect();
    let (train, test) = (0..400, 400..600);

    let mut centroids = vec![HashMap::<String, f64>::new(); ds.class_names.len()];
    let mut counts = vec![0.0; ds.class_names.len()];
    for i in train {
        counts[labels[i]] += 1.0;
        for (t, v) in &bags[i] {
            *centroids[labels[i]].entry(t.clone()).or_insert(0.0) += v;
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        c.values_mut().for_each(|v| *v /= n);
    }
    let dist = |bag: &HashMap<String, f64>, c: &HashMap<String, f64>| -> f64 {
        let mut d: f64 = c.iter().map(|(t, v)| (bag.get(t).unwrap_or(&0.0) - v).powi(2)).sum();
        d += bag.iter().filter(|(t, _)| !c.contains_key(*t)).map(|(_, v)| v * v).sum::<f64>();
        d
    };
    let correct = test
        .clone()
        .filter(|&i| {
            let best = (0..centroids.len())
                .min_by(|&a, &b| dist(&bags[i], &centroids[a]).total_cmp(&dist(&bags[i], &centroids[b])))
                .unwrap();
            best == labels[i]
        })
        .count();
    let acc = correct as f64 / test.len() as f64;
    assert!(acc > 0.95, "nearest-centroid accuracy {acc}");
}

#[test]
fn starved_grid_point_loses_the_inner_search() {
    // separable toy: the class is the sign of the first feature
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            let mut r: Vec<f64> = (0..Scheme::Eg.dim()).map(|_| rng.gen_range(-0.1..0.1)).collect();
            r[0] = if y == 1 { 1.0 } else { -1.0 } + rng.gen_range(-0.2..0.2);
            r
        })
        .collect();
    let corpus = Corpus {
        ids: (0..n).map(|i| format!("r{i}")).collect(),
        residues: vec!["ACDEFGHIKL".to_string(); n],
        labels: labels.clone(),
        class_names: vec!["a".into(), "b".into()],
        features: Some((Scheme::Eg, rows)),
    };
    let point = |epochs: f64, lr: f64| -> HyperParams {
        [("epochs", epochs), ("learning_rate", lr), ("hidden", 8.0), ("batch_size", 16.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    };
    let grid = vec![point(1.0, 1e-5), point(60.0, 1e-2)];
    let plan = CvPlan::new(&labels, 5, 4, 2).unwrap();
    let out = run_nested_cv(&corpus, ModelKind::Mlp, Representation::Pssm(Scheme::Eg), &grid, &plan).unwrap();
    let picked_trained = out.folds.iter().filter(|f| f.chosen_index == 1).count();
    assert!(picked_trained >= 4, "trained point chosen on {picked_trained}/5 folds");
    assert!(out.pooled.overall.micro_f1 > 0.9);
}

fn imbalanced(rng: &mut ChaCha8Rng, n_major: usize, n_minor: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (class, count, centre) in [(0, n_major, 0.0), (1, n_minor, 1.2)] {
        for _ in 0..count {
            x.push((0..2).map(|_| centre + rng.gen_range(-1.5..1.5)).collect());
            y.push(class);
        }
    }
    (x, y)
}

fn minority_recall(pred: &[usize], y: &[usize]) -> f64 {
    let pos = y.iter().filter(|&&c| c == 1).count() as f64;
    pred.iter().zip(y).filter(|&(&p, &t)| p == 1 && t == 1).count() as f64 / pos
}

#[test]
fn rusboost_recovers_more_of_the_minority_than_one_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, y) = imbalanced(&mut rng, 900, 100);
    let (xt, yt) = imbalanced(&mut rng, 900, 100);
    let tree = fit_tree(&x, &y, None, 2, TreeParams { max_depth: 3, features_per_split: None }, &mut rng).unwrap();
    let tree_recall = minority_recall(&tree.predict(&xt).unwrap(), &yt);
    let cfg = RusBoostConfig { n_estimators: 50, learning_rate: 0.1, max_depth: 3, seed: 1 };
    let boost = fit_rusboost(&x, &y, 2, &cfg).unwrap();
    let pred: Vec<usize> = boost.predict_proba(&xt).unwrap().iter().map(|p| (p[1] > p[0]) as usize).collect();
    let boost_recall = minority_recall(&pred, &yt);
    assert!(boost_recall > tree_recall, "rusboost {boost_recall} vs tree {tree_recall}");
}
