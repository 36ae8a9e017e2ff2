//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.

mod support;

use std::path::Path;
use std::time::Instant;

use clap::Parser;
use cpforest::evaluation::{cross_validate, run_ttv, run_ttv_with, Grid, LearnerSpec};
use cpforest::seed::rng;
use cpforest::ensemble::fit_gbrt_with;
use cpforest::synthetic::curve_params;
use cpforest::{
    featurize, generate_dataset, gini_index, mse, Dataset, FeatureVector, FoldAssignment,
    GbrtParams, GeneratorConfig, ModelFile, RandomForestParams, Sample, TargetKind, TreeParams,
};
use cpforest_cli::{run, Cli};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn noisy_mean_cp(n: usize, seed: u64) -> Dataset {
    generate_dataset(&GeneratorConfig { noise_sd: 0.05, ..GeneratorConfig::new(n, seed) }).expect("generator")
}

fn scaled_dtr() -> LearnerSpec {
    LearnerSpec::Dtr(TreeParams { max_depth: 20, max_leaf_nodes: Some(1250), min_samples_leaf: 2 })
}

fn scaled_rf(seed: u64) -> LearnerSpec {
    LearnerSpec::Rf(RandomForestParams {
        n_trees: 50,
        n_features: 1,
        tree: TreeParams { max_depth: 20, max_leaf_nodes: None, min_samples_leaf: 1 },
        bootstrap: true,
        seed,
    })
}

fn scaled_gbrt(seed: u64) -> LearnerSpec {
    LearnerSpec::Gbrt(GbrtParams { learning_rate: 0.05, max_depth: 8, n_trees: 500, subsample: 0.3, min_samples_leaf: 1, seed })
}

fn criterion_1() -> Outcome {
    let cases: [(&[f64], f64); 3] = [(&[1.0], 0.0), (&[0.5, 0.5], 0.5), (&[0.7, 0.3], 0.42)];
    let mut worst: f64 = 0.0;
    for (p, want) in cases {
        let got = gini_index(p).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
    }
    check(worst <= 1e-12, format!("max |error| = {worst:e}"))
}

fn criterion_2() -> Outcome {
    let mut mismatches = Vec::new();
    for case in 0..50u64 {
        let mut r = rng(0xc0ffee + case);
        let n = r.random_range(2..=30);
        let coarse = case % 2 == 0;
        let draw = |r: &mut dyn rand::RngCore| if coarse { r.random_range(0..6) as f64 } else { r.random::<f64>() };
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(vec![draw(&mut r), draw(&mut r)]);
            ys.push(r.random::<f64>());
        }
        let depth = 1 + (case as usize % 3);
        let features: Vec<FeatureVector> = xs.iter().map(|x| FeatureVector([x[0], x[1], 0.0])).collect();
        let set = cpforest::cart::TrainingSet::new(&features, &ys).map_err(|e| e.to_string())?;
        let params = TreeParams { max_depth: depth, max_leaf_nodes: None, min_samples_leaf: 1 };
        let tree = cpforest::cart::fit_tree_on(set, (0..n).collect(), &params, None, 0).map_err(|e| e.to_string())?;
        if tree.split_sequence() != support::greedy_splits(&xs, &ys, depth) {
            mismatches.push(case);
        }
    }
    check(mismatches.is_empty(), format!("50 datasets, mismatching cases: {mismatches:?}"))
}

fn criterion_3() -> Outcome {
    let ds = noisy_mean_cp(2000, 3);
    let params = GbrtParams { learning_rate: 0.05, max_depth: 4, n_trees: 200, subsample: 1.0, min_samples_leaf: 1, seed: 3 };
    let truths = ds.targets();
    let mut losses = Vec::new();
    fit_gbrt_with(&ds, &params, |_, preds| losses.push(mse(preds, &truths).expect("mse"))).map_err(|e| e.to_string())?;
    let worst = losses.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    check(
        losses.len() == 200 && worst <= 1e-12,
        format!("{} stages, loss {:.5} -> {:.5}, largest step increase {worst:e}", losses.len(), losses[0], losses[losses.len() - 1]),
    )
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in [1u64, 2, 3] {
        let ds = noisy_mean_cp(5000, seed);
        let score = |spec: LearnerSpec| cross_validate(&spec, &ds, 10, seed).map(|r| r.mean_mse).map_err(|e| e.to_string());
        let (dtr, rf, gbrt) = (score(scaled_dtr())?, score(scaled_rf(seed))?, score(scaled_gbrt(seed))?);
        ok &= gbrt <= rf && rf <= dtr;
        lines.push(format!("seed {seed}: gbrt={gbrt:.5} rf={rf:.5} dtr={dtr:.5}"));
    }
    check(ok, format!("want gbrt <= rf <= dtr; {}", lines.join("; ")))
}

/// Runs the three-stage protocol on the criterion-4 dataset and saves the
/// refitted winner for the curve check.
fn criterion_5(model_path: &Path) -> Outcome {
    let seed = 1;
    let ds = noisy_mean_cp(5000, seed);
    let grids = [Grid::single(scaled_dtr()), Grid::single(scaled_rf(seed)), Grid::single(scaled_gbrt(seed))];
    let res = run_ttv(&ds, &grids, seed).map_err(|e| e.to_string())?;
    let train = ds.subset(&res.train_indices);
    ModelFile::new(res.chosen, res.model.clone(), &train, seed).save(model_path).map_err(|e| e.to_string())?;
    let kind = res.chosen.kind();
    check(
        kind == cpforest::LearnerKind::Gbrt && res.test_r2 >= 0.95,
        format!("chosen={kind} test_r2={:.4} test_mse={:.5}", res.test_r2, res.test_mse),
    )
}

fn criterion_6(model_path: &Path, dir: &Path) -> Outcome {
    let (re, ti) = (1e5, 0.5);
    let out = dir.join("curve.csv");
    let args = ["cpforest", "curve", "--model", path_str(model_path), "--re", "1e5", "--ti", "0.5", "--step", "1", "--out", path_str(&out)];
    run(Cli::parse_from(args), &mut Vec::new()).map_err(|e| format!("{e:#}"))?;
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (t, c) = l.split_once(',').expect("two columns");
            (t.parse().expect("theta"), c.parse().expect("cp_hat"))
        })
        .collect();
    let cp: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let max = cp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = cp.iter().copied().fold(f64::INFINITY, f64::min);
    let at_zero = cp[0];
    let max_ok = at_zero == max && (at_zero - 1.0).abs() <= 0.05;

    // The minimum is unique if the angles attaining it form one contiguous run.
    let argmins: Vec<usize> = (0..cp.len()).filter(|&i| cp[i] == min).collect();
    let contiguous = argmins.windows(2).all(|w| w[1] == w[0] + 1);
    let (lo, hi) = (rows[argmins[0]].0, rows[argmins[argmins.len() - 1]].0);
    let min_ok = contiguous && lo > 40.0 && hi < 110.0;

    let theta_s = curve_params(re, ti).map_err(|e| e.to_string())?.theta_s;
    let wake: Vec<f64> = rows.iter().filter(|r| r.0 > theta_s + 10.0).map(|r| r.1).collect();
    let p2p = wake.iter().copied().fold(f64::NEG_INFINITY, f64::max) - wake.iter().copied().fold(f64::INFINITY, f64::min);
    let wake_ok = !wake.is_empty() && p2p < 0.15;
    check(
        rows.len() == 181 && max_ok && min_ok && wake_ok,
        format!(
            "rows={} cp(0)={at_zero:.4} max={max:.4}; min={min:.4} at theta {lo}..{hi} (runs contiguous: {contiguous}); wake theta>{:.1}: p2p={p2p:.4}",
            rows.len(),
            theta_s + 10.0
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let mut bad = Vec::new();
    for _ in 0..100 {
        let n = r.random_range(2..=500);
        let k = r.random_range(2..=n.min(20));
        let seed: u64 = r.random();
        let folds = FoldAssignment::new(n, k, seed).map_err(|e| e.to_string())?;
        let mut seen = vec![0usize; n];
        for f in 0..k {
            for i in folds.test_indices(f) {
                seen[i] += 1;
            }
        }
        let sizes = folds.fold_sizes();
        let balanced = sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1;
        if !(seen.iter().all(|&c| c == 1) && balanced) {
            bad.push((n, k, seed));
        }
    }

    let ds = Dataset::new(
        TargetKind::MeanCp,
        (0..200).map(|i| Sample::new(1e5, 1.0, i as f64 * 0.9, i as f64).expect("sample")).collect(),
    );
    let constant = LearnerSpec::Gbrt(GbrtParams { n_trees: 0, ..GbrtParams::tuned_mean_cp(0) });
    let res = run_ttv_with(&ds, &[Grid::single(constant)], 0.1, 10, 11).map_err(|e| e.to_string())?;
    let mut in_folds: Vec<usize> = (0..res.folds.k())
        .flat_map(|f| res.folds.test_indices(f))
        .map(|i| res.train_indices[i])
        .collect();
    in_folds.sort_unstable();
    let disjoint = in_folds.iter().all(|i| res.test_indices.binary_search(i).is_err());
    let covers = in_folds == res.train_indices;
    check(
        bad.is_empty() && disjoint && covers,
        format!("100 triples, violations {bad:?}; ttv test/fold disjoint={disjoint}, folds cover train={covers}"),
    )
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn criterion_8(dir: &Path) -> Outcome {
    let ds = noisy_mean_cp(2000, 8);
    let data = dir.join("det.csv");
    ds.write_csv(std::fs::File::create(&data).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;
    for learner in ["dtr", "rf", "gbrt"] {
        let mut files = Vec::new();
        for (run_no, workers) in [1, 1, 4].into_iter().enumerate() {
            let out = dir.join(format!("{learner}-{run_no}.json"));
            let args = [
                "cpforest", "--workers", &workers.to_string(), "train", "--data", path_str(&data), "--learner", learner,
                "--seed", "42", "--out", path_str(&out),
            ];
            run(Cli::try_parse_from(args).map_err(|e| e.to_string())?, &mut Vec::new()).map_err(|e| format!("{e:#}"))?;
            files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        let same = files.windows(2).all(|w| w[0] == w[1]);
        ok &= same;
        notes.push(format!("{learner}: {} bytes, identical across runs and workers 1/4: {same}", files[0].len()));
    }
    check(ok, notes.join("; "))
}

fn criterion_9(dir: &Path) -> Outcome {
    let ds = noisy_mean_cp(2000, 9);
    let mut grid = Vec::with_capacity(1000);
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                let re = 10f64.powf(4.0 + 2.0 * i as f64 / 9.0);
                grid.push(featurize(re, 15.0 * j as f64 / 9.0, 180.0 * k as f64 / 9.0));
            }
        }
    }
    let mut notes = Vec::new();
    let mut ok = true;
    for spec in [scaled_dtr(), scaled_rf(9), scaled_gbrt(9)] {
        let model = ModelFile::train(spec, &ds, 9).map_err(|e| e.to_string())?;
        let path = dir.join(format!("{}.json", spec.kind()));
        model.save(&path).map_err(|e| e.to_string())?;
        let loaded = ModelFile::load(&path).map_err(|e| e.to_string())?;
        let worst = grid.iter().map(|x| (model.predict(x) - loaded.predict(x)).abs()).fold(0.0, f64::max);
        ok &= worst <= 1e-15;
        notes.push(format!("{}: max |diff| = {worst:e}", spec.kind()));
    }
    check(ok, format!("1000-point grid; {}", notes.join("; ")))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let model_path = dir.path().join("ttv-model.json");
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "gini golden values", Box::new(criterion_1)),
        (2, "split search matches brute-force oracle", Box::new(criterion_2)),
        (3, "gbrt training loss non-increasing", Box::new(criterion_3)),
        (4, "cv ranking gbrt <= rf <= dtr", Box::new(criterion_4)),
        (5, "ttv selects gbrt with test r2 >= 0.95", Box::new(|| criterion_5(&model_path))),
        (6, "curve shape at re=1e5 ti=0.5", Box::new(|| criterion_6(&model_path, dir.path()))),
        (7, "fold and ttv partition laws", Box::new(criterion_7)),
        (8, "train is byte-deterministic", Box::new(|| criterion_8(dir.path()))),
        (9, "persistence fidelity", Box::new(|| criterion_9(dir.path()))),
    ];
    let mut failed = 0;
    for (id, name, f) in &criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS [{secs:.1}s] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL [{secs:.1}s] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
