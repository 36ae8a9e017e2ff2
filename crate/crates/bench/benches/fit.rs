use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use cpforest::{
    featurize, fit_gbrt, fit_random_forest, fit_tree, generate_dataset, GbrtParams, GeneratorConfig, RandomForestParams,
    TreeParams,
};

fn data(n: usize) -> cpforest::Dataset {
    generate_dataset(&GeneratorConfig { noise_sd: 0.05, ..GeneratorConfig::new(n, 1) }).unwrap()
}

fn tree(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_tree");
    for n in [1000, 5000] {
        let ds = data(n);
        g.bench_with_input(BenchmarkId::new("depth_first", n), &ds, |b, ds| {
            b.iter(|| fit_tree(ds, &TreeParams { max_depth: 20, max_leaf_nodes: None, min_samples_leaf: 2 }, None, 0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("best_first_1250", n), &ds, |b, ds| {
            b.iter(|| fit_tree(ds, &TreeParams::tuned_mean_cp(), None, 0).unwrap())
        });
    }
    g.finish();
}

fn ensembles(c: &mut Criterion) {
    let ds = data(2000);
    let mut g = c.benchmark_group("ensembles");
    g.sample_size(10);
    g.bench_function("rf_50_trees", |b| {
        b.iter(|| fit_random_forest(&ds, &RandomForestParams { n_trees: 50, ..RandomForestParams::tuned_mean_cp(1) }).unwrap())
    });
    g.bench_function("gbrt_200_stages", |b| {
        b.iter(|| fit_gbrt(&ds, &GbrtParams { learning_rate: 0.05, n_trees: 200, ..GbrtParams::tuned_mean_cp(1) }).unwrap())
    });
    g.finish();
}

fn predict(c: &mut Criterion) {
    let ds = data(2000);
    let model = fit_gbrt(&ds, &GbrtParams { learning_rate: 0.05, n_trees: 200, ..GbrtParams::tuned_mean_cp(1) }).unwrap();
    let queries: Vec<_> = (0..=180).map(|t| featurize(1e5, 0.5, t as f64)).collect();
    c.bench_function("gbrt_predict_curve_181", |b| {
        b.iter(|| queries.iter().map(|x| model.predict(black_box(x))).sum::<f64>())
    });
}

criterion_group!(benches, tree, ensembles, predict);
criterion_main!(benches);
