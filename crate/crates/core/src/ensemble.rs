//! Random forests and stochastic gradient-boosted regression trees.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{fit_tree_on, RegressionTree, TrainingSet, TreeParams};
use crate::dataset::{Dataset, FeatureVector, N_FEATURES};
use crate::error::{param, Result};
use crate::seed::{self, derive_seed};

/// Row indices of a with-replacement resample of size `n`.
pub fn bootstrap_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

pub fn bootstrap_sample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(param("bootstrap_sample: empty dataset"));
    }
    Ok(ds.subset(&bootstrap_indices(ds.len(), seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_trees: usize,
    /// Features drawn at every node.
    pub n_features: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl RandomForestParams {
    /// 150 trees, one feature per node, depth 20: tuned for mean Cp.
    pub fn tuned_mean_cp(seed: u64) -> Self {
        RandomForestParams {
            n_trees: 150,
            n_features: 1,
            tree: TreeParams { max_depth: 20, max_leaf_nodes: None, min_samples_leaf: 1 },
            bootstrap: true,
            seed,
        }
    }

    /// 150 trees, two features per node, depth 20: tuned for fluctuating Cp.
    pub fn tuned_rms_cp(seed: u64) -> Self {
        RandomForestParams { n_features: 2, ..Self::tuned_mean_cp(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(param("random forest needs n_trees >= 1"));
        }
        if !(1..=N_FEATURES).contains(&self.n_features) {
            return Err(param(format!("n_features = {}: must lie in [1, {N_FEATURES}]", self.n_features)));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub params: RandomForestParams,
    pub trees: Vec<RegressionTree>,
}

impl RandomForestModel {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Fits `n_trees` trees independently; tree `i` uses seeds derived from
/// `(params.seed, i)` only, so the result does not depend on thread count.
pub fn fit_random_forest(ds: &Dataset, params: &RandomForestParams) -> Result<RandomForestModel> {
    params.validate()?;
    if ds.is_empty() {
        return Err(param("fit_random_forest: empty dataset"));
    }
    let features = ds.features();
    let targets = ds.targets();
    let set = TrainingSet::new(&features, &targets)?;
    let n = ds.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let rows = if params.bootstrap {
                bootstrap_indices(n, derive_seed(params.seed, seed::TAG_BOOTSTRAP, i as u64))
            } else {
                (0..n).collect()
            };
            let tree_seed = derive_seed(params.seed, seed::TAG_FOREST_TREE, i as u64);
            fit_tree_on(set, rows, &params.tree, Some(params.n_features), tree_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForestModel { params: *params, trees })
}

pub fn predict_forest(model: &RandomForestModel, x: &FeatureVector) -> f64 {
    model.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrtParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_trees: usize,
    /// Fraction of rows drawn without replacement for each stage.
    pub subsample: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl GbrtParams {
    /// Lr 0.01, depth 8, 5000 trees, Fs 0.3: tuned for mean Cp.
    pub fn tuned_mean_cp(seed: u64) -> Self {
        GbrtParams { learning_rate: 0.01, max_depth: 8, n_trees: 5000, subsample: 0.3, min_samples_leaf: 1, seed }
    }

    /// Lr 0.01, depth 16, 3000 trees, Fs 0.3: tuned for fluctuating Cp.
    pub fn tuned_rms_cp(seed: u64) -> Self {
        GbrtParams { max_depth: 16, n_trees: 3000, ..Self::tuned_mean_cp(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(param(format!("learning_rate = {}: must lie in (0, 1]", self.learning_rate)));
        }
        if self.max_depth < 1 {
            return Err(param("gbrt max_depth must be >= 1"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(param(format!("subsample = {}: must lie in (0, 1]", self.subsample)));
        }
        if self.min_samples_leaf < 1 {
            return Err(param("min_samples_leaf must be >= 1"));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams { max_depth: self.max_depth, max_leaf_nodes: None, min_samples_leaf: self.min_samples_leaf }
    }
}

/// `F0 + learning_rate * Σ tree_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrtModel {
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbrtModel {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        self.predict_stages(x, self.trees.len())
    }

    /// Prediction of the model truncated to its first `stages` trees.
    pub fn predict_stages(&self, x: &FeatureVector, stages: usize) -> f64 {
        let sum: f64 = self.trees[..stages].iter().map(|t| t.predict(x)).sum();
        self.base_prediction + self.learning_rate * sum
    }

    /// Predictions after 0, 1, ..., `trees.len()` stages.
    pub fn staged_predict<'a>(&'a self, x: &'a FeatureVector) -> impl Iterator<Item = f64> + 'a {
        let base = self.base_prediction;
        let lr = self.learning_rate;
        std::iter::once(base).chain(self.trees.iter().scan(0.0, move |sum, t| {
            *sum += t.predict(x);
            Some(base + lr * *sum)
        }))
    }

    pub fn truncated(&self, stages: usize) -> GbrtModel {
        GbrtModel {
            base_prediction: self.base_prediction,
            learning_rate: self.learning_rate,
            trees: self.trees[..stages].to_vec(),
        }
    }
}

/// Stochastic gradient boosting under squared loss.
///
/// Stage `m` draws `floor(subsample * n)` rows without replacement, fits a
/// depth-limited tree to the current residuals on those rows and adds it
/// scaled by the learning rate.
pub fn fit_gbrt(ds: &Dataset, params: &GbrtParams) -> Result<GbrtModel> {
    fit_gbrt_with(ds, params, |_, _| {})
}

/// As [`fit_gbrt`], calling `on_stage(m, training_predictions)` after each
/// stage `m` (1-based).
pub fn fit_gbrt_with(
    ds: &Dataset,
    params: &GbrtParams,
    mut on_stage: impl FnMut(usize, &[f64]),
) -> Result<GbrtModel> {
    params.validate()?;
    if ds.is_empty() {
        return Err(param("fit_gbrt: empty dataset"));
    }
    let features = ds.features();
    let targets = ds.targets();
    let n = ds.len();
    let base = targets.iter().sum::<f64>() / n as f64;
    let n_sub = ((params.subsample * n as f64).floor() as usize).clamp(1, n);
    let tree_params = params.tree_params();

    // Per-row running sum of tree outputs; predictions are base + lr * sum,
    // evaluated exactly as GbrtModel::predict does.
    let mut tree_sums = vec![0.0; n];
    let mut predictions = vec![base; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for stage in 0..params.n_trees {
        for ((r, y), p) in residuals.iter_mut().zip(&targets).zip(&predictions) {
            *r = y - p;
        }
        let rows = if n_sub == n {
            (0..n).collect()
        } else {
            let mut rng = seed::rng(derive_seed(params.seed, seed::TAG_GBRT_SUBSAMPLE, stage as u64));
            let mut rows = index::sample(&mut rng, n, n_sub).into_vec();
            rows.sort_unstable();
            rows
        };
        let set = TrainingSet::new(&features, &residuals)?;
        let tree_seed = derive_seed(params.seed, seed::TAG_GBRT_TREE, stage as u64);
        let tree = fit_tree_on(set, rows, &tree_params, None, tree_seed)?;
        for ((s, p), x) in tree_sums.iter_mut().zip(predictions.iter_mut()).zip(&features) {
            *s += tree.predict(x);
            *p = base + params.learning_rate * *s;
        }
        trees.push(tree);
        on_stage(stage + 1, &predictions);
    }
    Ok(GbrtModel { base_prediction: base, learning_rate: params.learning_rate, trees })
}

pub fn predict_gbrt(model: &GbrtModel, x: &FeatureVector) -> f64 {
    model.predict(x)
}
