//! Metrics, k-fold cross-validation, grid search and the three-stage
//! train / tune / test pipeline.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{fit_tree, RegressionTree, TreeParams};
use crate::dataset::{split_indices, Dataset, FeatureVector, FoldAssignment, TargetKind};
use crate::ensemble::{fit_gbrt, fit_random_forest, GbrtModel, GbrtParams, RandomForestModel, RandomForestParams};
use crate::error::{param, Error, Result};
use crate::seed::{self, derive_seed};

/// Held-out share of the data in [`run_ttv`].
pub const TTV_TEST_FRACTION: f64 = 0.1;
/// Folds used for tuning in [`run_ttv`].
pub const TTV_FOLDS: usize = 10;

pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(param(format!("mse: {} predictions vs {} truths", predictions.len(), truths.len())));
    }
    if predictions.is_empty() {
        return Err(param("mse: empty input"));
    }
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sse / predictions.len() as f64)
}

/// `1 - SSE / SST`, with SST taken about the mean of `truths`.
pub fn r2_score(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(param(format!("r2_score: {} predictions vs {} truths", predictions.len(), truths.len())));
    }
    if truths.len() < 2 {
        return Err(param("r2_score: need at least two observations"));
    }
    let mean = truths.iter().sum::<f64>() / truths.len() as f64;
    let sst: f64 = truths.iter().map(|t| (t - mean) * (t - mean)).sum();
    if sst == 0.0 {
        return Err(Error::UndefinedVariance);
    }
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - sse / sst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Dtr,
    Rf,
    Gbrt,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Dtr => "dtr",
            LearnerKind::Rf => "rf",
            LearnerKind::Gbrt => "gbrt",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtr" => Ok(LearnerKind::Dtr),
            "rf" => Ok(LearnerKind::Rf),
            "gbrt" => Ok(LearnerKind::Gbrt),
            other => Err(param(format!("unknown learner `{other}` (expected dtr, rf or gbrt)"))),
        }
    }
}

/// A learner together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum LearnerSpec {
    Dtr(TreeParams),
    Rf(RandomForestParams),
    Gbrt(GbrtParams),
}

impl LearnerSpec {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerSpec::Dtr(_) => LearnerKind::Dtr,
            LearnerSpec::Rf(_) => LearnerKind::Rf,
            LearnerSpec::Gbrt(_) => LearnerKind::Gbrt,
        }
    }

    /// The tuned configuration of `kind` for the given target.
    pub fn tuned(kind: LearnerKind, target: TargetKind, seed: u64) -> Self {
        match (kind, target) {
            (LearnerKind::Dtr, TargetKind::MeanCp) => LearnerSpec::Dtr(TreeParams::tuned_mean_cp()),
            (LearnerKind::Dtr, TargetKind::RmsCp) => LearnerSpec::Dtr(TreeParams::tuned_rms_cp()),
            (LearnerKind::Rf, TargetKind::MeanCp) => LearnerSpec::Rf(RandomForestParams::tuned_mean_cp(seed)),
            (LearnerKind::Rf, TargetKind::RmsCp) => LearnerSpec::Rf(RandomForestParams::tuned_rms_cp(seed)),
            (LearnerKind::Gbrt, TargetKind::MeanCp) => LearnerSpec::Gbrt(GbrtParams::tuned_mean_cp(seed)),
            (LearnerKind::Gbrt, TargetKind::RmsCp) => LearnerSpec::Gbrt(GbrtParams::tuned_rms_cp(seed)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Dtr(p) => p.validate(),
            LearnerSpec::Rf(p) => p.validate(),
            LearnerSpec::Gbrt(p) => p.validate(),
        }
    }

    /// Returns a copy with the named hyperparameter set to `value`.
    ///
    /// Integer parameters require integral values; `max_leaf_nodes = inf`
    /// means unlimited; `bootstrap` takes 0 or 1.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut spec = *self;
        match &mut spec {
            LearnerSpec::Dtr(t) => set_tree_param(t, name, value)?,
            LearnerSpec::Rf(p) => match name {
                "n_trees" => p.n_trees = as_count(name, value)?,
                "n_features" => p.n_features = as_count(name, value)?,
                "bootstrap" => {
                    p.bootstrap = match value {
                        v if v == 0.0 => false,
                        v if v == 1.0 => true,
                        _ => return Err(param(format!("bootstrap = {value}: expected 0 or 1"))),
                    }
                }
                "max_depth" | "max_leaf_nodes" | "min_samples_leaf" => set_tree_param(&mut p.tree, name, value)?,
                _ => return Err(unknown_axis(LearnerKind::Rf, name)),
            },
            LearnerSpec::Gbrt(p) => match name {
                "learning_rate" => p.learning_rate = value,
                "max_depth" => p.max_depth = as_count(name, value)?,
                "n_trees" => p.n_trees = as_count(name, value)?,
                "subsample" => p.subsample = value,
                "min_samples_leaf" => p.min_samples_leaf = as_count(name, value)?,
                _ => return Err(unknown_axis(LearnerKind::Gbrt, name)),
            },
        }
        Ok(spec)
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let leaves = |t: &TreeParams| t.max_leaf_nodes.map_or("inf".to_owned(), |l| l.to_string());
        match self {
            LearnerSpec::Dtr(t) => write!(
                f,
                "dtr max_depth={} max_leaf_nodes={} min_samples_leaf={}",
                t.max_depth,
                leaves(t),
                t.min_samples_leaf
            ),
            LearnerSpec::Rf(p) => write!(
                f,
                "rf n_trees={} n_features={} max_depth={} max_leaf_nodes={} min_samples_leaf={} bootstrap={} seed={}",
                p.n_trees,
                p.n_features,
                p.tree.max_depth,
                leaves(&p.tree),
                p.tree.min_samples_leaf,
                u8::from(p.bootstrap),
                p.seed
            ),
            LearnerSpec::Gbrt(p) => write!(
                f,
                "gbrt learning_rate={} max_depth={} n_trees={} subsample={} min_samples_leaf={} seed={}",
                p.learning_rate, p.max_depth, p.n_trees, p.subsample, p.min_samples_leaf, p.seed
            ),
        }
    }
}

fn unknown_axis(kind: LearnerKind, name: &str) -> Error {
    param(format!("unknown {kind} hyperparameter `{name}`"))
}

fn as_count(name: &str, value: f64) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 && value < 1e15 {
        Ok(value as usize)
    } else {
        Err(param(format!("{name} = {value}: expected a nonnegative integer")))
    }
}

fn set_tree_param(t: &mut TreeParams, name: &str, value: f64) -> Result<()> {
    match name {
        "max_depth" => t.max_depth = if value == f64::INFINITY { usize::MAX } else { as_count(name, value)? },
        "max_leaf_nodes" => t.max_leaf_nodes = if value == f64::INFINITY { None } else { Some(as_count(name, value)?) },
        "min_samples_leaf" => t.min_samples_leaf = as_count(name, value)?,
        _ => return Err(unknown_axis(LearnerKind::Dtr, name)),
    }
    Ok(())
}

/// A fitted model of any learner kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Dtr(RegressionTree),
    Rf(RandomForestModel),
    Gbrt(GbrtModel),
}

impl FittedModel {
    pub fn kind(&self) -> LearnerKind {
        match self {
            FittedModel::Dtr(_) => LearnerKind::Dtr,
            FittedModel::Rf(_) => LearnerKind::Rf,
            FittedModel::Gbrt(_) => LearnerKind::Gbrt,
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        match self {
            FittedModel::Dtr(t) => t.predict(x),
            FittedModel::Rf(m) => m.predict(x),
            FittedModel::Gbrt(m) => m.predict(x),
        }
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Vec<f64> {
        ds.samples().iter().map(|s| self.predict(&s.features())).collect()
    }
}

pub fn fit(spec: &LearnerSpec, ds: &Dataset) -> Result<FittedModel> {
    Ok(match spec {
        LearnerSpec::Dtr(p) => FittedModel::Dtr(fit_tree(ds, p, None, 0)?),
        LearnerSpec::Rf(p) => FittedModel::Rf(fit_random_forest(ds, p)?),
        LearnerSpec::Gbrt(p) => FittedModel::Gbrt(fit_gbrt(ds, p)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub per_fold_mse: Vec<f64>,
    pub mean_mse: f64,
    /// Population standard deviation of the per-fold MSEs.
    pub std_mse: f64,
}

impl CvReport {
    pub fn from_folds(per_fold_mse: Vec<f64>) -> Self {
        let k = per_fold_mse.len() as f64;
        let mean_mse = per_fold_mse.iter().sum::<f64>() / k;
        let var = per_fold_mse.iter().map(|m| (m - mean_mse) * (m - mean_mse)).sum::<f64>() / k;
        CvReport { per_fold_mse, mean_mse, std_mse: var.sqrt() }
    }

    /// Writes `fold,mse` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "fold,mse")?;
        for (i, m) in self.per_fold_mse.iter().enumerate() {
            writeln!(out, "{i},{m}")?;
        }
        Ok(())
    }
}

pub fn cross_validate(spec: &LearnerSpec, ds: &Dataset, k: usize, seed: u64) -> Result<CvReport> {
    if ds.len() < k {
        return Err(param(format!("cross_validate: {} samples for {k} folds", ds.len())));
    }
    let folds = FoldAssignment::new(ds.len(), k, seed)?;
    cross_validate_folds(spec, ds, &folds)
}

/// Cross-validation over a fixed fold assignment. Folds are fitted in
/// parallel; results are reported in fold order.
pub fn cross_validate_folds(spec: &LearnerSpec, ds: &Dataset, folds: &FoldAssignment) -> Result<CvReport> {
    spec.validate()?;
    if folds.membership().len() != ds.len() {
        return Err(param("fold assignment does not match dataset size"));
    }
    let per_fold = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let train = ds.subset(&folds.train_indices(f));
            let test = ds.subset(&folds.test_indices(f));
            fit(spec, &train)
                .and_then(|model| mse(&model.predict_dataset(&test), &test.targets()))
                .map_err(|e| Error::Fold { fold: f, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_folds(per_fold))
}

/// One named hyperparameter and the values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: impl Into<Vec<f64>>) -> Self {
        Axis { name: name.into(), values: values.into() }
    }
}

/// A Cartesian grid around a base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub base: LearnerSpec,
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn new(base: LearnerSpec, axes: Vec<Axis>) -> Self {
        Grid { base, axes }
    }

    /// The base configuration alone.
    pub fn single(base: LearnerSpec) -> Self {
        Grid { base, axes: Vec::new() }
    }

    pub fn kind(&self) -> LearnerKind {
        self.base.kind()
    }

    /// All grid points in row-major order (last axis varies fastest).
    pub fn cells(&self) -> Result<Vec<(Vec<f64>, LearnerSpec)>> {
        if self.axes.iter().any(|a| a.values.is_empty()) {
            return Err(param("grid axis with no values"));
        }
        let mut cells = vec![(Vec::new(), self.base)];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(cells.len() * axis.values.len());
            for (coords, spec) in &cells {
                for &v in &axis.values {
                    let mut c = coords.clone();
                    c.push(v);
                    next.push((c, spec.with_param(&axis.name, v)?));
                }
            }
            cells = next;
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub coords: Vec<f64>,
    pub spec: LearnerSpec,
    pub report: CvReport,
}

/// Mean CV-MSE over a hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSurface {
    pub axes: Vec<Axis>,
    pub cells: Vec<SweepCell>,
    /// Index of the lowest mean MSE; the first such cell on ties.
    pub best: usize,
}

impl SweepSurface {
    pub fn best_cell(&self) -> &SweepCell {
        &self.cells[self.best]
    }

    /// Long format: one row per cell, `axis1,...,axisN,mean_mse,std_mse`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        header.extend(["mean_mse", "std_mse"]);
        writeln!(out, "{}", header.join(","))?;
        for cell in &self.cells {
            let mut row: Vec<String> = cell.coords.iter().map(|c| c.to_string()).collect();
            row.push(cell.report.mean_mse.to_string());
            row.push(cell.report.std_mse.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn argmin_first(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn grid_search(grid: &Grid, ds: &Dataset, k: usize, seed: u64) -> Result<SweepSurface> {
    let folds = FoldAssignment::new(ds.len(), k, seed)?;
    grid_search_folds(grid, ds, &folds)
}

/// Grid search with every cell scored on the same folds.
pub fn grid_search_folds(grid: &Grid, ds: &Dataset, folds: &FoldAssignment) -> Result<SweepSurface> {
    let cells = grid.cells()?;
    let scored = cells
        .into_par_iter()
        .map(|(coords, spec)| {
            cross_validate_folds(&spec, ds, folds)
                .map(|report| SweepCell { coords: coords.clone(), spec, report })
                .map_err(|e| Error::Cell { cell: describe_cell(&grid.axes, &coords), source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = argmin_first(scored.iter().map(|c| c.report.mean_mse)).ok_or_else(|| param("empty grid"))?;
    Ok(SweepSurface { axes: grid.axes.clone(), cells: scored, best })
}

fn describe_cell(axes: &[Axis], coords: &[f64]) -> String {
    axes.iter().zip(coords).map(|(a, c)| format!("{}={c}", a.name)).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtvResult {
    pub chosen: LearnerSpec,
    pub model: FittedModel,
    pub test_mse: f64,
    pub test_r2: f64,
    /// Rows of the input dataset used for tuning and refitting, ascending.
    pub train_indices: Vec<usize>,
    /// Held-out rows of the input dataset, ascending.
    pub test_indices: Vec<usize>,
    /// Fold assignment over `train_indices` shared by every sweep.
    pub folds: FoldAssignment,
    pub surfaces: Vec<SweepSurface>,
}

pub fn run_ttv(ds: &Dataset, grids: &[Grid], seed: u64) -> Result<TtvResult> {
    run_ttv_with(ds, grids, TTV_TEST_FRACTION, TTV_FOLDS, seed)
}

/// Stage 1 holds out `test_fraction` of the data; stage 2 grid-searches
/// every learner on the remainder with `k`-fold CV on shared folds; stage 3
/// refits the overall winner on the whole remainder and scores it on the
/// held-out rows.
pub fn run_ttv_with(ds: &Dataset, grids: &[Grid], test_fraction: f64, k: usize, seed: u64) -> Result<TtvResult> {
    if grids.is_empty() {
        return Err(param("run_ttv: no grids"));
    }
    let (train_indices, test_indices) =
        split_indices(ds.len(), test_fraction, derive_seed(seed, seed::TAG_TTV_SPLIT, 0))?;
    let train = ds.subset(&train_indices);
    let test = ds.subset(&test_indices);
    let folds = FoldAssignment::new(train.len(), k, derive_seed(seed, seed::TAG_TTV_FOLDS, 0))?;

    let surfaces = grids.iter().map(|g| grid_search_folds(g, &train, &folds)).collect::<Result<Vec<_>>>()?;
    let winner = argmin_first(surfaces.iter().map(|s| s.best_cell().report.mean_mse)).expect("grids is non-empty");
    let chosen = surfaces[winner].best_cell().spec;

    let model = fit(&chosen, &train)?;
    let predictions = model.predict_dataset(&test);
    let truths = test.targets();
    let test_mse = mse(&predictions, &truths)?;
    let test_r2 = r2_score(&predictions, &truths)?;
    Ok(TtvResult { chosen, model, test_mse, test_r2, train_indices, test_indices, folds, surfaces })
}
