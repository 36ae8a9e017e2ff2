//! Command-line surface for `cpforest`.
//!
//! Every command is a pure function of its input files and flags. Randomness
//! comes only from `--seed`, and `--workers` changes speed but never output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cpforest::evaluation::{cross_validate, grid_search, run_ttv, Axis, Grid, LearnerKind, LearnerSpec};
use cpforest::synthetic::{generate_dataset, GeneratorConfig, RE_WINDOW, TI_WINDOW};
use cpforest::{featurize, mse, r2_score, read_queries, Dataset, FittedModel, ModelFile, TargetKind};

#[derive(Debug, Parser)]
#[command(name = "cpforest", version, about = "Tree-ensemble surrogates for cylinder pressure coefficients")]
pub struct Cli {
    /// Worker threads (0 = one per core). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from the reference Cp curves.
    Synth(SynthArgs),
    /// Fit a model and write it as a versioned JSON file.
    Train(TrainArgs),
    /// Predict Cp for every row of a `re,ti,theta` query file.
    Predict(PredictArgs),
    /// Predict Cp(θ) over [0, 180] for one (Re, Ti).
    Curve(CurveArgs),
    /// k-fold cross-validation of one learner configuration.
    Cv(CvArgs),
    /// Grid search with k-fold cross-validation.
    Sweep(SweepArgs),
    /// Hold out 10%, tune every learner by 10-fold CV, refit the winner and test it.
    Ttv(TtvArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV with header `re,ti,theta,cp`.
    #[arg(long)]
    pub data: PathBuf,
    /// Which statistic the `cp` column holds.
    #[arg(long, default_value = "mean", value_parser = parse_target)]
    pub target: TargetKind,
}

/// Hyperparameter overrides. Unset flags keep the tuned defaults of the
/// chosen learner and target kind.
#[derive(Debug, Default, Clone, Args)]
pub struct HyperArgs {
    /// Maximum tree depth (dtr, rf, gbrt).
    #[arg(long, alias = "depth")]
    pub max_depth: Option<f64>,
    /// Maximum leaf count per tree; `inf` for unlimited (dtr, rf).
    #[arg(long)]
    pub max_leaves: Option<f64>,
    /// Minimum samples per leaf (dtr, rf, gbrt).
    #[arg(long)]
    pub min_leaf: Option<f64>,
    /// Number of trees (rf, gbrt).
    #[arg(long)]
    pub trees: Option<f64>,
    /// Features drawn per node (rf).
    #[arg(long)]
    pub features: Option<f64>,
    /// Train every forest tree on the full data instead of a bootstrap resample (rf).
    #[arg(long)]
    pub no_bootstrap: bool,
    /// Learning rate (gbrt).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Row fraction drawn per boosting stage (gbrt).
    #[arg(long)]
    pub subsample: Option<f64>,
}

impl HyperArgs {
    fn overrides(&self) -> Vec<(&'static str, &'static str, f64)> {
        let mut out = Vec::new();
        let mut push = |flag, name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((flag, name, v));
            }
        };
        push("--max-depth", "max_depth", self.max_depth);
        push("--max-leaves", "max_leaf_nodes", self.max_leaves);
        push("--min-leaf", "min_samples_leaf", self.min_leaf);
        push("--trees", "n_trees", self.trees);
        push("--features", "n_features", self.features);
        push("--no-bootstrap", "bootstrap", self.no_bootstrap.then_some(0.0));
        push("--lr", "learning_rate", self.lr);
        push("--subsample", "subsample", self.subsample);
        out
    }

    /// The tuned configuration for `(kind, target)` with these overrides applied.
    pub fn spec(&self, kind: LearnerKind, target: TargetKind, seed: u64) -> Result<LearnerSpec> {
        let mut spec = LearnerSpec::tuned(kind, target, seed);
        for (flag, name, v) in self.overrides() {
            spec = spec.with_param(name, v).with_context(|| format!("{flag} {v} is not valid for learner {kind}"))?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = RE_WINDOW.0)]
    pub re_min: f64,
    #[arg(long, default_value_t = RE_WINDOW.1)]
    pub re_max: f64,
    #[arg(long, default_value_t = TI_WINDOW.0)]
    pub ti_min: f64,
    #[arg(long, default_value_t = TI_WINDOW.1)]
    pub ti_max: f64,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value = "mean", value_parser = parse_target)]
    pub target: TargetKind,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_learner)]
    pub learner: LearnerKind,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query CSV with header `re,ti,theta`.
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub re: f64,
    #[arg(long)]
    pub ti: f64,
    /// Angular step in degrees.
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_learner)]
    pub learner: LearnerKind,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    /// Per-fold CSV `fold,mse`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_learner)]
    pub learner: LearnerKind,
    /// Base configuration; grid axes override it.
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Grid axis `name=v1,v2,...` (repeatable), e.g. `max_depth=5,10,20`.
    #[arg(long = "grid", value_parser = parse_axis)]
    pub axes: Vec<Axis>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    /// Long-format surface CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TtvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Learners to compare.
    #[arg(long = "learners", value_delimiter = ',', default_value = "dtr,rf,gbrt", value_parser = parse_learner)]
    pub learners: Vec<LearnerKind>,
    /// Grid axis `learner:name=v1,v2,...` (repeatable), e.g. `gbrt:n_trees=500,1000`.
    #[arg(long = "grid", value_parser = parse_learner_axis)]
    pub axes: Vec<(LearnerKind, Axis)>,
    #[arg(long)]
    pub seed: u64,
    /// Candidate CSV `learner,cell,mean_mse,std_mse`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also save the refitted winning model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

fn parse_target(s: &str) -> Result<TargetKind, String> {
    s.parse().map_err(|e: cpforest::Error| e.to_string())
}

fn parse_learner(s: &str) -> Result<LearnerKind, String> {
    s.parse().map_err(|e: cpforest::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    let (name, values) = s.split_once('=').ok_or_else(|| format!("expected name=v1,v2,..., got `{s}`"))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Axis::new(name.trim(), values))
}

fn parse_learner_axis(s: &str) -> Result<(LearnerKind, Axis), String> {
    let (learner, axis) = s.split_once(':').ok_or_else(|| format!("expected learner:name=v1,..., got `{s}`"))?;
    Ok((parse_learner(learner.trim())?, parse_axis(axis)?))
}

fn load(data: &DataArgs) -> Result<Dataset> {
    Dataset::load_csv(&data.data, data.target).with_context(|| format!("loading {}", data.data.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes through `f` to `path`, or to `stdout` when no path is given.
fn emit(path: Option<&Path>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))
}

/// Runs `cli`, writing command output and summaries to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build()?;
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut buf));
    stdout.write_all(&buf)?;
    result
}

fn dispatch(command: Command, stdout: &mut Vec<u8>) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a, stdout),
        Command::Train(a) => cmd_train(a, stdout),
        Command::Predict(a) => cmd_predict(a, stdout),
        Command::Curve(a) => cmd_curve(a, stdout),
        Command::Cv(a) => cmd_cv(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Ttv(a) => cmd_ttv(a, stdout),
    }
}

pub fn cmd_synth(a: SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = GeneratorConfig {
        n: a.n,
        re_range: (a.re_min, a.re_max),
        ti_range: (a.ti_min, a.ti_max),
        noise_sd: a.noise,
        target_kind: a.target,
        seed: a.seed,
    };
    let ds = generate_dataset(&cfg)?;
    emit(a.out.as_deref(), stdout, |w| ds.write_csv(w))
}

fn training_summary(model: &FittedModel, ds: &Dataset) -> Result<(f64, Option<f64>)> {
    let preds = model.predict_dataset(ds);
    let truths = ds.targets();
    let train_mse = mse(&preds, &truths)?;
    let train_r2 = r2_score(&preds, &truths).ok();
    Ok((train_mse, train_r2))
}

pub fn cmd_train(a: TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load(&a.data)?;
    let spec = a.hyper.spec(a.learner, a.data.target, a.seed)?;
    let model = ModelFile::train(spec, &ds, a.seed)?;
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let (train_mse, train_r2) = training_summary(&model.fitted, &ds)?;
    let r2 = train_r2.map_or("nan".to_owned(), |r| r.to_string());
    writeln!(stdout, "learner={} samples={} train_mse={train_mse} train_r2={r2}", a.learner, ds.len())?;
    Ok(())
}

pub fn cmd_predict(a: PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let file = File::open(&a.query).with_context(|| format!("opening {}", a.query.display()))?;
    let queries = read_queries(io::BufReader::new(file)).with_context(|| format!("reading {}", a.query.display()))?;
    emit(a.out.as_deref(), stdout, |w| {
        writeln!(w, "re,ti,theta,cp_hat")?;
        for q in &queries {
            writeln!(w, "{},{},{},{}", q.re, q.ti, q.theta, model.predict(&q.features()))?;
        }
        Ok(())
    })
}

/// Angles `0, step, 2·step, …` below 180, then 180 itself.
pub fn curve_angles(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        bail!("--step must be a positive number of degrees, got {step}");
    }
    let n = (180.0 / step).ceil() as usize;
    let mut angles: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    angles.push(180.0);
    Ok(angles)
}

pub fn cmd_curve(a: CurveArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    cpforest::dataset::check_inputs(a.re, a.ti, 0.0, None)?;
    let angles = curve_angles(a.step)?;
    emit(a.out.as_deref(), stdout, |w| {
        writeln!(w, "theta,cp_hat")?;
        for theta in angles {
            writeln!(w, "{theta},{}", model.predict(&featurize(a.re, a.ti, theta)))?;
        }
        Ok(())
    })
}

pub fn cmd_cv(a: CvArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load(&a.data)?;
    let spec = a.hyper.spec(a.learner, a.data.target, a.seed)?;
    let report = cross_validate(&spec, &ds, a.k, a.seed)?;
    let mut w = create(&a.out)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    writeln!(
        stdout,
        "learner={} k={} mean_mse={} std_mse={}",
        a.learner, a.k, report.mean_mse, report.std_mse
    )?;
    Ok(())
}

pub fn cmd_sweep(a: SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load(&a.data)?;
    let base = a.hyper.spec(a.learner, a.data.target, a.seed)?;
    let surface = grid_search(&Grid::new(base, a.axes), &ds, a.k, a.seed)?;
    let mut w = create(&a.out)?;
    surface.write_csv(&mut w)?;
    w.flush()?;
    let best = surface.best_cell();
    writeln!(stdout, "cells={} best=\"{}\" mean_mse={}", surface.cells.len(), best.spec, best.report.mean_mse)?;
    Ok(())
}

pub fn cmd_ttv(a: TtvArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load(&a.data)?;
    if a.learners.is_empty() {
        bail!("--learners must name at least one learner");
    }
    if let Some((kind, _)) = a.axes.iter().find(|(k, _)| !a.learners.contains(k)) {
        bail!("--grid given for {kind}, which is not in --learners");
    }
    let grids: Vec<Grid> = a
        .learners
        .iter()
        .map(|&kind| {
            let axes = a.axes.iter().filter(|(k, _)| *k == kind).map(|(_, ax)| ax.clone()).collect();
            Grid::new(LearnerSpec::tuned(kind, a.data.target, a.seed), axes)
        })
        .collect();
    let result = run_ttv(&ds, &grids, a.seed)?;

    let mut w = create(&a.out)?;
    writeln!(w, "learner,cell,mean_mse,std_mse")?;
    for (grid, surface) in grids.iter().zip(&result.surfaces) {
        for cell in &surface.cells {
            let coords: Vec<String> =
                surface.axes.iter().zip(&cell.coords).map(|(ax, c)| format!("{}={c}", ax.name)).collect();
            writeln!(w, "{},{},{},{}", grid.kind(), coords.join(";"), cell.report.mean_mse, cell.report.std_mse)?;
        }
    }
    w.flush()?;

    if let Some(path) = &a.model_out {
        let train = ds.subset(&result.train_indices);
        ModelFile::new(result.chosen, result.model.clone(), &train, a.seed)
            .save(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    writeln!(
        stdout,
        "chosen={} spec=\"{}\" test_mse={} test_r2={}",
        result.chosen.kind(),
        result.chosen,
        result.test_mse,
        result.test_r2
    )?;
    Ok(())
}
