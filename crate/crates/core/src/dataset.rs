//! Pressure-coefficient samples, CSV ingestion, and seeded partitioning.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{param, Error, Result};
use crate::seed;

/// Number of model inputs: log10(Re), Ti, θ.
pub const N_FEATURES: usize = 3;

pub const CSV_HEADER: [&str; 4] = ["re", "ti", "theta", "cp"];

/// Which pressure statistic a dataset's targets hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    MeanCp,
    RmsCp,
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::MeanCp => "mean",
            TargetKind::RmsCp => "rms",
        })
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "mean_cp" => Ok(TargetKind::MeanCp),
            "rms" | "rms_cp" => Ok(TargetKind::RmsCp),
            other => Err(param(format!("unknown target kind `{other}` (expected mean or rms)"))),
        }
    }
}

/// One surface-pressure observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Reynolds number, > 0.
    pub re: f64,
    /// Turbulence intensity in percent, 0..=100.
    pub ti: f64,
    /// Circumferential angle in degrees, 0 at the stagnation point.
    pub theta: f64,
    pub target: f64,
}

impl Sample {
    /// Builds a sample after checking the domain of every field.
    pub fn new(re: f64, ti: f64, theta: f64, target: f64) -> Result<Self> {
        check_inputs(re, ti, theta, None)?;
        if !target.is_finite() {
            return Err(domain("cp", target, "must be finite", None));
        }
        Ok(Sample { re, ti, theta, target })
    }

    pub fn features(&self) -> FeatureVector {
        featurize(self.re, self.ti, self.theta)
    }
}

fn domain(field: &'static str, value: f64, constraint: &'static str, line: Option<usize>) -> Error {
    Error::Domain { field, value, constraint, line }
}

/// Validates the three model inputs. `line` is attached to any error.
pub fn check_inputs(re: f64, ti: f64, theta: f64, line: Option<usize>) -> Result<()> {
    if !(re.is_finite() && re > 0.0) {
        return Err(domain("re", re, "must be finite and > 0", line));
    }
    if !(0.0..=100.0).contains(&ti) {
        return Err(domain("ti", ti, "must lie in [0, 100]", line));
    }
    if !(0.0..=180.0).contains(&theta) {
        return Err(domain("theta", theta, "must lie in [0, 180]", line));
    }
    Ok(())
}

/// Model inputs derived from a sample: `[log10(re), ti, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    #[inline]
    pub fn get(&self, feature: usize) -> f64 {
        self.0[feature]
    }
}

/// Maps raw inputs to features. Reynolds number enters on a log10 scale.
pub fn featurize(re: f64, ti: f64, theta: f64) -> FeatureVector {
    FeatureVector([re.log10(), ti, theta])
}

/// An ordered, immutable collection of samples of one target kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    target_kind: TargetKind,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(target_kind: TargetKind, samples: Vec<Sample>) -> Self {
        Dataset { target_kind, samples }
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target_kind
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.samples.iter().map(Sample::features).collect()
    }

    /// The samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            target_kind: self.target_kind,
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
        }
    }

    /// SHA-256 over the target kind and the bit patterns of every field.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.target_kind.to_string().as_bytes());
        for s in &self.samples {
            for v in [s.re, s.ti, s.theta, s.target] {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Reads a `re,ti,theta,cp` CSV. Lines starting with `#` are skipped.
    pub fn from_reader<R: Read>(reader: R, target_kind: TargetKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);

        let header_line = 1;
        let headers = rdr.headers().map_err(|e| csv_error(e, header_line))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names != CSV_HEADER {
            return Err(Error::Parse {
                line: headers.position().map_or(header_line, |p| p.line() as usize),
                message: format!("expected header `re,ti,theta,cp`, found `{}`", names.join(",")),
            });
        }

        let mut samples = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(e, 0))?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 4 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 4 fields, found {}", record.len()),
                });
            }
            let mut vals = [0.0; 4];
            for (slot, (field, name)) in vals.iter_mut().zip(record.iter().zip(CSV_HEADER)) {
                *slot = field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("field `{name}`: `{field}` is not a number"),
                })?;
            }
            let [re, ti, theta, cp] = vals;
            check_inputs(re, ti, theta, Some(line))?;
            if !cp.is_finite() {
                return Err(domain("cp", cp, "must be finite", Some(line)));
            }
            samples.push(Sample { re, ti, theta, target: cp });
        }
        Ok(Dataset { target_kind, samples })
    }

    pub fn load_csv(path: impl AsRef<Path>, target_kind: TargetKind) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_reader(std::io::BufReader::new(file), target_kind)
    }

    /// Writes the dataset in the ingestion schema. Numbers use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", CSV_HEADER.join(","))?;
        for s in &self.samples {
            writeln!(out, "{:?},{:?},{:?},{:?}", s.re, s.ti, s.theta, s.target)?;
        }
        Ok(())
    }
}

/// One `re,ti,theta` row of a prediction query file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub re: f64,
    pub ti: f64,
    pub theta: f64,
}

impl Query {
    pub fn features(&self) -> FeatureVector {
        featurize(self.re, self.ti, self.theta)
    }
}

/// Reads a `re,ti,theta` query CSV, checking each row's domain.
pub fn read_queries<R: Read>(reader: R) -> Result<Vec<Query>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != CSV_HEADER[..3] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `re,ti,theta`, found `{}`", names.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut vals = [0.0; 3];
        for (slot, (field, name)) in vals.iter_mut().zip(record.iter().zip(CSV_HEADER)) {
            *slot = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("field `{name}`: `{field}` is not a number"),
            })?;
        }
        let [re, ti, theta] = vals;
        check_inputs(re, ti, theta, Some(line))?;
        out.push(Query { re, ti, theta });
    }
    Ok(out)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}

/// Convenience wrapper for [`Dataset::load_csv`].
pub fn load_csv(path: impl AsRef<Path>, target_kind: TargetKind) -> Result<Dataset> {
    Dataset::load_csv(path, target_kind)
}

/// A seeded permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    idx
}

/// Index form of [`train_test_split`]. Both halves are returned in
/// ascending (ingestion) order.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(param(format!("test_fraction {test_fraction} outside [0, 1]")));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let perm = permutation(n, seed);
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Splits into `(train, test)` with `round(n * test_fraction)` test samples.
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Per-sample fold membership for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    k: usize,
    membership: Vec<usize>,
}

impl FoldAssignment {
    /// Assigns `n` samples to `k` folds of sizes differing by at most one.
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(param(format!("k = {k}: need at least 2 folds")));
        }
        if k > n {
            return Err(param(format!("k = {k} exceeds the number of samples ({n})")));
        }
        let mut membership = vec![0; n];
        for (pos, i) in permutation(n, seed).into_iter().enumerate() {
            membership[i] = pos % k;
        }
        Ok(FoldAssignment { k, membership })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    /// Indices held out in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&i| self.membership[i] == fold).collect()
    }

    /// Indices used for training when `fold` is held out, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&i| self.membership[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.membership {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    FoldAssignment::new(ds.len(), k, seed)
}
