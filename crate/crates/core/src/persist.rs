//! Versioned JSON model files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureVector, TargetKind};
use crate::error::{Error, Result};
use crate::evaluation::{fit, FittedModel, LearnerKind, LearnerSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    /// [`Dataset::content_hash`] of the training data.
    pub dataset_hash: String,
    pub n_samples: usize,
    pub seed: u64,
}

/// A fitted model plus everything needed to audit or reproduce it.
///
/// Trees are stored as node arrays; internal nodes route `x[feature] <=
/// threshold` to `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub target_kind: TargetKind,
    pub learner: LearnerSpec,
    pub metadata: TrainingMetadata,
    pub fitted: FittedModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl ModelFile {
    pub fn new(learner: LearnerSpec, fitted: FittedModel, ds: &Dataset, seed: u64) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            target_kind: ds.target_kind(),
            learner,
            metadata: TrainingMetadata { dataset_hash: ds.content_hash(), n_samples: ds.len(), seed },
            fitted,
        }
    }

    /// Fits `learner` on `ds` and wraps the result.
    pub fn train(learner: LearnerSpec, ds: &Dataset, seed: u64) -> Result<Self> {
        let fitted = fit(&learner, ds)?;
        Ok(Self::new(learner, fitted, ds, seed))
    }

    pub fn kind(&self) -> LearnerKind {
        self.fitted.kind()
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        self.fitted.predict(x)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses a model file, refusing any format version other than
    /// [`FORMAT_VERSION`] before looking at the rest of the document.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: probe.format_version, expected: FORMAT_VERSION });
        }
        let file: ModelFile = serde_json::from_str(text)?;
        if file.learner.kind() != file.fitted.kind() {
            return Err(Error::Param(format!(
                "model file declares learner {} but stores a {} model",
                file.learner.kind(),
                file.fitted.kind()
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io { path: path.to_owned(), source };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(self.to_json()?.as_bytes()).map_err(io)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }
}
