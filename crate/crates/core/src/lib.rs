//! Regression-tree ensembles for predicting wind-pressure coefficients on
//! circular cylinders from Reynolds number, turbulence intensity and
//! circumferential angle.
//!
//! * [`cart`]: CART regression trees with depth-first or leaf-limited
//!   best-first growth.
//! * [`ensemble`]: random forests and stochastic gradient boosting.
//! * [`evaluation`]: metrics, k-fold cross-validation, grid search and the
//!   train / tune / test pipeline.
//! * [`synthetic`]: a reference Cp(θ) model used as ground truth in tests.
//! * [`persist`]: versioned JSON model files.
//!
//! All randomness is driven by explicit seeds (see [`seed`]); fitting is
//! reproducible bit-for-bit regardless of the rayon thread count.

pub mod cart;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod persist;
pub mod seed;
pub mod synthetic;

pub use cart::{best_split, fit_tree, gini_index, mse_impurity, predict_tree, RegressionTree, SplitCandidate, TreeParams};
pub use dataset::{
    featurize, kfold, load_csv, read_queries, train_test_split, Dataset, FeatureVector, FoldAssignment, Query, Sample,
    TargetKind,
};
pub use ensemble::{
    bootstrap_sample, fit_gbrt, fit_random_forest, predict_forest, predict_gbrt, GbrtModel, GbrtParams,
    RandomForestModel, RandomForestParams,
};
pub use error::{Error, Result};
pub use evaluation::{
    cross_validate, fit, grid_search, mse, r2_score, run_ttv, Axis, CvReport, FittedModel, Grid, LearnerKind,
    LearnerSpec, SweepSurface, TtvResult,
};
pub use persist::{ModelFile, FORMAT_VERSION};
pub use synthetic::{curve_params, generate_dataset, reference_mean_cp, reference_rms_cp, CurveParams, GeneratorConfig};
