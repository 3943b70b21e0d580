//! Locally adaptive nearest neighbors.
//!
//! A weighted kNN classifier in which every training point carries its own
//! diagonal metric. Metrics are learned by stochastic gradient descent on the
//! negative log-likelihood of a softmax over the kNN support, and double as
//! per-point feature relevance profiles.
//!
//! ```no_run
//! use lann::{fit, load_csv, Hyperparams, LabelColumn};
//!
//! let data = load_csv("data/iris.csv", &LabelColumn::Last)?;
//! let (model, report) = fit(&data, &Hyperparams::default())?;
//! let prediction = model.predict(&[5.1, 3.5, 1.4, 0.2])?;
//! let relevances = model.explain(&[5.1, 3.5, 1.4, 0.2])?;
//! # Ok::<(), lann::LannError>(())
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod neighbors;
pub mod persist;
pub mod training;

pub use data::{
    generate_classification, generate_licorice, load_csv, make_stratified_folds, write_csv, zscore_apply,
    zscore_fit_transform, ClassificationSpec, FoldPlan, LabelColumn, LicoriceSpec, Scaler,
};
pub use error::{LannError, Result};
pub use evaluation::{
    cross_validate, export_distance_matrix, fingerprints, reclassify_by_matrix, Algorithm, ClassFingerprint, CvResult,
    DistanceMatrix, Symmetrize,
};
pub use inference::{class_probabilities, support, Prediction, ProbabilityVector, SupportVector};
pub use model::{
    identity_metric, normalize_metric, DiagonalMetric, Hyperparams, LabeledDataset, LannModel, RelevanceProfile,
};
pub use neighbors::{brute_force_neighbors, find_neighbors, local_distance, Neighborhood};
pub use persist::{load_model, save_model};
pub use training::{
    check_gradients, check_gradients_random, fit, sample_gradients, sample_loss, GradCheckReport, GradientRecord,
    TrainReport,
};
