//! Fairness-aware AdaBoost.
//!
//! AdaBoost with a skewed initial sample distribution so that the usual
//! exponential-loss bound `prod_t Z_t` covers an objective of the form
//! `error_rate + lambda * group_gap`, where the gap is measured on accuracy,
//! false positive rate or false negative rate. Vanilla AdaBoost is the
//! `lambda = 0` case.
//!
//! Modules, bottom-up:
//! - [`dataset`]: CSV loading into a validated [`Dataset`].
//! - [`preprocess`]: group balancing, train/test splits, admissible lambda.
//! - [`metrics`]: accuracy, per-group confusion and fairness losses.
//! - [`tree`]: weighted CART base learner that never splits on the sensitive feature.
//! - [`boost`]: initial weights, reweighting rounds and the trained [`Ensemble`].
//! - [`bound`]: objective losses and the `L(f) <= prod_t Z_t` audit.
//! - [`harness`]: seeded lambda/seed sweeps, aggregation and result files.

pub mod boost;
pub mod bound;
pub mod dataset;
mod error;
pub mod harness;
pub mod metrics;
pub mod preprocess;
pub mod synthetic;
pub mod tree;

pub use boost::{Ensemble, FabConfig, TrainingTrace, WeightVector};
pub use bound::BoundReport;
pub use dataset::{Dataset, DatasetSchema, OnMissing, Sample};
pub use error::{FabError, Result};
pub use preprocess::{FairnessIndicator, LambdaRange};
pub use tree::{DecisionTree, TreeConfig, TreeNode};
