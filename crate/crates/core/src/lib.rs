//! Minipatch boosting.
//!
//! An AdaBoost-style ensemble that trains each weak learner on a tiny
//! row-by-column submatrix (a *minipatch*) of the training data. Rows are
//! drawn from an adaptive distribution that upweights hard observations,
//! columns from an adaptive distribution that follows per-tree feature
//! importance. Rows left out of a minipatch provide an internal validation
//! signal (out-of-patch accuracy) that drives an automatic stopping rule.
//!
//! The feature scalar is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to one of the two.
//!
//! ```
//! use mpboost::{generate_cones, train, Hyperparams};
//!
//! let data = generate_cones::<f64>(200, 3, 7, 0.3, 1).unwrap();
//! let mut hp = Hyperparams::for_shape(data.n_rows(), data.n_cols());
//! hp.t_max = 50;
//! let (model, diag) = train(&data, &hp).unwrap();
//! assert!(model.best_iteration() <= model.learners().len());
//! assert!(!diag.records.is_empty());
//! ```

pub mod boost;
pub mod dataset;
mod error;
pub mod sampler;
mod scalar;
pub mod stopping;
pub mod tree;

pub use boost::{
    loss, train, train_with_test, tuning_grid, Diagnostics, Hyperparams, ImportanceBackend,
    IterationRecord, Learner, LossKind, Metadata, MinipatchEnsemble, StepOutcome, TrainState,
    Trainer,
};
pub use dataset::{generate_cones, load_csv, save_csv, train_test_split, Dataset, LabelColumn};
pub use error::{Error, Result};
pub use sampler::{sample_without_replacement, MpRng, ProbabilityVector, RNG_ALGORITHM};
pub use scalar::Scalar;
pub use stopping::{Decision, StoppingState};
pub use tree::{
    fit_tree, impurity_importance, permutation_importance, DecisionTree, DepthLimit,
    ImportanceVector, Node,
};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type DecisionTree64 = DecisionTree<f64>;
pub type DecisionTree32 = DecisionTree<f32>;
pub type MinipatchEnsemble64 = MinipatchEnsemble<f64>;
pub type MinipatchEnsemble32 = MinipatchEnsemble<f32>;

/// Class label; always `-1` or `+1`.
pub type Label = i8;
