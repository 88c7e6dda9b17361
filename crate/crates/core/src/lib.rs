//! Monotonicity-regularized learned cardinality estimation.
//!
//! The crate covers the whole pipeline for single-table range queries:
//!
//! - [`relation`]: synthetic or CSV-loaded tables and the exact cardinality oracle.
//! - [`workload`]: conjunctive range queries, directly-comparable query pairs and
//!   the generator that produces labeled workloads with monotonic constraints.
//! - [`estimator`]: query featurization, a compact set-pooling neural estimator
//!   with hand-written backpropagation, and an equi-width histogram baseline.
//! - [`training`]: mean Q-error loss, the monotonic regularizer, Adam and the
//!   training loop, plus a hyperparameter grid search.
//! - [`evaluation`]: Q-error and MonoM statistics and report files.

pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod relation;
pub mod training;
pub mod workload;

pub use error::{Error, Result};
pub use estimator::{EstimatorModel, Featurizer, HistogramBaseline};
pub use evaluation::{evaluate, CardinalityEstimator, MetricsReport};
pub use relation::{ColumnKind, ColumnSchema, Distribution, Relation};
pub use training::{DistanceKind, EpochDiagnostics, Hyperparams, RegPairs, RegSpace};
pub use workload::{ConstraintSet, Orientation, Predicate, Query, Workload};

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 42;
