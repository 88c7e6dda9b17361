//! Query featurization, the set-pooling neural estimator and a histogram baseline.

mod featurize;
mod histogram;
mod model;

pub use featurize::{Featurized, Featurizer};
pub use histogram::{baseline_estimate, HistogramBaseline};
pub use model::{
    load_model, save_model, Dense, EstimatorModel, ForwardCache, Gradients, LabelNorm, QueryBatch,
    MODEL_FORMAT_VERSION,
};
