//! Combined Q-error and monotonic-regularization training.

mod adam;
mod grid;
mod hyper;
mod loss;
mod train;

pub use adam::Adam;
pub use grid::{
    best_by_monom_per_lambda, grid_search, read_grid_json, write_grid_csv, Grid, GridRow, GridRun,
    GRID_CSV_HEADER,
};
pub use hyper::{DistanceKind, Hyperparams, RegPairs, RegSpace};
pub use loss::{
    distance, distance_gradient, loss_and_gradient, monotonic_regularizer, qerror_loss,
    regularizer_terms, softened_sign, total_loss, LossEval, PairSet, RegEval, TotalLossEval,
};
pub use train::{
    min_max_normalize, train, train_with, write_diagnostics_csv, EpochDiagnostics, TrainOptions,
    TrainedModel, DIAGNOSTICS_CSV_HEADER,
};
