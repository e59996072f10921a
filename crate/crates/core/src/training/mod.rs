//! Optimisation, early stopping, grid search and cross-validation.

mod adam;
mod batch;
mod config;
mod crossval;
mod fit;
mod grid;

pub use adam::{adam_step, clip_gradients, OptimizerState};
pub use batch::{batch_loss, make_batches, pad_batch, BatchInputs, PaddedBatch};
pub use config::{Hyperparameters, TrainConfig};
pub use crossval::{aggregate_results, model_config, run_crossval, run_fold, run_fold_with_grid, CrossvalResult, FoldResult, TuningProtocol};
pub use fit::{evaluate, fit, fit_with, predict_all, train_epoch, EpochRecord, FitOutcome};
pub use grid::{grid_search, grid_search_with, GridPoint, GridResult, GridSpace};

#[cfg(test)]
mod tests;
