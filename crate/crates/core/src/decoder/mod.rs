//! Sparse linear decoder: a sigmoid hidden layer with a linear reconstruction
//! layer, trained full-batch with L-BFGS under a KL sparsity penalty.

mod filters;
pub mod lbfgs;
mod model;
mod objective;
mod train;

pub use filters::{export_filter_grid, write_filter_grid_png};
pub use lbfgs::{lbfgs_minimize, LbfgsOptions, LbfgsOutcome, Termination};
pub use model::{DecoderHyperparams, DecoderModel, Provenance};
pub use objective::{
    encode, encode_with, kl_sparsity, mean_activation, objective, Evaluation, SaturationPolicy,
    SparseObjective,
};
pub use train::{train, train_with, TraceRecord, TrainingTrace};
