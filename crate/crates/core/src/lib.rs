//! Full-reference image quality estimation from unsupervised sparse
//! representations.
//!
//! A sparse linear decoder is trained on whitened 8x8 colour patches without
//! any quality labels. To score a distorted image against its reference, both
//! are tiled into patches, encoded into hidden activations, weak activations
//! are suppressed, and the two activation vectors are compared by rank
//! correlation. The [`eval`] module holds the benchmark harness used to
//! validate any estimator against subjective scores.

pub mod decoder;
pub mod error;
pub mod eval;
pub mod exec;
pub mod model_io;
pub mod preprocess;
pub mod scorer;

pub use decoder::{DecoderHyperparams, DecoderModel};
pub use error::{Error, ModelFileError, Result};
pub use exec::Execution;
pub use preprocess::{ChannelImage, NormalizationStats, PatchBatch};
pub use scorer::{QualityScore, SuppressionPolicy};
