//! Raw images to whitened 192-dimensional patch vectors.

mod color;
mod patches;
mod whiten;

pub use color::{select_channels, ChannelImage, Channel};
pub use patches::{
    sample_random_patches, sample_random_patches_stream, tile_nonoverlapping, PatchBatch,
};
pub use whiten::{
    apply_normalization, apply_normalization_with, fit_normalization, fit_normalization_with,
    NormalizationStats, DEFAULT_EPSILON,
};

/// Patch side length in pixels.
pub const PATCH_SIDE: usize = 8;
/// Pixels in one channel raster of a patch.
pub const PATCH_PIXELS: usize = PATCH_SIDE * PATCH_SIDE;
/// Length of a patch vector: G, Y and Cr rasters concatenated.
pub const PATCH_DIM: usize = 3 * PATCH_PIXELS;
