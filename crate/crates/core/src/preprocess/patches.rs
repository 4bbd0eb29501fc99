use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Channel, ChannelImage, PATCH_DIM, PATCH_PIXELS, PATCH_SIDE};
use crate::error::{Error, Result};

/// Patch vectors stored one per column: 192 rows, `len()` columns.
///
/// Column layout is `[G raster | Y raster | Cr raster]`, each raster row-major
/// 8x8.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBatch {
    data: DMatrix<f64>,
}

impl PatchBatch {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != PATCH_DIM {
            return Err(Error::DimensionMismatch {
                what: "patch batch rows",
                expected: PATCH_DIM,
                found: data.nrows(),
            });
        }
        Ok(Self { data })
    }

    pub fn empty() -> Self {
        Self {
            data: DMatrix::zeros(PATCH_DIM, 0),
        }
    }

    /// Concatenates batches column-wise in the given order.
    pub fn concat<'a>(batches: impl IntoIterator<Item = &'a PatchBatch>) -> Self {
        let batches: Vec<&PatchBatch> = batches.into_iter().collect();
        let total: usize = batches.iter().map(|b| b.len()).sum();
        let mut data = Vec::with_capacity(total * PATCH_DIM);
        for b in batches {
            data.extend_from_slice(b.data.as_slice());
        }
        Self {
            data: DMatrix::from_vec(PATCH_DIM, total, data),
        }
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.data.as_slice()[index * PATCH_DIM..(index + 1) * PATCH_DIM]
    }

    /// Splits one column back into its channel rasters.
    pub fn channel_raster(&self, index: usize, channel: Channel) -> &[f64] {
        let offset = match channel {
            Channel::G => 0,
            Channel::Y => PATCH_PIXELS,
            Channel::Cr => 2 * PATCH_PIXELS,
        };
        &self.column(index)[offset..offset + PATCH_PIXELS]
    }
}

fn push_patch(image: &ChannelImage, left: usize, top: usize, out: &mut Vec<f64>) {
    let w = image.width();
    for channel in Channel::ALL {
        let plane = image.plane(channel);
        for row in top..top + PATCH_SIDE {
            out.extend_from_slice(&plane[row * w + left..row * w + left + PATCH_SIDE]);
        }
    }
}

fn check(image: &ChannelImage) -> Result<()> {
    if image.width() < PATCH_SIDE || image.height() < PATCH_SIDE {
        return Err(Error::ImageTooSmall {
            width: image.width(),
            height: image.height(),
        });
    }
    Ok(())
}

/// Draws `count` patches with top-left corners uniform over all valid positions.
pub fn sample_random_patches(image: &ChannelImage, count: usize, seed: u64) -> Result<PatchBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(image, count, &mut rng)
}

/// Like [`sample_random_patches`], drawing from stream `stream` of the
/// seeded generator. Giving each image of a corpus its own stream keeps
/// parallel sampling reproducible for a single seed.
pub fn sample_random_patches_stream(
    image: &ChannelImage,
    count: usize,
    seed: u64,
    stream: u64,
) -> Result<PatchBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    sample_with_rng(image, count, &mut rng)
}

fn sample_with_rng<R: Rng>(
    image: &ChannelImage,
    count: usize,
    rng: &mut R,
) -> Result<PatchBatch> {
    check(image)?;
    if count == 0 {
        return Err(Error::InvalidParameter("patch count must be positive".into()));
    }
    let max_left = image.width() - PATCH_SIDE;
    let max_top = image.height() - PATCH_SIDE;
    let mut data = Vec::with_capacity(count * PATCH_DIM);
    for _ in 0..count {
        let left = rng.random_range(0..=max_left);
        let top = rng.random_range(0..=max_top);
        push_patch(image, left, top, &mut data);
    }
    Ok(PatchBatch {
        data: DMatrix::from_vec(PATCH_DIM, count, data),
    })
}

/// Non-overlapping 8x8 tiles in row-major scan order. Right and bottom
/// remainders narrower than a tile are dropped.
pub fn tile_nonoverlapping(image: &ChannelImage) -> Result<PatchBatch> {
    check(image)?;
    let rows = image.height() / PATCH_SIDE;
    let cols = image.width() / PATCH_SIDE;
    let mut data = Vec::with_capacity(rows * cols * PATCH_DIM);
    for tr in 0..rows {
        for tc in 0..cols {
            push_patch(image, tc * PATCH_SIDE, tr * PATCH_SIDE, &mut data);
        }
    }
    Ok(PatchBatch {
        data: DMatrix::from_vec(PATCH_DIM, rows * cols, data),
    })
}
