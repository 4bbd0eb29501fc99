use std::path::Path;

use image::{DynamicImage, RgbImage};

use super::PATCH_SIDE;
use crate::error::{Error, Result};

/// The planes kept from an RGB image, in patch concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    G,
    Y,
    Cr,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::G, Channel::Y, Channel::Cr];
}

/// Green, luma and red-difference chroma planes of one image, each scaled to
/// [0, 1] and stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImage {
    width: usize,
    height: usize,
    g: Vec<f64>,
    y: Vec<f64>,
    cr: Vec<f64>,
}

impl ChannelImage {
    /// Builds from interleaved 8-bit RGB samples.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        check_size(width, height)?;
        if rgb.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                what: "rgb buffer",
                expected: width * height * 3,
                found: rgb.len(),
            });
        }
        let n = width * height;
        let mut g = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut cr = Vec::with_capacity(n);
        for px in rgb.chunks_exact(3) {
            let (gv, yv, crv) = rgb_to_gycr(px[0], px[1], px[2]);
            g.push(gv);
            y.push(yv);
            cr.push(crv);
        }
        Ok(Self {
            width,
            height,
            g,
            y,
            cr,
        })
    }

    /// Builds from already-scaled planes. Values must lie in [0, 1].
    pub fn from_planes(
        width: usize,
        height: usize,
        g: Vec<f64>,
        y: Vec<f64>,
        cr: Vec<f64>,
    ) -> Result<Self> {
        check_size(width, height)?;
        for (plane, name) in [(&g, "g plane"), (&y, "y plane"), (&cr, "cr plane")] {
            if plane.len() != width * height {
                return Err(Error::DimensionMismatch {
                    what: name,
                    expected: width * height,
                    found: plane.len(),
                });
            }
            if plane.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} has values outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            g,
            y,
            cr,
        })
    }

    pub fn from_dynamic(image: &DynamicImage) -> Result<Self> {
        match image {
            DynamicImage::ImageRgb8(rgb) => Self::from_rgb(rgb),
            other => Err(Error::ChannelCount {
                found: format!("{:?}", other.color()),
            }),
        }
    }

    pub fn from_rgb(image: &RgbImage) -> Result<Self> {
        Self::from_rgb8(
            image.width() as usize,
            image.height() as usize,
            image.as_raw(),
        )
    }

    /// Decodes a PNG, JPEG or BMP file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?;
        Self::from_dynamic(&reader.decode()?)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::G => &self.g,
            Channel::Y => &self.y,
            Channel::Cr => &self.cr,
        }
    }
}

/// See [`ChannelImage::from_dynamic`].
pub fn select_channels(image: &DynamicImage) -> Result<ChannelImage> {
    ChannelImage::from_dynamic(image)
}

fn check_size(width: usize, height: usize) -> Result<()> {
    if width < PATCH_SIDE || height < PATCH_SIDE {
        return Err(Error::ImageTooSmall { width, height });
    }
    Ok(())
}

/// BT.601 full-range luma and red-difference chroma, with G passed through.
/// Cr is offset so that achromatic pixels sit at 0.5.
fn rgb_to_gycr(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cr = 0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    (g, y.clamp(0.0, 1.0), cr.clamp(0.0, 1.0))
}
