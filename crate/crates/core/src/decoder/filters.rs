use std::io::BufWriter;
use std::path::Path;

use image::GrayImage;

use super::model::DecoderModel;
use crate::error::{Error, Result};
use crate::preprocess::{PATCH_DIM, PATCH_PIXELS, PATCH_SIDE};

/// Pixels between tiles.
const GAP: u32 = 1;

/// Lays out every encoder row as a tile of its G, Y and Cr rasters side by
/// side (8 rows by 24 columns), each tile stretched to its own min..max range.
/// Tiles fill a near-square grid (20x20 for 400 units); gaps are black.
pub fn export_filter_grid(model: &DecoderModel) -> Result<GrayImage> {
    if model.input_dim() != PATCH_DIM {
        return Err(Error::DimensionMismatch {
            what: "filter length",
            expected: PATCH_DIM,
            found: model.input_dim(),
        });
    }
    let n = model.n_hidden();
    let cols = (n as f64).sqrt().ceil() as u32;
    let rows = (n as u32).div_ceil(cols);
    let side = PATCH_SIDE as u32;
    let tile_w = 3 * side;
    let width = cols * tile_w + (cols + 1) * GAP;
    let height = rows * side + (rows + 1) * GAP;
    let mut img = GrayImage::new(width, height);

    for unit in 0..n {
        let row = model.w1.row(unit);
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        let x0 = GAP + (unit as u32 % cols) * (tile_w + GAP);
        let y0 = GAP + (unit as u32 / cols) * (side + GAP);
        for (k, &v) in row.iter().enumerate() {
            let channel = (k / PATCH_PIXELS) as u32;
            let pixel = (k % PATCH_PIXELS) as u32;
            let level = if range > 0.0 { (v - lo) / range } else { 0.5 };
            let px = x0 + channel * side + pixel % side;
            let py = y0 + pixel / side;
            img.put_pixel(px, py, image::Luma([(level * 255.0).round() as u8]));
        }
    }
    Ok(img)
}

/// Writes the grid atomically as an 8-bit grayscale PNG, optionally with a
/// `Comment` text chunk.
pub fn write_filter_grid_png(grid: &GrayImage, path: &Path, comment: Option<&str>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut enc = png::Encoder::new(BufWriter::new(tmp.as_file()), grid.width(), grid.height());
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        if let Some(text) = comment {
            enc.add_text_chunk("Comment".into(), text.into())?;
        }
        let mut w = enc.write_header()?;
        w.write_image_data(grid.as_raw())?;
        w.finish()?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
