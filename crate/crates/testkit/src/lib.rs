//! Deterministic synthetic "natural-looking" colour images and standard
//! distortions, used as fixtures by tests and benches.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A scene of smooth shading, oriented texture at several scales, and
/// overlapping soft-edged shapes of varied colour.
pub fn scene(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let mut buf = vec![[0.0f64; 3]; (width * height) as usize];

    // background gradient between two colours
    let c0: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());

    // texture: sinusoids with amplitude falling off as 1/f
    let waves: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..24)
        .map(|_| {
            let f: f64 = rng.random_range(0.02..0.6);
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let ph: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.6..1.0));
            (f * th.cos(), f * th.sin(), ph, 0.025 / (f + 0.05), tint)
        })
        .collect();

    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let t = (((xf / w - 0.5) * ca + (yf / h - 0.5) * sa) + 0.75) / 1.5;
            let px = &mut buf[(y * width + x) as usize];
            for c in 0..3 {
                px[c] = c0[c] * (1.0 - t) + c1[c] * t;
            }
            for (fx, fy, ph, amp, tint) in &waves {
                let v = amp * (fx * xf + fy * yf + ph).sin();
                for c in 0..3 {
                    px[c] += v * tint[c];
                }
            }
        }
    }

    // shapes
    let shapes = rng.random_range(8..16);
    for _ in 0..shapes {
        let colour: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let cx = rng.random_range(0.0..w);
        let cy = rng.random_range(0.0..h);
        let rx = rng.random_range(0.05..0.35) * w;
        let ry = rng.random_range(0.05..0.35) * h;
        let rot: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (cr, sr) = (rot.cos(), rot.sin());
        let boxy = rng.random_bool(0.4);
        let soft = rng.random_range(0.5..2.5);
        let alpha = rng.random_range(0.5..1.0);
        let stripe = if rng.random_bool(0.3) {
            Some(rng.random_range(0.15..0.6))
        } else {
            None
        };
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let u = (dx * cr + dy * sr) / rx;
                let v = (-dx * sr + dy * cr) / ry;
                let d = if boxy { u.abs().max(v.abs()) } else { (u * u + v * v).sqrt() };
                // signed distance in pixels (approximately)
                let edge = (1.0 - d) * rx.min(ry);
                let cover = (0.5 + edge / (2.0 * soft)).clamp(0.0, 1.0) * alpha;
                if cover <= 0.0 {
                    continue;
                }
                let shade = match stripe {
                    Some(f) => 0.85 + 0.15 * (f * (dx * sr - dy * cr)).sin(),
                    None => 1.0,
                };
                let px = &mut buf[(y * width + x) as usize];
                for c in 0..3 {
                    px[c] = px[c] * (1.0 - cover) + colour[c] * shade * cover;
                }
            }
        }
    }

    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut img = RgbImage::new(width, height);
    for (i, p) in img.pixels_mut().enumerate() {
        let v = buf[i];
        *p = Rgb(std::array::from_fn(|c| {
            ((v[c] + noise.sample(&mut rng)).clamp(0.0, 1.0) * 255.0).round() as u8
        }));
    }
    image::imageops::blur(&img, 0.6)
}

/// `count` scenes of the given size, seeded `seed, seed + 1, ...`.
pub fn corpus(count: usize, width: u32, height: u32, seed: u64) -> Vec<RgbImage> {
    (0..count as u64).map(|i| scene(width, height, seed + i)).collect()
}

/// Writes a corpus as numbered PNG files and returns their paths.
pub fn write_corpus(dir: &Path, count: usize, width: u32, height: u32, seed: u64) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).expect("create corpus dir");
    corpus(count, width, height, seed)
        .into_iter()
        .enumerate()
        .map(|(i, img)| {
            let path = dir.join(format!("scene_{i:03}.png"));
            img.save(&path).expect("write fixture image");
            path
        })
        .collect()
}

pub fn gaussian_blur(img: &RgbImage, sigma: f32) -> RgbImage {
    image::imageops::blur(img, sigma)
}

/// Adds zero-mean Gaussian noise with standard deviation `std` in 8-bit
/// units. The same seed draws the same unit noise field, so increasing `std`
/// only scales it.
pub fn gaussian_noise(img: &RgbImage, std: f64, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut out = img.clone();
    for p in out.pixels_mut() {
        for c in p.0.iter_mut() {
            let v = *c as f64 + std * unit.sample(&mut rng);
            *c = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}
