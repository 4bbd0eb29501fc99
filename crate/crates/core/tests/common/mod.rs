//! Shared fixtures and brute-force reference implementations for the
//! integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_iqa::decoder::{train, SparseObjective, TrainingTrace};
use sparse_iqa::preprocess::{apply_normalization, fit_normalization, sample_random_patches};
use sparse_iqa::{ChannelImage, DecoderHyperparams, DecoderModel, NormalizationStats, PatchBatch};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- gradient check ----

#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    /// `|a - fd| / max(|a|, |fd|, 1)`, worst coordinate.
    pub max_relative: f64,
    /// `|a - fd|_2 / |a + fd|_2` over all coordinates.
    pub aggregate: f64,
}

/// Central-difference check of the training objective on a small random
/// model with nonzero biases.
pub fn gradient_check(beta: f64, lambda: f64, seed: u64) -> GradientCheck {
    let hp = DecoderHyperparams { n_hidden: 7, beta, lambda, ..Default::default() };
    let mut r = rng(1000 + seed);
    let mut model = DecoderModel::initialize(hp.clone(), NormalizationStats::identity(10), seed).unwrap();
    model.b1.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
    model.b2.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
    let x = DMatrix::from_fn(10, 20, |_, _| r.random_range(-1.0..1.0));
    let obj = SparseObjective::new(&x, &hp).unwrap();
    let theta = model.params();
    let analytic = obj.evaluate(&theta).unwrap().gradient;
    let h = 1e-5;
    let (mut max_relative, mut diff2, mut sum2) = (0.0f64, 0.0, 0.0);
    for k in 0..theta.len() {
        let mut up = theta.clone();
        up[k] += h;
        let mut dn = theta.clone();
        dn[k] -= h;
        let fd = (obj.evaluate(&up).unwrap().value - obj.evaluate(&dn).unwrap().value) / (2.0 * h);
        let a = analytic[k];
        max_relative = max_relative.max((a - fd).abs() / a.abs().max(fd.abs()).max(1.0));
        diff2 += (a - fd).powi(2);
        sum2 += (a + fd).powi(2);
    }
    GradientCheck { max_relative, aggregate: (diff2 / sum2).sqrt() }
}

pub const GRADIENT_GRID: [(f64, f64); 4] = [(0.0, 0.0), (5.0, 0.0), (0.0, 3e-3), (5.0, 3e-3)];

// ---- metric oracles ----

/// 1-based ranks with ties sharing their average rank, by counting.
pub fn naive_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn naive_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    num / (da * db).sqrt()
}

pub fn naive_spearman(a: &[f64], b: &[f64]) -> f64 {
    naive_pearson(&naive_ranks(a), &naive_ranks(b))
}

pub fn naive_rmse(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    (s / a.len() as f64).sqrt()
}

pub fn naive_outlier_ratio(pred: &[f64], mos: &[f64], std: &[f64]) -> f64 {
    let mut count = 0;
    for i in 0..pred.len() {
        if (pred[i] - mos[i]).abs() > 2.0 * std[i] {
            count += 1;
        }
    }
    count as f64 / pred.len() as f64
}

/// Unit-mass histograms, filling each bin by scanning for members.
pub fn naive_histograms(a: &[f64], b: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let fill = |v: &[f64]| {
        (0..bins)
            .map(|k| {
                let members = v
                    .iter()
                    .filter(|&&x| {
                        let index = ((x - lo) / width).floor() as usize;
                        index == k || (k == bins - 1 && index >= bins)
                    })
                    .count();
                members as f64 / v.len() as f64
            })
            .collect::<Vec<_>>()
    };
    (fill(a), fill(b))
}

/// Optimal 1-D transport by moving mass left to right, in bin units.
pub fn naive_emd(a: &[f64], b: &[f64]) -> f64 {
    let mut supply: Vec<f64> = a.to_vec();
    let mut demand: Vec<f64> = b.to_vec();
    let (mut i, mut j, mut cost) = (0, 0, 0.0);
    while i < supply.len() && j < demand.len() {
        let moved = supply[i].min(demand[j]);
        cost += moved * (i as f64 - j as f64).abs();
        supply[i] -= moved;
        demand[j] -= moved;
        if supply[i] <= 1e-15 {
            i += 1;
        }
        if demand[j] <= 1e-15 {
            j += 1;
        }
    }
    cost
}

pub fn naive_kl(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let zp: f64 = p.iter().map(|x| x + eps).sum();
    let zq: f64 = q.iter().map(|x| x + eps).sum();
    let mut s = 0.0;
    for k in 0..p.len() {
        let (x, y) = ((p[k] + eps) / zp, (q[k] + eps) / zq);
        s += x * (x / y).ln();
    }
    s.max(0.0)
}

pub fn naive_js(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(x, y)| (x + y) / 2.0).collect();
    let kl0 = |u: &[f64]| -> f64 {
        (0..u.len()).filter(|&k| u[k] > 0.0).map(|k| u[k] * (u[k] / m[k]).ln()).sum()
    };
    ((kl0(p) + kl0(q)) / 2.0).max(0.0)
}

pub fn naive_intersection_distance(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..p.len() {
        s += if p[k] < q[k] { p[k] } else { q[k] };
    }
    (1.0 - s).max(0.0)
}

pub fn naive_l2(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..p.len() {
        s += (p[k] - q[k]).powi(2);
    }
    s.sqrt()
}

/// Random scores with a share of exact ties.
pub fn random_scores(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = r.random_range(-3.0..3.0);
            if r.random_bool(0.3) { (v * 4.0).round() / 4.0 } else { v }
        })
        .collect()
}

// ---- desk-scale model ----

pub const DESK_IMAGES: usize = 50;
pub const DESK_SIDE: u32 = 96;
pub const DESK_PATCHES_PER_IMAGE: usize = 200;
pub const DESK_HIDDEN: usize = 100;
pub const DESK_SEED: u64 = 7;

pub struct Desk {
    pub model: DecoderModel,
    pub trace: TrainingTrace,
    pub seconds: f64,
}

pub fn train_desk_model() -> Desk {
    let start = std::time::Instant::now();
    let images = testkit::corpus(DESK_IMAGES, DESK_SIDE, DESK_SIDE, 1000);
    let batches: Vec<PatchBatch> = images
        .iter()
        .enumerate()
        .map(|(i, im)| {
            sample_random_patches(&ChannelImage::from_rgb(im).unwrap(), DESK_PATCHES_PER_IMAGE, i as u64)
                .unwrap()
        })
        .collect();
    let raw = PatchBatch::concat(&batches);
    let stats = fit_normalization(&raw, 0.1).unwrap();
    let whitened = apply_normalization(&raw, &stats).unwrap();
    let hp = DecoderHyperparams { n_hidden: DESK_HIDDEN, ..Default::default() };
    let (model, trace) = train(&whitened, &hp, &stats, DESK_SEED).unwrap();
    Desk { model, trace, seconds: start.elapsed().as_secs_f64() }
}

/// A quickly trained model for pipeline tests that only need plausible
/// filters.
pub fn small_model() -> &'static DecoderModel {
    static MODEL: OnceLock<DecoderModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let images = testkit::corpus(12, 64, 64, 2000);
        let batches: Vec<PatchBatch> = images
            .iter()
            .enumerate()
            .map(|(i, im)| sample_random_patches(&ChannelImage::from_rgb(im).unwrap(), 150, i as u64).unwrap())
            .collect();
        let raw = PatchBatch::concat(&batches);
        let stats = fit_normalization(&raw, 0.1).unwrap();
        let whitened = apply_normalization(&raw, &stats).unwrap();
        let hp = DecoderHyperparams { n_hidden: 48, max_iterations: 120, ..Default::default() };
        train(&whitened, &hp, &stats, 3).unwrap().0
    })
}
