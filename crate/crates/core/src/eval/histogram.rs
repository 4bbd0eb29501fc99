use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to every bin before the KL divergence.
pub const KL_SMOOTHING: f64 = 1e-10;

pub const DEFAULT_BINS: usize = 10;

/// Distances between two normalized histograms; lower means more similar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramDistances {
    /// 1-D earth mover's distance in bin units: sum of |CDF_a - CDF_b|.
    pub emd: f64,
    /// KL(a || b) after additive smoothing.
    pub kl: f64,
    pub js: f64,
    /// Histogram intersection expressed as a difference: 1 - sum min(a, b).
    pub hi: f64,
    pub l2: f64,
}

impl HistogramDistances {
    pub const ZERO: Self = Self {
        emd: 0.0,
        kl: 0.0,
        js: 0.0,
        hi: 0.0,
        l2: 0.0,
    };
}

/// Unit-mass histograms of both samples over `bins` equal bins spanning the
/// joint min..max range. `None` when that range has zero width.
pub fn joint_histograms(a: &[f64], b: &[f64], bins: usize) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bin count must be positive".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("histogram input"));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Ok(None);
    }
    let hist = |v: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in v {
            let k = (((x - lo) / (hi - lo)) * bins as f64) as usize;
            h[k.min(bins - 1)] += 1.0;
        }
        let n = v.len() as f64;
        h.iter_mut().for_each(|c| *c /= n);
        h
    };
    Ok(Some((hist(a), hist(b))))
}

pub fn histogram_distances(a: &[f64], b: &[f64], bins: usize) -> Result<HistogramDistances> {
    let Some((ha, hb)) = joint_histograms(a, b, bins)? else {
        return Ok(HistogramDistances::ZERO);
    };
    Ok(distances(&ha, &hb))
}

/// Distances between two unit-mass histograms over the same bins.
pub fn distances(ha: &[f64], hb: &[f64]) -> HistogramDistances {
    let (mut ca, mut cb, mut emd) = (0.0, 0.0, 0.0);
    for (x, y) in ha.iter().zip(hb) {
        ca += x;
        cb += y;
        emd += (ca - cb).abs();
    }

    let norm = 1.0 + KL_SMOOTHING * ha.len() as f64;
    let kl = ha
        .iter()
        .zip(hb)
        .map(|(x, y)| {
            let (x, y) = ((x + KL_SMOOTHING) / norm, (y + KL_SMOOTHING) / norm);
            x * (x / y).ln()
        })
        .sum::<f64>()
        .max(0.0);

    let half_kl = |p: &[f64], q: &[f64]| -> f64 {
        p.iter()
            .zip(q)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| {
                let m = 0.5 * (x + y);
                x * (x / m).ln()
            })
            .sum()
    };
    let js = (0.5 * half_kl(ha, hb) + 0.5 * half_kl(hb, ha)).max(0.0);

    let hi = 1.0 - ha.iter().zip(hb).map(|(x, y)| x.min(*y)).sum::<f64>();
    let l2 = ha.iter().zip(hb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    HistogramDistances {
        emd,
        kl,
        js,
        hi: hi.max(0.0),
        l2,
    }
}
