use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{PatchBatch, PATCH_DIM};
use crate::error::{Error, Result};
use crate::exec::{Execution, CHUNK_COLUMNS};

pub const DEFAULT_EPSILON: f64 = 0.1;

/// Eigenvalues below this fraction of the largest count as zero when no
/// regularization is requested.
const RANK_TOLERANCE: f64 = 1e-12;

/// Per-location mean and symmetric ZCA transform fitted on training patches
/// and reused unchanged on test patches.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: DVector<f64>,
    pub zca: DMatrix<f64>,
    pub epsilon: f64,
}

impl NormalizationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            zca: DMatrix::identity(dim, dim),
            epsilon: 0.0,
        }
    }
}

pub fn fit_normalization(batch: &PatchBatch, epsilon: f64) -> Result<NormalizationStats> {
    fit_normalization_with(Execution::default(), batch, epsilon)
}

/// Mean over columns, then `U (L + eps I)^(-1/2) U^T` from the eigensystem of
/// the centered covariance (normalized by the column count).
pub fn fit_normalization_with(
    exec: Execution,
    batch: &PatchBatch,
    epsilon: f64,
) -> Result<NormalizationStats> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    let x = batch.matrix();
    let (d, m) = x.shape();
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    if epsilon == 0.0 && m < d {
        return Err(Error::InvalidParameter(format!(
            "{m} patches cannot give a full-rank {d}x{d} covariance; use epsilon > 0"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("patch batch"));
    }

    let sums = exec.map_chunks(m, CHUNK_COLUMNS, |r| {
        x.columns(r.start, r.len()).column_sum()
    });
    let mean = sums.into_iter().fold(DVector::zeros(d), |acc, s| acc + s) / m as f64;

    let partial_cov = exec.map_chunks(m, CHUNK_COLUMNS, |r| {
        let mut xc = x.columns(r.start, r.len()).into_owned();
        for mut col in xc.column_iter_mut() {
            col -= &mean;
        }
        &xc * xc.transpose()
    });
    let cov = partial_cov
        .into_iter()
        .fold(DMatrix::zeros(d, d), |acc, c| acc + c)
        / m as f64;

    let zca = zca_from_covariance(cov, epsilon)?;
    Ok(NormalizationStats { mean, zca, epsilon })
}

fn zca_from_covariance(cov: DMatrix<f64>, epsilon: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if epsilon == 0.0 && (min <= RANK_TOLERANCE * max.max(0.0) || max <= 0.0) {
        return Err(Error::SingularCovariance { min_eigenvalue: min });
    }
    let scale = eig
        .eigenvalues
        .map(|l| 1.0 / (l.max(0.0) + epsilon).sqrt());
    let u = &eig.eigenvectors;
    let mut zca = u * DMatrix::from_diagonal(&scale) * u.transpose();
    // exact symmetry
    let t = zca.transpose();
    zca += t;
    zca *= 0.5;
    Ok(zca)
}

pub fn apply_normalization(batch: &PatchBatch, stats: &NormalizationStats) -> Result<PatchBatch> {
    apply_normalization_with(Execution::default(), batch, stats)
}

/// `zca * (column - mean)` for every column.
pub fn apply_normalization_with(
    exec: Execution,
    batch: &PatchBatch,
    stats: &NormalizationStats,
) -> Result<PatchBatch> {
    if stats.dim() != PATCH_DIM || stats.zca.shape() != (PATCH_DIM, PATCH_DIM) {
        return Err(Error::DimensionMismatch {
            what: "normalization stats",
            expected: PATCH_DIM,
            found: stats.dim(),
        });
    }
    let x = batch.matrix();
    let m = x.ncols();
    let parts = exec.map_chunks(m, CHUNK_COLUMNS, |r| {
        let mut xc = x.columns(r.start, r.len()).into_owned();
        for mut col in xc.column_iter_mut() {
            col -= &stats.mean;
        }
        &stats.zca * xc
    });
    let mut data = Vec::with_capacity(m * PATCH_DIM);
    for p in &parts {
        data.extend_from_slice(p.as_slice());
    }
    PatchBatch::new(DMatrix::from_vec(PATCH_DIM, m, data))
}
