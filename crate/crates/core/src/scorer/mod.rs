//! Pairwise quality score from suppressed sparse representations.

mod correlation;

use serde::{Deserialize, Serialize};

pub use correlation::{pearson, ranks, spearman};

use crate::decoder::{encode_with, DecoderModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preprocess::{apply_normalization_with, tile_nonoverlapping, ChannelImage};

/// Exponent applied to the rank correlation.
pub const SCORE_EXPONENT: i32 = 10;

/// Hidden activations of every tile of an image, patch-major: the
/// activations of patch 0, then patch 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRepresentation {
    pub values: Vec<f64>,
    pub n_hidden: usize,
    pub patch_count: usize,
}

impl SparseRepresentation {
    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Rule for zeroing weak activations before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SuppressionPolicy {
    /// Zero entries below `tau` times the vector's own mean.
    MeanRelative { tau: f64 },
    /// Zero entries below a fixed activation level.
    Absolute { threshold: f64 },
}

impl Default for SuppressionPolicy {
    fn default() -> Self {
        SuppressionPolicy::MeanRelative { tau: 0.5 }
    }
}

impl SuppressionPolicy {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            SuppressionPolicy::MeanRelative { tau } => tau,
            SuppressionPolicy::Absolute { threshold } => threshold,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "suppression threshold must be finite and >= 0, got {v}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for SuppressionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SuppressionPolicy::MeanRelative { tau } => write!(f, "mean-relative tau={tau}"),
            SuppressionPolicy::Absolute { threshold } => write!(f, "absolute threshold={threshold}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    /// `spearman_raw` to the tenth power, in [0, 1].
    pub value: f64,
    pub spearman_raw: f64,
}

impl QualityScore {
    pub fn from_correlation(spearman_raw: f64) -> Self {
        Self {
            value: spearman_raw.powi(SCORE_EXPONENT),
            spearman_raw,
        }
    }
}

pub fn represent(model: &DecoderModel, image: &ChannelImage) -> Result<SparseRepresentation> {
    represent_with(Execution::default(), model, image)
}

/// Tiles the image, whitens with the model's training statistics, encodes,
/// and flattens column by column.
pub fn represent_with(
    exec: Execution,
    model: &DecoderModel,
    image: &ChannelImage,
) -> Result<SparseRepresentation> {
    let tiles = tile_nonoverlapping(image)?;
    let whitened = apply_normalization_with(exec, &tiles, &model.stats)?;
    let acts = encode_with(exec, model, whitened.matrix())?;
    Ok(SparseRepresentation {
        n_hidden: acts.nrows(),
        patch_count: acts.ncols(),
        values: acts.data.into(),
    })
}

/// Applies the policy once. The flag is set when the input is entirely zero,
/// in which case it is returned unchanged.
pub fn suppress(rep: &SparseRepresentation, policy: &SuppressionPolicy) -> (SparseRepresentation, bool) {
    if rep.is_all_zero() {
        return (rep.clone(), true);
    }
    let threshold = match *policy {
        SuppressionPolicy::MeanRelative { tau } => {
            tau * rep.values.iter().sum::<f64>() / rep.values.len() as f64
        }
        SuppressionPolicy::Absolute { threshold } => threshold,
    };
    let values = rep
        .values
        .iter()
        .map(|&v| if v < threshold { 0.0 } else { v })
        .collect();
    (
        SparseRepresentation {
            values,
            ..rep.clone()
        },
        false,
    )
}

/// Quality of `distorted` relative to `reference` using the model's stored
/// suppression policy.
pub fn score_pair(model: &DecoderModel, reference: &ChannelImage, distorted: &ChannelImage) -> Result<QualityScore> {
    score_pair_with(Execution::default(), model, &model.suppression, reference, distorted)
}

pub fn score_pair_with(
    exec: Execution,
    model: &DecoderModel,
    policy: &SuppressionPolicy,
    reference: &ChannelImage,
    distorted: &ChannelImage,
) -> Result<QualityScore> {
    policy.validate()?;
    if reference.width() != distorted.width() {
        return Err(Error::DimensionMismatch {
            what: "image width",
            expected: reference.width(),
            found: distorted.width(),
        });
    }
    if reference.height() != distorted.height() {
        return Err(Error::DimensionMismatch {
            what: "image height",
            expected: reference.height(),
            found: distorted.height(),
        });
    }
    let (r, _) = suppress(&represent_with(exec, model, reference)?, policy);
    let (d, _) = suppress(&represent_with(exec, model, distorted)?, policy);
    compare(&r.values, &d.values)
}

/// Rank correlation of two suppressed representations, raised to the tenth
/// power.
pub fn compare(reference: &[f64], distorted: &[f64]) -> Result<QualityScore> {
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if !reference.is_empty() && constant(reference) {
        return Err(Error::DegenerateInput { which: "reference" });
    }
    if !distorted.is_empty() && constant(distorted) {
        return Err(Error::DegenerateInput { which: "distorted" });
    }
    spearman(reference, distorted).map(QualityScore::from_correlation)
}
