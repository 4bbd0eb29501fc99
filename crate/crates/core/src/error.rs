use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a 3-channel 8-bit RGB image, got {found}")]
    ChannelCount { found: String },

    #[error("image is {width}x{height}, at least 8x8 is required")]
    ImageTooSmall { width: usize, height: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("covariance is singular (smallest eigenvalue {min_eigenvalue:e}); use epsilon > 0")]
    SingularCovariance { min_eigenvalue: f64 },

    #[error("hidden unit {unit} is saturated (mean activation {rho_hat})")]
    SaturatedUnit { unit: usize, rho_hat: f64 },

    #[error("objective evaluated to NaN")]
    ObjectiveNan,

    #[error("{which} vector is constant; rank correlation is undefined")]
    DegenerateInput { which: &'static str },

    #[error("unmatched ids: {}", .0.join(", "))]
    UnmatchedIds(Vec<String>),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("model file: {0}")]
    Model(#[from] ModelFileError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures specific to reading or writing a model file. Each class is a
/// separate variant so callers can tell corruption from incompatibility.
#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,

    #[error("unsupported format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("payload checksum mismatch")]
    Checksum,

    #[error("inconsistent dimensions: {0}")]
    Dimension(String),

    #[error("malformed header: {0}")]
    Header(String),

    #[error("refusing to save non-finite weights in {0}")]
    NonFinite(&'static str),
}
