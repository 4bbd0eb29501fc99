//! Model file: a small binary container holding a JSON header and the raw
//! parameter arrays.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "SPIQAMDL"
//! 8       4     format version, u32 little-endian
//! 12      8     header length H in bytes, u64 little-endian
//! 20      H     UTF-8 JSON header (dimensions, hyperparameters, provenance,
//!               suppression defaults, payload length and SHA-256)
//! 20+H    ...   payload: f64 little-endian arrays, matrices column-major,
//!               in order mean[d], zca[d*d], w1[n*d], b1[n], w2[d*n], b2[d]
//! ```
//!
//! The version is checked before the header is parsed, and every dimension is
//! checked against fixed caps and the actual file length before any array is
//! allocated.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoder::{DecoderHyperparams, DecoderModel, Provenance};
use crate::error::{Error, ModelFileError, Result};
use crate::preprocess::NormalizationStats;
use crate::scorer::SuppressionPolicy;

pub const MAGIC: &[u8; 8] = b"SPIQAMDL";
pub const FORMAT_VERSION: u32 = 1;

const PREAMBLE: usize = 8 + 4 + 8;
const MAX_HEADER_BYTES: u64 = 1 << 20;
const MAX_INPUT_DIM: usize = 4096;
const MAX_HIDDEN: usize = 1 << 16;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    input_dim: usize,
    n_hidden: usize,
    epsilon: f64,
    hyperparams: DecoderHyperparams,
    provenance: Provenance,
    suppression: SuppressionPolicy,
    payload_bytes: u64,
    payload_sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn payload_len(d: usize, n: usize) -> usize {
    8 * (d + d * d + 2 * n * d + n + d)
}

/// Serializes a model to bytes.
pub fn encode_model(model: &DecoderModel) -> Result<Vec<u8>> {
    for (name, values) in [
        ("w1", model.w1.as_slice()),
        ("b1", model.b1.as_slice()),
        ("w2", model.w2.as_slice()),
        ("b2", model.b2.as_slice()),
        ("normalization mean", model.stats.mean.as_slice()),
        ("zca", model.stats.zca.as_slice()),
    ] {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelFileError::NonFinite(name).into());
        }
    }
    model.validate()?;
    let (d, n) = (model.input_dim(), model.n_hidden());
    let mut payload = Vec::with_capacity(payload_len(d, n));
    for values in [
        model.stats.mean.as_slice(),
        model.stats.zca.as_slice(),
        model.w1.as_slice(),
        model.b1.as_slice(),
        model.w2.as_slice(),
        model.b2.as_slice(),
    ] {
        for v in values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        input_dim: d,
        n_hidden: n,
        epsilon: model.stats.epsilon,
        hyperparams: model.hyperparams.clone(),
        provenance: model.provenance.clone(),
        suppression: model.suppression,
        payload_bytes: payload.len() as u64,
        payload_sha256: hex(&Sha256::digest(&payload)),
    };
    let header = serde_json::to_vec_pretty(&header)?;
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Parses and validates a model from bytes.
pub fn decode_model(bytes: &[u8]) -> Result<DecoderModel> {
    let dim_err = |msg: String| Error::Model(ModelFileError::Dimension(msg));
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFileError::BadMagic.into());
    }
    if bytes.len() < 12 {
        return Err(dim_err("file truncated inside the preamble".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        }
        .into());
    }
    if bytes.len() < PREAMBLE {
        return Err(dim_err("file truncated inside the preamble".into()));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if header_len > MAX_HEADER_BYTES || header_len as usize > bytes.len() - PREAMBLE {
        return Err(dim_err(format!(
            "header length {header_len} exceeds the file or the {MAX_HEADER_BYTES}-byte cap"
        )));
    }
    let header_end = PREAMBLE + header_len as usize;
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end])
        .map_err(|e| ModelFileError::Header(e.to_string()))?;
    let (d, n) = (header.input_dim, header.n_hidden);
    if d == 0 || d > MAX_INPUT_DIM || n == 0 || n > MAX_HIDDEN {
        return Err(dim_err(format!(
            "input_dim {d} / n_hidden {n} outside supported range"
        )));
    }
    if header.hyperparams.n_hidden != n {
        return Err(dim_err(format!(
            "hyperparameters say {} hidden units, arrays say {n}",
            header.hyperparams.n_hidden
        )));
    }
    let expected = payload_len(d, n);
    let payload = &bytes[header_end..];
    if header.payload_bytes != expected as u64 || payload.len() != expected {
        return Err(dim_err(format!(
            "expected {expected} payload bytes for {n}x{d}, header says {}, file has {}",
            header.payload_bytes,
            payload.len()
        )));
    }
    if hex(&Sha256::digest(payload)) != header.payload_sha256 {
        return Err(ModelFileError::Checksum.into());
    }

    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |count: usize| -> Vec<f64> { values.by_ref().take(count).collect() };
    let mean = DVector::from_vec(take(d));
    let zca = DMatrix::from_vec(d, d, take(d * d));
    let w1 = DMatrix::from_vec(n, d, take(n * d));
    let b1 = DVector::from_vec(take(n));
    let w2 = DMatrix::from_vec(d, n, take(d * n));
    let b2 = DVector::from_vec(take(d));

    let model = DecoderModel {
        w1,
        b1,
        w2,
        b2,
        hyperparams: header.hyperparams,
        stats: NormalizationStats {
            mean,
            zca,
            epsilon: header.epsilon,
        },
        provenance: header.provenance,
        suppression: header.suppression,
    };
    model.validate()?;
    model.hyperparams.validate()?;
    model.suppression.validate()?;
    Ok(model)
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn save_model(model: &DecoderModel, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    write_atomic(path, &bytes)
}

pub fn load_model(path: &Path) -> Result<DecoderModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
