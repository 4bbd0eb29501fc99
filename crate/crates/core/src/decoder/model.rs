use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::NormalizationStats;
use crate::scorer::SuppressionPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderHyperparams {
    pub n_hidden: usize,
    /// Target mean activation of each hidden unit.
    pub rho: f64,
    /// Weight of the KL sparsity penalty.
    pub beta: f64,
    /// Weight decay on both weight matrices (biases excluded).
    pub lambda: f64,
    pub max_iterations: usize,
    pub lbfgs_memory: usize,
}

impl Default for DecoderHyperparams {
    fn default() -> Self {
        Self {
            n_hidden: 400,
            rho: 0.035,
            beta: 5.0,
            lambda: 3e-3,
            max_iterations: 400,
            lbfgs_memory: 10,
        }
    }
}

impl DecoderHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_hidden == 0 {
            return bad("n_hidden must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.lbfgs_memory == 0 {
            return bad("lbfgs_memory must be at least 1".into());
        }
        Ok(())
    }
}

/// Where a trained model came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Provenance {
    pub seed: u64,
    pub patch_count: u64,
    /// Hex SHA-256 over the training images, empty when unknown.
    pub corpus_digest: String,
    /// Effective run configuration as JSON text, empty when unknown.
    pub config: String,
}

/// Encoder `w1` is `n_hidden x input_dim` so the hidden pre-activation is
/// `w1 * p + b1`; decoder `w2` is `input_dim x n_hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub hyperparams: DecoderHyperparams,
    pub stats: NormalizationStats,
    pub provenance: Provenance,
    pub suppression: SuppressionPolicy,
}

impl DecoderModel {
    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn initialize(
        hyperparams: DecoderHyperparams,
        stats: NormalizationStats,
        seed: u64,
    ) -> Result<Self> {
        hyperparams.validate()?;
        let n = hyperparams.n_hidden;
        let d = stats.dim();
        let r = (6.0 / (n + d) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = DMatrix::from_fn(n, d, |_, _| rng.random_range(-r..r));
        let w2 = DMatrix::from_fn(d, n, |_, _| rng.random_range(-r..r));
        Ok(Self {
            w1,
            b1: DVector::zeros(n),
            w2,
            b2: DVector::zeros(d),
            hyperparams,
            stats,
            provenance: Provenance::default(),
            suppression: SuppressionPolicy::default(),
        })
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    /// Number of trainable parameters.
    pub fn param_len(&self) -> usize {
        param_len(self.n_hidden(), self.input_dim())
    }

    /// Flat parameter vector: `w1`, `b1`, `w2`, `b2`, matrices column-major.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(self.b1.as_slice());
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(self.b2.as_slice());
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        let (n, d) = (self.n_hidden(), self.input_dim());
        if theta.len() != param_len(n, d) {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: param_len(n, d),
                found: theta.len(),
            });
        }
        let (w1, rest) = theta.split_at(n * d);
        let (b1, rest) = rest.split_at(n);
        let (w2, b2) = rest.split_at(d * n);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
        Ok(())
    }

    /// Checks shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.n_hidden(), self.input_dim());
        let shape = |what, expected, found| {
            if expected != found {
                Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                })
            } else {
                Ok(())
            }
        };
        shape("hidden units", self.hyperparams.n_hidden, n)?;
        shape("b1 length", n, self.b1.len())?;
        shape("w2 rows", d, self.w2.nrows())?;
        shape("w2 columns", n, self.w2.ncols())?;
        shape("b2 length", d, self.b2.len())?;
        shape("normalization mean", d, self.stats.mean.len())?;
        shape("zca rows", d, self.stats.zca.nrows())?;
        shape("zca columns", d, self.stats.zca.ncols())?;
        for (name, values) in [
            ("w1", self.w1.as_slice()),
            ("b1", self.b1.as_slice()),
            ("w2", self.w2.as_slice()),
            ("b2", self.b2.as_slice()),
            ("normalization mean", self.stats.mean.as_slice()),
            ("zca", self.stats.zca.as_slice()),
        ] {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(())
    }
}

pub(crate) fn param_len(n_hidden: usize, input_dim: usize) -> usize {
    2 * n_hidden * input_dim + n_hidden + input_dim
}
