//! Effective run configuration: built-in defaults, overlaid by an optional
//! TOML file, overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparse_iqa::eval::DEFAULT_BINS;
use sparse_iqa::preprocess::DEFAULT_EPSILON;
use sparse_iqa::{DecoderHyperparams, SuppressionPolicy};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub patches_per_image: usize,
    pub max_images: usize,
    pub epsilon: f64,
    pub decoder: DecoderHyperparams,
    pub suppression: SuppressionPolicy,
    pub bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filters: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            patches_per_image: 100,
            max_images: 1000,
            epsilon: DEFAULT_EPSILON,
            decoder: DecoderHyperparams::default(),
            suppression: SuppressionPolicy::default(),
            bins: DEFAULT_BINS,
            jobs: None,
            corpus: None,
            model: None,
            trace: None,
            filters: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: sparse_iqa::Error| CliError::usage(e.to_string());
        self.decoder.validate().map_err(usage)?;
        self.suppression.validate().map_err(usage)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::usage(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.patches_per_image == 0 || self.max_images == 0 || self.bins == 0 {
            return Err(CliError::usage(
                "patches-per-image, max-images and bins must be positive",
            ));
        }
        if self.jobs == Some(0) {
            return Err(CliError::usage("jobs must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
