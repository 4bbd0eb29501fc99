use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::{pearson, spearman};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub plcc: f64,
    pub srcc: f64,
    /// Absent when no per-image standard deviations are available.
    pub outlier_ratio: Option<f64>,
}

/// Accuracy, linearity, monotonicity and consistency of regressed estimates.
///
/// `rmse`, `plcc` and `outlier_ratio` use the regressed predictions; `srcc`
/// uses the raw objective scores (identical whenever the fitted curve is
/// strictly increasing). An outlier lies more than two standard deviations
/// from its subjective score.
pub fn compute_metrics(
    objective: &[f64],
    regressed: &[f64],
    mos: &[f64],
    mos_std: Option<&[f64]>,
) -> Result<Metrics> {
    let n = mos.len();
    for (what, len) in [("objective scores", objective.len()), ("regressed scores", regressed.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    let rmse = (regressed
        .iter()
        .zip(mos)
        .map(|(r, m)| (r - m).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let plcc = pearson(regressed, mos)?;
    let srcc = spearman(objective, mos)?;
    let outlier_ratio = match mos_std {
        None => None,
        Some(std) => {
            if std.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "mos standard deviations",
                    expected: n,
                    found: std.len(),
                });
            }
            let outliers = regressed
                .iter()
                .zip(mos)
                .zip(std)
                .filter(|((r, m), s)| (*r - *m).abs() > 2.0 * **s)
                .count();
            Some(outliers as f64 / n as f64)
        }
    };
    Ok(Metrics {
        rmse,
        plcc,
        srcc,
        outlier_ratio,
    })
}
