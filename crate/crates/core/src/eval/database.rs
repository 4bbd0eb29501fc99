use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::histogram::{histogram_distances, HistogramDistances, DEFAULT_BINS};
use super::logistic::{fit_logistic, LogisticParams};
use super::metrics::compute_metrics;
use crate::error::{Error, Result};

/// One objective score row: `image_id, reference_id, score`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub image_id: String,
    pub reference_id: String,
    pub score: f64,
}

/// One subjective score row: `image_id, mos[, mos_std]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectiveRecord {
    pub image_id: String,
    pub mos: f64,
    pub mos_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub bins: usize,
    pub init: LogisticParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            init: LogisticParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_images: usize,
    pub regression: LogisticParams,
    pub rmse: f64,
    pub plcc: f64,
    pub srcc: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outlier_ratio: Option<f64>,
    /// Subjective scores against regressed estimates.
    pub histogram: HistogramDistances,
    pub config: EvalConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regression_warning: Option<String>,
    /// Comment lines carried over from the scores file (scoring policy, model).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub score_provenance: Vec<String>,
}

/// One point of the scatter plot: objective score, its regressed value, and
/// the subjective score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub image_id: String,
    pub objective: f64,
    pub regressed: f64,
    pub mos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub scatter: Vec<ScatterPoint>,
}

/// Joins scores to subjective records by image id (one-to-one) and runs the
/// regression, metrics and histogram comparison.
pub fn evaluate_records(
    scores: &[ScoreRecord],
    subjective: &[SubjectiveRecord],
    config: &EvalConfig,
) -> Result<Evaluation> {
    let mut by_id: HashMap<&str, &SubjectiveRecord> = HashMap::with_capacity(subjective.len());
    for rec in subjective {
        if by_id.insert(&rec.image_id, rec).is_some() {
            return Err(Error::DuplicateId(rec.image_id.clone()));
        }
    }
    let mut seen = HashSet::with_capacity(scores.len());
    for rec in scores {
        if !seen.insert(rec.image_id.as_str()) {
            return Err(Error::DuplicateId(rec.image_id.clone()));
        }
    }
    let mut unmatched: Vec<String> = scores
        .iter()
        .filter(|r| !by_id.contains_key(r.image_id.as_str()))
        .map(|r| format!("{} (no subjective score)", r.image_id))
        .collect();
    unmatched.extend(
        subjective
            .iter()
            .filter(|r| !seen.contains(r.image_id.as_str()))
            .map(|r| format!("{} (no objective score)", r.image_id)),
    );
    if !unmatched.is_empty() {
        return Err(Error::UnmatchedIds(unmatched));
    }

    let objective: Vec<f64> = scores.iter().map(|r| r.score).collect();
    let joined: Vec<&SubjectiveRecord> = scores.iter().map(|r| by_id[r.image_id.as_str()]).collect();
    let mos: Vec<f64> = joined.iter().map(|r| r.mos).collect();
    let mos_std: Option<Vec<f64>> = joined.iter().map(|r| r.mos_std).collect();

    let fit = fit_logistic(&objective, &mos, config.init)?;
    let regressed: Vec<f64> = objective.iter().map(|&x| fit.params.predict(x)).collect();
    let metrics = compute_metrics(&objective, &regressed, &mos, mos_std.as_deref())?;
    let histogram = histogram_distances(&mos, &regressed, config.bins)?;

    let scatter = scores
        .iter()
        .zip(&regressed)
        .zip(&mos)
        .map(|((s, &r), &m)| ScatterPoint {
            image_id: s.image_id.clone(),
            objective: s.score,
            regressed: r,
            mos: m,
        })
        .collect();
    Ok(Evaluation {
        report: EvalReport {
            n_images: scores.len(),
            regression: fit.params,
            rmse: metrics.rmse,
            plcc: metrics.plcc,
            srcc: metrics.srcc,
            outlier_ratio: metrics.outlier_ratio,
            histogram,
            config: config.clone(),
            regression_warning: fit.warning,
            score_provenance: Vec::new(),
        },
        scatter,
    })
}

pub fn evaluate_database(scores_path: &Path, mos_path: &Path, config: &EvalConfig) -> Result<Evaluation> {
    let (scores, provenance) = read_scores(scores_path)?;
    let subjective = read_subjective(mos_path)?;
    let mut eval = evaluate_records(&scores, &subjective, config)?;
    eval.report.score_provenance = provenance;
    Ok(eval)
}

/// Loads a delimited table, returning `#` comment lines separately. Tab is
/// used when the header line contains one, comma otherwise.
fn read_table(path: &Path) -> Result<(Vec<String>, csv::StringRecord, Vec<csv::StringRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let comments: Vec<String> = text
        .lines()
        .filter_map(|l| l.strip_prefix('#'))
        .map(|l| l.trim().to_string())
        .collect();
    let header_line = text
        .lines()
        .find(|l| !l.starts_with('#') && !l.trim().is_empty())
        .unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((comments, headers, rows))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        Error::InvalidParameter(format!("{}: missing column {name:?}", path.display()))
    })
}

fn parse_number(field: &str, what: &str, id: &str, path: &Path) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| {
        Error::InvalidParameter(format!(
            "{}: {what} {field:?} for {id} is not a number",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite("score file"));
    }
    Ok(v)
}

/// Objective scores plus the file's comment lines. A non-empty `error`
/// column (as written by the scorer for failed pairs) is rejected.
pub fn read_scores(path: &Path) -> Result<(Vec<ScoreRecord>, Vec<String>)> {
    let (comments, headers, rows) = read_table(path)?;
    let id = column(&headers, "image_id", path)?;
    let reference = column(&headers, "reference_id", path)?;
    let score = column(&headers, "score", path)?;
    let error = headers.iter().position(|h| h == "error");
    let records = rows
        .iter()
        .map(|row| {
            let image_id = row.get(id).unwrap_or("").to_string();
            if let Some(msg) = error.and_then(|c| row.get(c)).filter(|m| !m.is_empty()) {
                return Err(Error::InvalidParameter(format!(
                    "{}: {image_id} has no score ({msg})",
                    path.display()
                )));
            }
            Ok(ScoreRecord {
                score: parse_number(row.get(score).unwrap_or(""), "score", &image_id, path)?,
                reference_id: row.get(reference).unwrap_or("").to_string(),
                image_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, comments))
}

pub fn read_subjective(path: &Path) -> Result<Vec<SubjectiveRecord>> {
    let (_, headers, rows) = read_table(path)?;
    let id = column(&headers, "image_id", path)?;
    let mos = column(&headers, "mos", path)?;
    let std = headers.iter().position(|h| h == "mos_std");
    rows.iter()
        .map(|row| {
            let image_id = row.get(id).unwrap_or("").to_string();
            let mos = parse_number(row.get(mos).unwrap_or(""), "mos", &image_id, path)?;
            let mos_std = match std {
                Some(c) => {
                    let s = parse_number(row.get(c).unwrap_or(""), "mos_std", &image_id, path)?;
                    if s <= 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "{}: mos_std for {image_id} must be positive",
                            path.display()
                        )));
                    }
                    Some(s)
                }
                None => None,
            };
            Ok(SubjectiveRecord {
                image_id,
                mos,
                mos_std,
            })
        })
        .collect()
}

/// Tab-separated `image_id, objective, regressed, mos` with a header row.
pub fn write_scatter_tsv<W: Write>(out: W, points: &[ScatterPoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    w.write_record(["image_id", "objective", "regressed", "mos"])?;
    for p in points {
        w.write_record(&[
            p.image_id.clone(),
            p.objective.to_string(),
            p.regressed.to_string(),
            p.mos.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("scatter", e))?;
    Ok(())
}
