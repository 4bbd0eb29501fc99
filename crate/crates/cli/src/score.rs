use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sparse_iqa::model_io::{load_model, write_atomic};
use sparse_iqa::scorer::score_pair_with;
use sparse_iqa::{ChannelImage, DecoderModel, Execution, SuppressionPolicy};

use crate::cli::ScoreArgs;
use crate::config::RunConfig;
use crate::{CliError, Outcome};

#[derive(Debug, Clone, Deserialize)]
pub struct PairRow {
    pub image_id: String,
    pub reference_id: String,
    pub reference: PathBuf,
    pub distorted: PathBuf,
}

pub fn read_pair_list(path: &Path) -> Result<Vec<PairRow>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for row in reader.deserialize::<PairRow>() {
        let mut row = row.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        row.reference = base.join(&row.reference);
        row.distorted = base.join(&row.distorted);
        rows.push(row);
    }
    Ok(rows)
}

fn score_one(model: &DecoderModel, policy: &SuppressionPolicy, row: &PairRow) -> Result<(f64, f64), String> {
    let open = |p: &Path| ChannelImage::open(p).map_err(|e| format!("{}: {e}", p.display()));
    let reference = open(&row.reference)?;
    let distorted = open(&row.distorted)?;
    // Pairs already run in parallel; kernels inside a pair stay sequential.
    score_pair_with(Execution::Sequential, model, policy, &reference, &distorted)
        .map(|s| (s.spearman_raw, s.value))
        .map_err(|e| e.to_string())
}

fn clean(message: &str) -> String {
    message.replace(['\t', '\n', '\r'], " ")
}

pub fn run(args: ScoreArgs, _config: RunConfig) -> Outcome {
    let model = load_model(&args.model)?;
    let policy = args.suppression.policy().unwrap_or(model.suppression);
    policy.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let rows = match (&args.batch, &args.reference, &args.dist) {
        (Some(list), _, _) => read_pair_list(list)?,
        (None, Some(r), Some(d)) => vec![PairRow {
            image_id: d.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
            reference_id: r.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
            reference: r.clone(),
            distorted: d.clone(),
        }],
        _ => return Err(CliError::usage("give --ref and --dist, or --batch")),
    };

    let results = Execution::Parallel.map(&rows, |row| score_one(&model, &policy, row));

    let mut out = Vec::new();
    writeln!(out, "# model={} policy={}", args.model.display(), policy).unwrap();
    writeln!(out, "image_id\treference_id\tspearman_raw\tscore\terror").unwrap();
    let mut failed = 0;
    for (row, result) in rows.iter().zip(&results) {
        match result {
            Ok((raw, score)) => writeln!(
                out,
                "{}\t{}\t{raw:.17}\t{score:.17}\t",
                row.image_id, row.reference_id
            ),
            Err(e) => {
                failed += 1;
                log::warn!("{}: {e}", row.image_id);
                writeln!(out, "{}\t{}\tNaN\tNaN\t{}", row.image_id, row.reference_id, clean(e))
            }
        }
        .unwrap();
    }
    match &args.out {
        Some(path) => write_atomic(path, &out)?,
        None => std::io::stdout()
            .write_all(&out)
            .map_err(|e| CliError::internal(e.to_string()))?,
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {} pairs failed", rows.len());
    }
    Ok(failed > 0)
}
