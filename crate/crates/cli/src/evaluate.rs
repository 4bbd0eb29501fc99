use sparse_iqa::eval::{evaluate_database, write_scatter_tsv, EvalConfig};
use sparse_iqa::model_io::write_atomic;

use crate::cli::EvaluateArgs;
use crate::config::RunConfig;
use crate::{CliError, Outcome};

pub fn run(args: EvaluateArgs, config: RunConfig) -> Outcome {
    let bins = args.bins.unwrap_or(config.bins);
    if bins == 0 {
        return Err(CliError::usage("bins must be positive"));
    }
    let eval_config = EvalConfig { bins, ..EvalConfig::default() };
    let evaluation = evaluate_database(&args.scores, &args.mos, &eval_config)?;
    let report = &evaluation.report;
    let json = serde_json::to_vec_pretty(report).map_err(|e| CliError::internal(e.to_string()))?;
    write_atomic(&args.report, &json)?;
    if let Some(path) = &args.scatter {
        let mut buf = Vec::new();
        write_scatter_tsv(&mut buf, &evaluation.scatter)?;
        write_atomic(path, &buf)?;
    }
    if let Some(w) = &report.regression_warning {
        eprintln!("warning: {w}");
    }
    println!(
        "n={} rmse={:.6} plcc={:.6} srcc={:.6}{}",
        report.n_images,
        report.rmse,
        report.plcc,
        report.srcc,
        report.outlier_ratio.map(|o| format!(" outlier_ratio={o:.6}")).unwrap_or_default()
    );
    Ok(false)
}
