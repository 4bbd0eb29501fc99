use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sparse-iqa", version, about = "Full-reference image quality from sparse codes")]
pub struct Cli {
    /// TOML file with run settings. Flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, short = 'j', global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn whitening statistics and a sparse decoder from natural images.
    Train(TrainArgs),
    /// Score distorted images against their references.
    Score(ScoreArgs),
    /// Regress scores onto subjective ratings and report agreement metrics.
    Evaluate(EvaluateArgs),
    /// Render the decoder's input filters as a grayscale PNG grid.
    ExportFilters(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SuppressionArgs {
    /// Zero hidden activations below tau times the mean activation of the
    /// image [default: 0.5].
    #[arg(long, value_name = "TAU", conflicts_with = "abs_threshold")]
    pub tau: Option<f64>,

    /// Zero hidden activations below a fixed value instead of a mean-relative
    /// one.
    #[arg(long, value_name = "T")]
    pub abs_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory searched recursively for PNG, JPEG and BMP images.
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,

    /// Output model file.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,

    /// Per-iteration objective trace (CSV).
    #[arg(long, value_name = "CSV")]
    pub trace: Option<PathBuf>,

    /// Also write the learned filters as a PNG grid.
    #[arg(long, value_name = "PNG")]
    pub filters: Option<PathBuf>,

    /// Random 8x8 patches drawn from each image [default: 100].
    #[arg(long)]
    pub patches_per_image: Option<usize>,

    /// Images used at most; a seeded subset is drawn from larger corpora
    /// [default: 1000].
    #[arg(long)]
    pub max_images: Option<usize>,

    /// Hidden units [default: 400].
    #[arg(long)]
    pub hidden: Option<usize>,

    /// Target mean activation of each hidden unit [default: 0.035].
    #[arg(long)]
    pub rho: Option<f64>,

    /// Weight of the sparsity penalty [default: 5].
    #[arg(long)]
    pub beta: Option<f64>,

    /// Weight decay lambda: penalty lambda * (|W1|^2 + |W2|^2) on both weight
    /// matrices [default: 0.003].
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Whitening regularizer epsilon added to every covariance eigenvalue
    /// [default: 0.1]. Zero requires a full-rank patch covariance.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// L-BFGS iteration cap [default: 400].
    #[arg(long)]
    pub max_iter: Option<usize>,

    /// L-BFGS history length [default: 10].
    #[arg(long)]
    pub lbfgs_memory: Option<usize>,

    /// Seed for image subset, patch positions and weight initialization
    /// [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,

    /// Suppression policy stored in the model for scoring.
    #[command(flatten)]
    pub suppression: SuppressionArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    /// Reference image.
    #[arg(long = "ref", value_name = "IMAGE", requires = "dist", conflicts_with = "batch")]
    pub reference: Option<PathBuf>,

    /// Distorted image.
    #[arg(long, value_name = "IMAGE", requires = "reference")]
    pub dist: Option<PathBuf>,

    /// Table with columns image_id, reference_id, reference, distorted.
    /// Relative paths resolve against the table's directory.
    #[arg(long, value_name = "LIST", required_unless_present = "reference")]
    pub batch: Option<PathBuf>,

    /// Output TSV (default: stdout).
    #[arg(long, short, value_name = "TSV")]
    pub out: Option<PathBuf>,

    /// Overrides the model's stored suppression policy.
    #[command(flatten)]
    pub suppression: SuppressionArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Objective scores: image_id, reference_id, score.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,

    /// Subjective scores: image_id, mos, optional mos_std.
    #[arg(long, value_name = "FILE")]
    pub mos: PathBuf,

    /// Bins for the histogram distances between subjective and regressed
    /// scores, spanning their joint range [default: 10].
    #[arg(long)]
    pub bins: Option<usize>,

    /// JSON report.
    #[arg(long, value_name = "JSON")]
    pub report: PathBuf,

    /// Per-image scatter data (TSV).
    #[arg(long, value_name = "TSV")]
    pub scatter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    #[arg(long, value_name = "PNG")]
    pub out: PathBuf,
}

impl SuppressionArgs {
    pub fn policy(&self) -> Option<sparse_iqa::SuppressionPolicy> {
        use sparse_iqa::SuppressionPolicy as P;
        match (self.tau, self.abs_threshold) {
            (_, Some(threshold)) => Some(P::Absolute { threshold }),
            (Some(tau), None) => Some(P::MeanRelative { tau }),
            (None, None) => None,
        }
    }
}
