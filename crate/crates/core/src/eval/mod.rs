//! Benchmark harness: regression of objective scores onto subjective scores,
//! correlation, error and outlier metrics, histogram distances, and pairwise
//! significance of correlation coefficients.

mod database;
mod histogram;
mod logistic;
mod metrics;
mod significance;

pub use database::{
    evaluate_database, evaluate_records, read_scores, read_subjective,
    write_scatter_tsv, EvalConfig, EvalReport, Evaluation, ScatterPoint, ScoreRecord,
    SubjectiveRecord,
};
pub use histogram::{
    distances, histogram_distances, joint_histograms, HistogramDistances, DEFAULT_BINS,
    KL_SMOOTHING,
};
pub use logistic::{fit_logistic, fit_logistic_with, LogisticFit, LogisticOptions, LogisticParams};
pub use metrics::{compute_metrics, Metrics};
pub use significance::{significance, Z_CRITICAL_95};
