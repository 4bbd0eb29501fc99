use std::io::Write;

use log::{info, warn};

use super::lbfgs::{lbfgs_minimize, LbfgsOptions, Problem, Termination};
use super::model::{DecoderHyperparams, DecoderModel};
use super::objective::{Evaluation, SaturationPolicy, SparseObjective};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preprocess::{NormalizationStats, PatchBatch};

/// Objective decomposition at one accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub reconstruction: f64,
    pub sparsity: f64,
    pub decay: f64,
    pub mean_rho_hat: f64,
    pub min_rho_hat: f64,
    pub max_rho_hat: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    pub evaluations: usize,
    /// Evaluations in which at least one mean activation had to be clamped.
    pub saturation_clamps: usize,
    pub warnings: Vec<String>,
}

impl TrainingTrace {
    pub fn initial(&self) -> &TraceRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace has the initial record")
    }

    /// CSV with columns `iteration,J,recon,sparsity,decay,mean_rho_hat`.
    /// `comment` lines, if any, are written first prefixed with `# `.
    pub fn write_csv<W: Write>(&self, out: W, comment: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(text) = comment {
            for line in text.lines() {
                writeln!(out, "# {line}").map_err(|e| Error::io("trace", e))?;
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "J", "recon", "sparsity", "decay", "mean_rho_hat"])?;
        for r in &self.records {
            w.write_record(&[
                r.iteration.to_string(),
                r.objective.to_string(),
                r.reconstruction.to_string(),
                r.sparsity.to_string(),
                r.decay.to_string(),
                r.mean_rho_hat.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}

struct TrainProblem<'a> {
    objective: SparseObjective<'a>,
    last: Option<(Vec<f64>, Evaluation)>,
    error: Option<Error>,
    records: Vec<TraceRecord>,
    saturation_clamps: usize,
}

impl TrainProblem<'_> {
    fn record(&mut self, iteration: usize, e: &Evaluation) {
        let rho = &e.mean_activation;
        self.records.push(TraceRecord {
            iteration,
            objective: e.value,
            reconstruction: e.reconstruction,
            sparsity: e.sparsity,
            decay: e.decay,
            mean_rho_hat: rho.mean(),
            min_rho_hat: rho.min(),
            max_rho_hat: rho.max(),
        });
    }
}

impl Problem for TrainProblem<'_> {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self.objective.evaluate(x) {
            Ok(e) => {
                grad.copy_from_slice(&e.gradient);
                if e.clamped_units > 0 {
                    self.saturation_clamps += 1;
                }
                let value = e.value;
                self.last = Some((x.to_vec(), e));
                value
            }
            Err(err) => {
                self.error = Some(err);
                f64::NAN
            }
        }
    }

    fn accepted(&mut self, iteration: usize, x: &[f64], _value: f64) {
        let last = self.last.take();
        match last {
            Some((lx, e)) if lx == x => {
                self.record(iteration, &e);
                self.last = Some((lx, e));
            }
            _ => {
                if let Ok(e) = self.objective.evaluate(x) {
                    self.record(iteration, &e);
                }
            }
        }
    }
}

pub fn train(
    batch: &PatchBatch,
    hyperparams: &DecoderHyperparams,
    stats: &NormalizationStats,
    seed: u64,
) -> Result<(DecoderModel, TrainingTrace)> {
    train_with(Execution::default(), batch, hyperparams, stats, seed)
}

/// Minimizes the sparse decoder objective jointly over both layers'
/// weights and biases, starting from a seeded initialization.
///
/// `batch` must already be whitened with `stats`; the stats are attached to
/// the returned model. A line search that fails even along steepest descent
/// ends training early with the best iterate and a warning in the trace.
pub fn train_with(
    exec: Execution,
    batch: &PatchBatch,
    hyperparams: &DecoderHyperparams,
    stats: &NormalizationStats,
    seed: u64,
) -> Result<(DecoderModel, TrainingTrace)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if stats.dim() != batch.matrix().nrows() {
        return Err(Error::DimensionMismatch {
            what: "normalization stats",
            expected: batch.matrix().nrows(),
            found: stats.dim(),
        });
    }
    let mut model = DecoderModel::initialize(hyperparams.clone(), stats.clone(), seed)?;
    let objective = SparseObjective::new(batch.matrix(), hyperparams)?
        .with_execution(exec)
        .with_saturation(SaturationPolicy::Clamp);
    let mut problem = TrainProblem {
        objective,
        last: None,
        error: None,
        records: Vec::new(),
        saturation_clamps: 0,
    };
    let options = LbfgsOptions {
        memory: hyperparams.lbfgs_memory,
        max_iterations: hyperparams.max_iterations,
        ..LbfgsOptions::default()
    };
    let outcome = lbfgs_minimize(&mut problem, &model.params(), &options);

    if outcome.termination == Termination::NonFinite {
        return Err(problem.error.take().unwrap_or(Error::ObjectiveNan));
    }
    let mut warnings = Vec::new();
    if outcome.termination == Termination::LineSearchFailed {
        let msg = format!(
            "line search failed after {} iterations; keeping best iterate",
            outcome.iterations
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    if problem.saturation_clamps > 0 {
        let msg = format!(
            "mean activation clamped away from 0/1 in {} evaluations",
            problem.saturation_clamps
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    model.set_params(&outcome.x)?;
    model.provenance.seed = seed;
    model.provenance.patch_count = batch.len() as u64;
    info!(
        "training stopped after {} iterations ({:?}), J = {:.6}",
        outcome.iterations, outcome.termination, outcome.value
    );
    let trace = TrainingTrace {
        records: problem.records,
        termination: outcome.termination,
        evaluations: outcome.evaluations,
        saturation_clamps: problem.saturation_clamps,
        warnings,
    };
    Ok((model, trace))
}
