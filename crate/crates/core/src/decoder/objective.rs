use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};

use super::model::{param_len, DecoderHyperparams, DecoderModel};
use crate::error::{Error, Result};
use crate::exec::{Execution, CHUNK_COLUMNS};

/// Bounds for mean activations under [`SaturationPolicy::Clamp`].
const RHO_HAT_FLOOR: f64 = 1e-8;

/// Largest double below one; sigmoid outputs are kept strictly inside (0, 1).
const ACTIVATION_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
fn sigmoid(z: f64) -> f64 {
    (1.0 / (1.0 + (-z).exp())).clamp(f64::MIN_POSITIVE, ACTIVATION_CEIL)
}

/// What to do when a hidden unit's mean activation reaches exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaturationPolicy {
    /// Fail with [`Error::SaturatedUnit`].
    #[default]
    Strict,
    /// Clamp into `[1e-8, 1 - 1e-8]` and count the event.
    Clamp,
}

/// `sum_j rho ln(rho / rho_hat_j) + (1 - rho) ln((1 - rho) / (1 - rho_hat_j))`.
pub fn kl_sparsity(rho: f64, rho_hat: &[f64]) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
    }
    let mut total = 0.0;
    for (unit, &r) in rho_hat.iter().enumerate() {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::SaturatedUnit { unit, rho_hat: r });
        }
        total += kl_term(rho, r);
    }
    Ok(total)
}

#[inline]
fn kl_term(rho: f64, r: f64) -> f64 {
    rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln()
}

/// Row means of an `n_hidden x M` activation matrix.
pub fn mean_activation(activations: &DMatrix<f64>) -> Result<DVector<f64>> {
    if activations.ncols() == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(activations.column_mean())
}

pub fn encode(model: &DecoderModel, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    encode_with(Execution::default(), model, batch)
}

/// `sigmoid(w1 * p + b1)` for every column `p`.
pub fn encode_with(exec: Execution, model: &DecoderModel, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if batch.nrows() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "encoder input",
            expected: model.input_dim(),
            found: batch.nrows(),
        });
    }
    if model.w1.iter().chain(model.b1.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("encoder weights"));
    }
    let n = model.n_hidden();
    let m = batch.ncols();
    let parts = exec.map_chunks(m, CHUNK_COLUMNS, |r| {
        hidden(model.w1.as_view(), model.b1.as_view(), &batch.columns(r.start, r.len()).into_owned())
    });
    let mut data = Vec::with_capacity(n * m);
    for p in &parts {
        data.extend_from_slice(p.as_slice());
    }
    Ok(DMatrix::from_vec(n, m, data))
}

fn hidden(w1: DMatrixView<f64>, b1: DVectorView<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = w1 * x;
    for mut col in z.column_iter_mut() {
        col += b1;
    }
    z.apply(|v| *v = sigmoid(*v));
    z
}

/// One evaluation of the training objective at a parameter vector.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub reconstruction: f64,
    pub sparsity: f64,
    pub decay: f64,
    pub gradient: Vec<f64>,
    pub mean_activation: DVector<f64>,
    /// Units whose mean activation was clamped under [`SaturationPolicy::Clamp`].
    pub clamped_units: usize,
}

/// The sparse decoder objective over a fixed batch:
/// `(1/2M) sum ||w2 s + b2 - p||^2 + beta sum_j KL(rho || rho_hat_j) + lambda (||w1||^2 + ||w2||^2)`.
pub struct SparseObjective<'a> {
    data: &'a DMatrix<f64>,
    n_hidden: usize,
    rho: f64,
    beta: f64,
    lambda: f64,
    exec: Execution,
    saturation: SaturationPolicy,
}

impl<'a> SparseObjective<'a> {
    pub fn new(data: &'a DMatrix<f64>, hyperparams: &DecoderHyperparams) -> Result<Self> {
        hyperparams.validate()?;
        if data.ncols() == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(Self {
            data,
            n_hidden: hyperparams.n_hidden,
            rho: hyperparams.rho,
            beta: hyperparams.beta,
            lambda: hyperparams.lambda,
            exec: Execution::default(),
            saturation: SaturationPolicy::Strict,
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_saturation(mut self, policy: SaturationPolicy) -> Self {
        self.saturation = policy;
        self
    }

    pub fn param_len(&self) -> usize {
        param_len(self.n_hidden, self.data.nrows())
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let (n, d, m) = (self.n_hidden, self.data.nrows(), self.data.ncols());
        if theta.len() != self.param_len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.param_len(),
                found: theta.len(),
            });
        }
        let (w1, rest) = theta.split_at(n * d);
        let (b1, rest) = rest.split_at(n);
        let (w2, b2) = rest.split_at(d * n);
        let w1 = DMatrixView::from_slice(w1, n, d);
        let b1 = DVectorView::from_slice(b1, n);
        let w2 = DMatrixView::from_slice(w2, d, n);
        let b2 = DVectorView::from_slice(b2, d);
        let x = self.data;
        let inv_m = 1.0 / m as f64;

        // forward pass: activations per chunk, then mean activation
        let ranges = crate::exec::chunk_ranges(m, CHUNK_COLUMNS);
        let acts = self.exec.map(&ranges, |r| {
            hidden(w1, b1, &x.columns(r.start, r.len()).into_owned())
        });
        let mut rho_hat = acts
            .iter()
            .fold(DVector::zeros(n), |acc, a| acc + a.column_sum())
            * inv_m;

        let mut clamped_units = 0;
        for (unit, r) in rho_hat.iter_mut().enumerate() {
            if *r <= 0.0 || *r >= 1.0 || r.is_nan() {
                match self.saturation {
                    SaturationPolicy::Strict => {
                        return Err(Error::SaturatedUnit { unit, rho_hat: *r })
                    }
                    SaturationPolicy::Clamp => {}
                }
            }
            if self.saturation == SaturationPolicy::Clamp {
                let c = r.clamp(RHO_HAT_FLOOR, 1.0 - RHO_HAT_FLOOR);
                if c != *r {
                    clamped_units += 1;
                    *r = c;
                }
            }
        }

        let (rho, beta) = (self.rho, self.beta);
        let sparsity = beta * rho_hat.iter().map(|&r| kl_term(rho, r)).sum::<f64>();
        // d(sparsity)/d(activation_jk), identical for every column k
        let sparse_grad = rho_hat.map(|r| beta * (-rho / r + (1.0 - rho) / (1.0 - r)) * inv_m);

        let work: Vec<_> = ranges.iter().cloned().zip(acts.iter()).collect();
        let partials = self.exec.map(&work, |(r, a)| {
            let xc = x.columns(r.start, r.len());
            let mut resid = w2 * *a;
            for (mut col, xcol) in resid.column_iter_mut().zip(xc.column_iter()) {
                col += b2;
                col -= xcol;
            }
            let sse = resid.norm_squared();
            let delta3 = resid * inv_m;
            let gw2 = &delta3 * a.transpose();
            let gb2 = delta3.column_sum();
            let mut delta2 = w2.transpose() * &delta3;
            for (mut col, acol) in delta2.column_iter_mut().zip(a.column_iter()) {
                for ((g, s), &av) in col.iter_mut().zip(sparse_grad.iter()).zip(acol.iter()) {
                    *g = (*g + s) * av * (1.0 - av);
                }
            }
            let gw1 = &delta2 * xc.transpose();
            let gb1 = delta2.column_sum();
            Partial { sse, gw1, gb1, gw2, gb2 }
        });

        let mut total = Partial::zeros(n, d);
        for p in partials {
            total.sse += p.sse;
            total.gw1 += p.gw1;
            total.gb1 += p.gb1;
            total.gw2 += p.gw2;
            total.gb2 += p.gb2;
        }

        let lambda = self.lambda;
        let reconstruction = 0.5 * total.sse * inv_m;
        let decay = lambda * (w1.norm_squared() + w2.norm_squared());
        total.gw1 += w1 * (2.0 * lambda);
        total.gw2 += w2 * (2.0 * lambda);

        let value = reconstruction + sparsity + decay;
        if value.is_nan() {
            return Err(Error::ObjectiveNan);
        }
        let mut gradient = Vec::with_capacity(theta.len());
        gradient.extend_from_slice(total.gw1.as_slice());
        gradient.extend_from_slice(total.gb1.as_slice());
        gradient.extend_from_slice(total.gw2.as_slice());
        gradient.extend_from_slice(total.gb2.as_slice());

        Ok(Evaluation {
            value,
            reconstruction,
            sparsity,
            decay,
            gradient,
            mean_activation: rho_hat,
            clamped_units,
        })
    }
}

struct Partial {
    sse: f64,
    gw1: DMatrix<f64>,
    gb1: DVector<f64>,
    gw2: DMatrix<f64>,
    gb2: DVector<f64>,
}

impl Partial {
    fn zeros(n: usize, d: usize) -> Self {
        Self {
            sse: 0.0,
            gw1: DMatrix::zeros(n, d),
            gb1: DVector::zeros(n),
            gw2: DMatrix::zeros(d, n),
            gb2: DVector::zeros(d),
        }
    }
}

/// Objective value and gradient (flat, same layout as [`DecoderModel::params`])
/// of `model` on a whitened batch.
pub fn objective(model: &DecoderModel, batch: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    if batch.nrows() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "objective input",
            expected: model.input_dim(),
            found: batch.nrows(),
        });
    }
    let eval = SparseObjective::new(batch, &model.hyperparams)?.evaluate(&model.params())?;
    Ok((eval.value, eval.gradient))
}
