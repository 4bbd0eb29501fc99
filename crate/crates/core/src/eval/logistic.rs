use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of `q(x) = b1 (1/2 - 1/(1 + exp(b2 (x - b3)))) + b4 x + b5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogisticParams(pub [f64; 5]);

impl Default for LogisticParams {
    /// The fixed starting point used for every estimator.
    fn default() -> Self {
        LogisticParams([0.0, 0.1, 0.0, 0.0, 0.0])
    }
}

impl LogisticParams {
    pub fn predict(&self, x: f64) -> f64 {
        let [b1, b2, b3, b4, b5] = self.0;
        b1 * (0.5 - 1.0 / (1.0 + (b2 * (x - b3)).exp())) + b4 * x + b5
    }

    fn value_and_jacobian(&self, x: f64) -> (f64, Vector5<f64>) {
        let [b1, b2, b3, b4, b5] = self.0;
        let u = x - b3;
        let l = 1.0 / (1.0 + (b2 * u).exp());
        let dl = l * (1.0 - l);
        let value = b1 * (0.5 - l) + b4 * x + b5;
        (value, Vector5::new(0.5 - l, b1 * dl * u, -b1 * dl * b2, x, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the squared error by less than this
    /// fraction.
    pub function_tolerance: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            function_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub params: LogisticParams,
    pub sse: f64,
    pub iterations: usize,
    /// Set when damping ran out before convergence.
    pub warning: Option<String>,
}

fn sse(params: &LogisticParams, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (params.predict(xi) - yi).powi(2)).sum()
}

pub fn fit_logistic(x: &[f64], y: &[f64], init: LogisticParams) -> Result<LogisticFit> {
    fit_logistic_with(x, y, init, &LogisticOptions::default())
}

/// Levenberg-Marquardt with an analytic Jacobian and diagonal (Marquardt)
/// scaling. Only steps that lower the squared error are accepted.
pub fn fit_logistic_with(
    x: &[f64],
    y: &[f64],
    init: LogisticParams,
    options: &LogisticOptions,
) -> Result<LogisticFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "regression inputs",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "logistic regression needs at least 5 samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).chain(&init.0).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input"));
    }

    let mut params = init;
    let mut cost = sse(&params, x, y);
    if !cost.is_finite() {
        return Err(Error::NonFinite("regression residuals"));
    }
    let mut mu: Option<f64> = None;
    let mut nu = 2.0;
    let mut warning = None;
    let mut iterations = 0;
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();

    'outer: while iterations < options.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            break;
        }
        let mut a = Matrix5::zeros();
        let mut g = Vector5::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let (q, j) = params.value_and_jacobian(xi);
            let r = q - yi;
            a += j * j.transpose();
            g += j * r;
        }
        if a.iter().chain(g.iter()).any(|v| v.is_nan()) {
            return Err(Error::ObjectiveNan);
        }
        let diag_max = a.diagonal().max();
        let damping = *mu.get_or_insert(1e-3 * diag_max.max(1e-12));
        let mut damping = damping;

        loop {
            let mut lhs = a;
            for i in 0..5 {
                lhs[(i, i)] += damping * a[(i, i)].max(1e-12 * diag_max.max(1.0));
            }
            let step = lhs.cholesky().map(|c| c.solve(&(-g)));
            if let Some(step) = step {
                let mut trial = params;
                for i in 0..5 {
                    trial.0[i] += step[i];
                }
                let trial_cost = sse(&trial, x, y);
                if trial_cost.is_nan() {
                    return Err(Error::ObjectiveNan);
                }
                if trial_cost < cost {
                    let predicted = -(step.dot(&g)) - 0.5 * step.dot(&(a * step));
                    let gain = if predicted > 0.0 {
                        (cost - trial_cost) / predicted
                    } else {
                        1.0
                    };
                    damping *= (1.0 - (2.0 * gain - 1.0).powi(3)).max(1.0 / 3.0);
                    nu = 2.0;
                    mu = Some(damping);
                    let improvement = cost - trial_cost;
                    params = trial;
                    cost = trial_cost;
                    if improvement <= options.function_tolerance * (cost + improvement) {
                        break 'outer;
                    }
                    let step_small = step
                        .iter()
                        .zip(&params.0)
                        .all(|(s, p)| s.abs() <= 1e-15 * (p.abs() + 1e-15));
                    if step_small {
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            damping *= nu;
            nu *= 2.0;
            if damping > 1e16 * diag_max.max(1.0) || !damping.is_finite() {
                // converged when the residual or J'r is at rounding level
                let exact = cost.sqrt() <= 1e-12 * y_norm;
                let stationary = g.norm() <= 1e-8 * a.trace().sqrt() * cost.sqrt();
                if !exact && !stationary {
                    warning = Some(format!(
                        "damping budget exhausted after {iterations} iterations"
                    ));
                }
                break 'outer;
            }
        }
    }

    Ok(LogisticFit {
        params,
        sse: cost,
        iterations,
        warning,
    })
}
