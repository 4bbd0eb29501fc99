//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The search direction comes from the standard two-loop recursion over the
//! last `memory` curvature pairs. The line search brackets a step satisfying
//! the strong Wolfe conditions and then zooms with safeguarded cubic
//! interpolation. An accepted step is always the most recent point handed to
//! the objective, so callers can attach side information from that evaluation.

use std::collections::VecDeque;

/// Objective callback: returns `f(x)` and writes the gradient into `grad`.
pub trait Problem {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Called once per accepted iterate, including iteration 0 for `x0`.
    fn accepted(&mut self, _iteration: usize, _x: &[f64], _value: f64) {}
}

impl<F> Problem for F
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the Euclidean gradient norm falls to this value.
    pub gradient_tolerance: f64,
    /// Stop when `|f_prev - f| < tol * max(|f_prev|, |f|, 1)`; zero disables.
    pub objective_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search_evaluations: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 400,
            gradient_tolerance: 1e-5,
            objective_tolerance: 1e-10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evaluations: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    ObjectiveTolerance,
    MaxIterations,
    /// The line search failed twice in a row (the second time along steepest
    /// descent); the last accepted iterate is returned.
    LineSearchFailed,
    /// The objective returned a non-finite value.
    NonFinite,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::GradientTolerance | Termination::ObjectiveTolerance
        )
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective value at each accepted iterate, starting with `x0`.
    pub values: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Counted<'a, P: Problem> {
    problem: &'a mut P,
    evaluations: usize,
}

impl<P: Problem> Counted<'_, P> {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluations += 1;
        self.problem.evaluate(x, grad)
    }
}

pub fn lbfgs_minimize<P: Problem>(problem: &mut P, x0: &[f64], options: &LbfgsOptions) -> LbfgsOutcome {
    let n = x0.len();
    let mut p = Counted {
        problem,
        evaluations: 0,
    };
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = p.eval(&x, &mut g);
    let mut values = vec![f];
    let finish = |x: Vec<f64>, f: f64, g: &[f64], it, ev, t, values| LbfgsOutcome {
        x,
        value: f,
        gradient_norm: norm(g),
        iterations: it,
        evaluations: ev,
        termination: t,
        values,
    };
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, f, &g, 0, p.evaluations, Termination::NonFinite, values);
    }
    p.problem.accepted(0, &x, f);
    if norm(&g) <= options.gradient_tolerance {
        return finish(x, f, &g, 0, p.evaluations, Termination::GradientTolerance, values);
    }

    let memory = options.memory.max(1);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut retried = false;
    let mut iteration = 0;

    while iteration < options.max_iterations {
        let d = direction(&g, &history);
        let dg = dot(&d, &g);
        let (d, dg) = if dg < 0.0 {
            (d, dg)
        } else {
            history.clear();
            let d: Vec<f64> = g.iter().map(|v| -v).collect();
            let dg = -dot(&g, &g);
            (d, dg)
        };
        let initial_step = if history.is_empty() {
            (1.0 / norm(&g)).min(1.0)
        } else {
            1.0
        };

        let search = line_search(&mut p, &x, f, dg, &d, initial_step, options, &mut x_new, &mut g_new);
        let f_new = match search {
            LineSearch::Accepted(f_new) => f_new,
            LineSearch::NonFinite => {
                return finish(x, f, &g, iteration, p.evaluations, Termination::NonFinite, values)
            }
            LineSearch::Failed => {
                if retried || history.is_empty() {
                    return finish(x, f, &g, iteration, p.evaluations, Termination::LineSearchFailed, values);
                }
                retried = true;
                history.clear();
                continue;
            }
        };
        retried = false;
        iteration += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if history.len() == memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let f_prev = f;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        values.push(f);
        p.problem.accepted(iteration, &x, f);

        if norm(&g) <= options.gradient_tolerance {
            return finish(x, f, &g, iteration, p.evaluations, Termination::GradientTolerance, values);
        }
        let scale = f_prev.abs().max(f.abs()).max(1.0);
        if (f_prev - f).abs() < options.objective_tolerance * scale {
            return finish(x, f, &g, iteration, p.evaluations, Termination::ObjectiveTolerance, values);
        }
    }
    finish(x, f, &g, iteration, p.evaluations, Termination::MaxIterations, values)
}

/// Two-loop recursion: `-H g` with `H0 = (s'y / y'y) I` from the newest pair.
fn direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Relative objective change treated as rounding noise by the line search.
const APPROX_WOLFE_NOISE: f64 = 1e-12;

enum LineSearch {
    Accepted(f64),
    Failed,
    NonFinite,
}

struct Point {
    step: f64,
    value: f64,
    slope: f64,
}

#[allow(clippy::too_many_arguments)]
fn line_search<P: Problem>(
    p: &mut Counted<'_, P>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    initial_step: f64,
    opt: &LbfgsOptions,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> LineSearch {
    let budget = opt.max_line_search_evaluations.max(2);
    let mut used = 0;
    let mut probe = |step: f64, x_new: &mut [f64], g_new: &mut [f64]| -> Option<Point> {
        for ((xn, xi), di) in x_new.iter_mut().zip(x).zip(d) {
            *xn = xi + step * di;
        }
        let value = p.eval(x_new, g_new);
        if !value.is_finite() || g_new.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Point {
            step,
            value,
            slope: dot(g_new, d),
        })
    };
    let armijo = |pt: &Point| pt.value <= f0 + opt.c1 * pt.step * slope0;
    let curvature = |pt: &Point| pt.slope.abs() <= -opt.c2 * slope0;
    // Approximate Wolfe (Hager-Zhang): once value differences sink into
    // rounding noise, judge decrease by the directional derivative instead.
    let noise = APPROX_WOLFE_NOISE * f0.abs();
    let in_noise = |pt: &Point| (pt.value - f0).abs() <= noise;
    let approx_wolfe =
        |pt: &Point| pt.value <= f0 + noise && pt.slope <= (2.0 * opt.c1 - 1.0) * slope0 && curvature(pt);

    let mut prev = Point {
        step: 0.0,
        value: f0,
        slope: slope0,
    };
    let mut step = initial_step;
    let (mut lo, mut hi);
    loop {
        if used >= budget {
            return LineSearch::Failed;
        }
        used += 1;
        let Some(cur) = probe(step, x_new, g_new) else {
            // shrink once on overflow before giving up
            if prev.step == 0.0 && step > 1e-12 && used < budget {
                step *= 0.1;
                continue;
            }
            return LineSearch::NonFinite;
        };
        if approx_wolfe(&cur) {
            return LineSearch::Accepted(cur.value);
        }
        if !armijo(&cur) || (prev.step > 0.0 && cur.value >= prev.value) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return LineSearch::Accepted(cur.value);
        }
        if cur.slope >= 0.0 {
            hi = prev;
            lo = cur;
            break;
        }
        step = cur.step * 2.0;
        prev = cur;
    }

    // zoom: `lo` satisfies sufficient decrease and has the lowest value seen
    loop {
        if used >= budget || (hi.step - lo.step).abs() <= 1e-16 * lo.step.abs().max(1.0) {
            return LineSearch::Failed;
        }
        used += 1;
        let flat = in_noise(&lo) && in_noise(&hi);
        let step = if flat { secant(&lo, &hi) } else { interpolate(&lo, &hi) };
        let Some(cur) = probe(step, x_new, g_new) else {
            return LineSearch::NonFinite;
        };
        if approx_wolfe(&cur) {
            return LineSearch::Accepted(cur.value);
        }
        let worse = if flat && in_noise(&cur) {
            cur.slope * (hi.step - lo.step) < 0.0
        } else {
            !armijo(&cur) || cur.value >= lo.value
        };
        if worse {
            hi = cur;
        } else {
            if curvature(&cur) {
                return LineSearch::Accepted(cur.value);
            }
            if cur.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
}

/// Zero of the linear interpolant of the slopes, kept inside the middle 80%.
fn secant(a: &Point, b: &Point) -> f64 {
    let (left, right) = if a.step < b.step { (a, b) } else { (b, a) };
    let width = right.step - left.step;
    let t = left.step - left.slope * width / (right.slope - left.slope);
    if t.is_finite() {
        t.clamp(left.step + 0.1 * width, right.step - 0.1 * width)
    } else {
        left.step + 0.5 * width
    }
}

/// Cubic interpolation minimizer between two bracket ends, kept at least 10%
/// of the interval away from either end.
fn interpolate(a: &Point, b: &Point) -> f64 {
    let (left, right) = if a.step < b.step { (a, b) } else { (b, a) };
    let width = right.step - left.step;
    let d1 = left.slope + right.slope - 3.0 * (left.value - right.value) / (left.step - right.step);
    let disc = d1 * d1 - left.slope * right.slope;
    let mut t = f64::NAN;
    if disc >= 0.0 {
        let d2 = disc.sqrt();
        t = right.step
            - width * (right.slope + d2 - d1) / (right.slope - left.slope + 2.0 * d2);
    }
    let lo = left.step + 0.1 * width;
    let hi = right.step - 0.1 * width;
    if t.is_finite() {
        t.clamp(lo, hi)
    } else {
        left.step + 0.5 * width
    }
}
