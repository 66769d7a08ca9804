//! Product-integration discretisation and Picard iteration of the escape
//! probability integral equation, plus the history-conditioned probability.
//!
//! Each application of the operator has two stages. The jump stage maps
//! grid values `N` to `G(u) = E N(u + J)`, with `N` continued by exterior
//! values below zero and above `b`; the continuous part of the jump law is
//! integrated exactly against piecewise-linear `N`, atoms are interpolated.
//! For positive drift the arrival stage then integrates piecewise-linear
//! `G` along the drift path against the arrival law. Both stages use
//! nonnegative weights whose row sums are bounded by the contraction
//! constant, so the discrete iteration contracts at the continuous rate.

mod operator;

use std::sync::Arc;

pub use operator::FredholmOperator;

use crate::error::{EscapeError, Result};
use crate::model::ProcessModel;

/// `L = P(tau <= b/c) P(-b < J < b)`, or `P(-b < J < b)` for zero drift.
pub fn contraction_value(model: &ProcessModel, b: f64) -> f64 {
    let c = model.drift();
    let jumps = model.jumps().prob_open(-b, b);
    if c == 0.0 {
        jumps
    } else {
        model.arrivals().cdf(b / c.abs()) * jumps
    }
}

/// Contraction constant of the escape operator on `(0, b)`; errors when the
/// operator does not contract.
pub fn contraction_constant(model: &ProcessModel, b: f64) -> Result<f64> {
    let l = contraction_value(model, b);
    if !(l < 1.0 - 1e-12) {
        return Err(EscapeError::NotContractive(l));
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy)]
pub struct FredholmOptions {
    /// Number of grid cells `M`.
    pub grid: usize,
    /// Stop once the sup-norm step is at most `tol (1 - L)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FredholmOptions {
    fn default() -> Self {
        FredholmOptions { grid: 2000, tol: 1e-10, max_iter: 100_000 }
    }
}

/// Which barrier the solution targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Exit through `b` first.
    Upper,
    /// Exit through `0` first.
    Lower,
}

impl Target {
    /// `(value below 0, value at or above b)`.
    fn exterior(self) -> (f64, f64) {
        match self {
            Target::Upper => (0.0, 1.0),
            Target::Lower => (1.0, 0.0),
        }
    }
}

/// Converged grid solution of the escape equation on `(0, b)`.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub b: f64,
    pub nodes: Vec<f64>,
    /// Values clamped to `[0, 1]`.
    pub values: Vec<f64>,
    /// Largest distance of an unclamped value outside `[0, 1]`.
    pub excursion: f64,
    pub iterations: usize,
    /// `L d / (1 - L)` for the last step `d`: bound on the distance to the
    /// fixed point of the discrete operator.
    pub error_bound: f64,
    /// Contraction constant `L`.
    pub contraction: f64,
    /// Successive sup-norm steps `d_n`.
    pub steps: Vec<f64>,
    pub target: Target,
    raw: Vec<f64>,
    op: Arc<FredholmOperator>,
}

impl GridSolution {
    pub fn operator(&self) -> &FredholmOperator {
        &self.op
    }

    /// Unclamped fixed-point values at the nodes.
    pub fn raw_values(&self) -> &[f64] {
        &self.raw
    }

    /// `N(x)` off the grid by one more application of the operator at `x`
    /// (the Nystrom extension); at nodes it reproduces the grid values.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_conditional(x, 0.0)
    }

    /// Escape probability from `x` given that the current interarrival time
    /// has already lasted `z`.
    pub fn eval_conditional(&self, x: f64, z: f64) -> Result<f64> {
        if !x.is_finite() || !z.is_finite() || z < 0.0 {
            return Err(EscapeError::Range(format!("invalid level {x} or elapsed time {z}")));
        }
        let (lo, hi) = self.target.exterior();
        let v = self.op.evaluate(&self.raw, lo, hi, x.clamp(0.0, self.b), z)?;
        Ok(v.clamp(0.0, 1.0))
    }
}

fn solve_target(model: &ProcessModel, b: f64, opts: &FredholmOptions, target: Target) -> Result<GridSolution> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(EscapeError::Range(format!("width must be positive, got {b}")));
    }
    if model.drift() < 0.0 {
        return Err(EscapeError::RoutingMismatch("reflect negative drift first".into()));
    }
    if opts.grid < 2 || !(opts.tol > 0.0) {
        return Err(EscapeError::InvalidParameter("grid needs at least 2 cells and a positive tolerance".into()));
    }
    let l = contraction_constant(model, b)?;
    let op = Arc::new(FredholmOperator::new(model, b, opts.grid)?);
    let (lo, hi) = target.exterior();
    let mut n = op.initial_iterate(lo, hi);
    let mut steps = Vec::new();
    let mut iterations = 0;
    let stop = opts.tol * (1.0 - l);
    let last = loop {
        if iterations >= opts.max_iter {
            return Err(EscapeError::IterationCapExceeded(iterations));
        }
        let next = op.apply(&n, lo, hi);
        iterations += 1;
        let d = next.iter().zip(&n).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !d.is_finite() {
            return Err(EscapeError::NonFinite("Picard iterate".into()));
        }
        steps.push(d);
        n = next;
        if d <= stop {
            break d;
        }
    };
    let excursion = n.iter().map(|v| (v - 1.0).max(-v).max(0.0)).fold(0.0, f64::max);
    Ok(GridSolution {
        b,
        nodes: op.nodes(),
        values: n.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        excursion,
        iterations,
        error_bound: l * last / (1.0 - l),
        contraction: l,
        steps,
        target,
        raw: n,
        op,
    })
}

/// Escape probability through `b` on the grid `0 = x_0 < ... < x_M = b` for
/// a normalised model (`c >= 0`).
pub fn solve_fredholm(model: &ProcessModel, b: f64, opts: &FredholmOptions) -> Result<GridSolution> {
    solve_target(model, b, opts, Target::Upper)
}

/// Probability of leaving through `0` first; same kernel, complementary
/// forcing.
pub fn solve_fredholm_lower(model: &ProcessModel, b: f64, opts: &FredholmOptions) -> Result<GridSolution> {
    solve_target(model, b, opts, Target::Lower)
}

/// History-conditioned escape probability from a grid solution for the same
/// model and width.
pub fn conditional_ep(sol: &GridSolution, x: f64, z: f64) -> Result<f64> {
    sol.eval_conditional(x, z)
}
