//! Two-sided exit probabilities for renewal processes with drift and jumps.
//!
//! A process `X_t = x + c t + sum J_n` with renewal arrival times and
//! i.i.d. jumps is started inside `(a, b)`; the central quantity is the
//! probability that it leaves through the top. The crate provides a
//! product-integration Fredholm solver for general laws, closed and
//! semi-closed forms for structured model classes, and a Monte Carlo
//! reference estimator.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod fredholm;
pub mod mc;
pub mod model;
mod quad;
pub mod ratfun;
pub mod solve;

pub use error::{ErrorClass, EscapeError, Result};
pub use model::{
    build_model, decompose_jumps, net_profit, route, ArrivalLaw, ArrivalSpec, Atom, EscapeQuery, JumpDensity,
    JumpLaw, JumpSpec, JumpSplit, Method, NetProfit, ProcessModel, SolverRoute,
};
pub use solve::{solve, sweep, EscapeResult, SolveOptions, SolvedBy, Solver};
