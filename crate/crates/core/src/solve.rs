//! Query dispatch: normalisation, routing, caching of prepared solvers and
//! fallbacks.

use std::sync::OnceLock;

use crate::analytic::{self, AnalyticSolution};
use crate::error::{EscapeError, Result};
use crate::fredholm::{self, FredholmOptions, GridSolution};
use crate::mc::{self, McEstimate};
use crate::model::{normalize, route_normalized, EscapeQuery, Method, Normalized, ProcessModel, SolverRoute};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub fredholm: FredholmOptions,
    pub mc_paths: u64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { fredholm: FredholmOptions::default(), mc_paths: 1_000_000, seed: 0 }
    }
}

/// Which computation produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvedBy {
    Analytic,
    Fredholm,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct EscapeResult {
    pub x: f64,
    pub probability: f64,
    /// Most specific route for the query (independent of the method used).
    pub route: SolverRoute,
    pub solved_by: SolvedBy,
    /// Analytic: rounding estimate. Fredholm: Picard bound. Monte Carlo:
    /// standard error.
    pub error_bound: f64,
    pub mc: Option<McEstimate>,
    pub diagnostics: Vec<String>,
}

/// Solver for one model and interval; analytic and grid solutions are
/// prepared lazily and reused across starting levels.
pub struct Solver {
    model: ProcessModel,
    a: f64,
    b: f64,
    opts: SolveOptions,
    norm: Normalized,
    analytic: OnceLock<std::result::Result<AnalyticSolution, EscapeError>>,
    grid: OnceLock<std::result::Result<GridSolution, EscapeError>>,
}

impl Solver {
    pub fn new(model: &ProcessModel, a: f64, b: f64, opts: SolveOptions) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(EscapeError::Range(format!("need a < b, got a={a}, b={b}")));
        }
        let norm = normalize(model, a, a, b)?;
        Ok(Solver {
            model: model.clone(),
            a,
            b,
            opts,
            norm,
            analytic: OnceLock::new(),
            grid: OnceLock::new(),
        })
    }

    fn analytic(&self) -> Result<&AnalyticSolution> {
        self.analytic
            .get_or_init(|| analytic::prepare(&self.norm.model, self.norm.w))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn grid(&self) -> Result<&GridSolution> {
        self.grid
            .get_or_init(|| fredholm::solve_fredholm(&self.norm.model, self.norm.w, &self.opts.fredholm))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Level in the normalised frame.
    fn level(&self, x: f64) -> f64 {
        let y = x - self.a;
        if self.norm.reflected {
            self.norm.w - y
        } else {
            y
        }
    }

    fn unreflect(&self, p: f64) -> f64 {
        if self.norm.reflected {
            1.0 - p
        } else {
            p
        }
    }

    /// Route for starting level `x` in `[a, b]`.
    pub fn route(&self, x: f64) -> SolverRoute {
        route_normalized(&self.norm.model, self.level(x), self.norm.w)
    }

    /// Escape probability from `x` in `[a, b]` (endpoints as one-sided
    /// limits for the deterministic solvers) given elapsed time `z`.
    pub fn eval(&self, x: f64, z: f64, method: Method) -> Result<EscapeResult> {
        if !x.is_finite() || !(self.a..=self.b).contains(&x) {
            return Err(EscapeError::Range(format!("need a <= x <= b, got a={}, x={x}, b={}", self.a, self.b)));
        }
        if !(z >= 0.0) || !z.is_finite() {
            return Err(EscapeError::Range(format!("history z must be nonnegative, got {z}")));
        }
        let route = self.route(x);
        let c = self.norm.model.drift();
        let memoryless = c == 0.0 || z == 0.0 || self.norm.model.arrivals().exponential_rate().is_some();
        let mut diagnostics = Vec::new();
        match method {
            Method::Analytic => {
                if !memoryless {
                    return Err(EscapeError::RoutingMismatch(
                        "analytic solvers do not condition on elapsed time".into(),
                    ));
                }
                self.by_analytic(x, route, diagnostics)
            }
            Method::Fredholm => self.by_fredholm(x, z, route, diagnostics),
            Method::MonteCarlo => self.by_mc(x, z, route, diagnostics),
            Method::Auto => {
                if memoryless && route.is_analytic() {
                    match self.by_analytic(x, route, Vec::new()) {
                        Ok(r) => return Ok(r),
                        Err(e) if e.class() != crate::error::ErrorClass::Config => {
                            diagnostics.push(format!("analytic solver failed ({e}); using the integral equation"));
                        }
                        Err(e) => return Err(e),
                    }
                }
                if route != SolverRoute::MonteCarloOnly {
                    match self.by_fredholm(x, z, route, diagnostics.clone()) {
                        Ok(r) => return Ok(r),
                        Err(EscapeError::NotContractive(l)) => {
                            diagnostics.push(format!("operator not contractive (L = {l}); using Monte Carlo"));
                        }
                        Err(e) => return Err(e),
                    }
                }
                self.by_mc(x, z, route, diagnostics)
            }
        }
    }

    fn by_analytic(&self, x: f64, route: SolverRoute, mut diagnostics: Vec<String>) -> Result<EscapeResult> {
        let y = self.level(x);
        let w = self.norm.w;
        let (p, err) = if route == SolverRoute::TrivialDouble {
            (analytic::ep_trivial(&self.norm.model, y, w)?, 4.0 * f64::EPSILON)
        } else if route.is_analytic() {
            let v = self.analytic()?.evaluate(y)?;
            if (v.raw - v.value).abs() > 1e-9 {
                diagnostics.push(format!("clamped analytic value {}", v.raw));
            }
            (v.value, v.error_bound)
        } else {
            return Err(EscapeError::RoutingMismatch(format!("no analytic solver for route {route}")));
        };
        Ok(EscapeResult {
            x,
            probability: self.unreflect(p),
            route,
            solved_by: SolvedBy::Analytic,
            error_bound: err,
            mc: None,
            diagnostics,
        })
    }

    fn by_fredholm(&self, x: f64, z: f64, route: SolverRoute, mut diagnostics: Vec<String>) -> Result<EscapeResult> {
        let g = self.grid()?;
        if g.excursion > 1e-9 {
            diagnostics.push(format!("grid values clamped, largest excursion {}", g.excursion));
        }
        let p = g.eval_conditional(self.level(x), z)?;
        Ok(EscapeResult {
            x,
            probability: self.unreflect(p),
            route,
            solved_by: SolvedBy::Fredholm,
            error_bound: g.error_bound,
            mc: None,
            diagnostics,
        })
    }

    fn by_mc(&self, x: f64, z: f64, route: SolverRoute, mut diagnostics: Vec<String>) -> Result<EscapeResult> {
        let (n, seed) = (self.opts.mc_paths, self.opts.seed);
        let est = if z > 0.0 {
            mc::estimate_conditional_ep(&self.model, x, self.a, self.b, z, n, seed)?
        } else {
            mc::estimate_ep(&self.model, x, self.a, self.b, n, seed)?
        };
        diagnostics.extend(est.notes.iter().cloned());
        Ok(EscapeResult {
            x,
            probability: est.value,
            route,
            solved_by: SolvedBy::MonteCarlo,
            error_bound: est.stderr,
            mc: Some(est),
            diagnostics,
        })
    }

    /// The prepared grid solution in the normalised frame.
    pub fn grid_solution(&self) -> Result<&GridSolution> {
        self.grid()
    }
}

/// Solves one query.
pub fn solve(model: &ProcessModel, query: &EscapeQuery, opts: &SolveOptions) -> Result<EscapeResult> {
    query.validate()?;
    Solver::new(model, query.a, query.b, *opts)?.eval(query.x, query.z, query.method)
}

/// Solves over many starting levels in `[a, b]`, sharing prepared solvers.
pub fn sweep(
    model: &ProcessModel,
    a: f64,
    b: f64,
    xs: &[f64],
    z: f64,
    method: Method,
    opts: &SolveOptions,
) -> Result<Vec<EscapeResult>> {
    let s = Solver::new(model, a, b, *opts)?;
    xs.iter().map(|&x| s.eval(x, z, method)).collect()
}
