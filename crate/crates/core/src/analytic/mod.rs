//! Closed-form and semi-closed-form escape probabilities for the structured
//! model classes. Every solver works on a normalised model (`c >= 0`, lower
//! barrier at zero, upper barrier at `b`).

mod linear;
pub(crate) mod plan;
mod poisson;
mod rational_cf;
mod theta;

use statrs::function::gamma::gamma_lr;

pub use poisson::{gamma_half_pi_closed, gamma_half_pi_talbot, gamma_half_survival};
pub use theta::ThetaAssembly;

use crate::error::{EscapeError, Result};
use crate::model::{decompose_jumps, ProcessModel, Side, SolverRoute};
use crate::ratfun::{invert_rational, ExpPoly, Poly};
use plan::{plan, Plan};
use poisson::transform;

/// How a prepared solution is evaluated at `x`.
#[derive(Debug, Clone)]
enum Eval {
    /// `N(x) = f(x)`.
    Direct(ExpPoly),
    /// `N(x) = 1 - f(b - x)`.
    Mirror(ExpPoly),
    /// `N(x) = pi(x) / pi(b)` for `Gamma(1/2)` jumps.
    GammaHalf { rate: f64, rho: f64, pi_b: f64 },
    /// Poisson arrivals, one positive jump size, lower exits only by jumps
    /// at or below `-b`.
    LowerConstant { y1: f64, p: f64, q: f64, rho: f64 },
    /// Zero drift, one positive jump size.
    ZeroConstant { y1: f64, p: f64 },
    /// Zero drift, two-sided exponential jumps.
    DoubleExp { p: f64, rate_pos: f64, rate_neg: f64 },
}

/// Analytic escape probability prepared for one model and width; cheap to
/// evaluate at many starting levels.
#[derive(Debug, Clone)]
pub struct AnalyticSolution {
    route: SolverRoute,
    b: f64,
    eval: Eval,
    pivot: f64,
}

/// One evaluation of an analytic solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticValue {
    /// Value clamped to `[0, 1]`.
    pub value: f64,
    /// Value before clamping.
    pub raw: f64,
    /// Rounding error estimate from cancellation and conditioning.
    pub error_bound: f64,
}

const EPS: f64 = f64::EPSILON;

impl AnalyticSolution {
    pub fn route(&self) -> SolverRoute {
        self.route
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Exponential-polynomial form of `N`, when the solution has one.
    pub fn exppoly(&self) -> Option<&ExpPoly> {
        match &self.eval {
            Eval::Direct(f) => Some(f),
            _ => None,
        }
    }

    /// Unclamped `N(x)` for `x` in `[0, b]`.
    pub fn ep_raw(&self, x: f64) -> Result<f64> {
        Ok(self.evaluate(x)?.raw)
    }

    pub fn evaluate(&self, x: f64) -> Result<AnalyticValue> {
        if !x.is_finite() {
            return Err(EscapeError::NonFinite(format!("start level {x}")));
        }
        let x = x.clamp(0.0, self.b);
        let cond = 1.0 / self.pivot.min(1.0);
        let (raw, err) = match &self.eval {
            Eval::Direct(f) => {
                let v = f.eval(x);
                (v, 64.0 * EPS * f.eval_abs_sum(x) * cond)
            }
            Eval::Mirror(f) => {
                let y = self.b - x;
                (1.0 - f.eval(y), 64.0 * EPS * (1.0 + f.eval_abs_sum(y)) * cond)
            }
            Eval::GammaHalf { rate, rho, pi_b } => {
                let v = poisson::gamma_half_pi(*rate, *rho, x)? / pi_b;
                let tol = if poisson::gamma_needs_talbot(*rate, *rho) { 1e-8 } else { 1e-12 };
                (v, tol)
            }
            Eval::LowerConstant { y1, p, q, rho } => {
                let t = self.b - x;
                let kmax = (t / y1).floor() as usize;
                let mut acc = 0.0;
                let mut pk = 1.0;
                for k in 0..=kmax {
                    let xi = t - k as f64 * y1;
                    if xi > 0.0 {
                        acc += pk * gamma_lr(k as f64 + 1.0, rho * xi);
                    }
                    pk *= p;
                }
                (1.0 - q * acc, 64.0 * EPS * (kmax as f64 + 1.0))
            }
            Eval::ZeroConstant { y1, p } => {
                let r = (self.b - x) / y1;
                // jumps needed to reach b; exact multiples land on the barrier and exit
                let k = (r - 1e-12 * r.max(1.0)).ceil().max(1.0);
                (p.powf(k), 4.0 * EPS)
            }
            Eval::DoubleExp { p, rate_pos, rate_neg } => (zero_drift_double_exp(*p, *rate_pos, *rate_neg, x, self.b), 16.0 * EPS),
        };
        if !raw.is_finite() {
            return Err(EscapeError::NonFinite(format!("analytic value at {x}")));
        }
        Ok(AnalyticValue { value: raw.clamp(0.0, 1.0), raw, error_bound: err })
    }
}

/// Zero drift with `P(J > 0) = p`, upward rate `gp`, downward rate `gm`.
fn zero_drift_double_exp(p: f64, gp: f64, gm: f64, x: f64, b: f64) -> f64 {
    let q = 1.0 - p;
    let v = q * gp - p * gm;
    if v.abs() < 1e-10 {
        p * (1.0 + q * (gp + gm) * x) / (1.0 + q * gp * b)
    } else {
        p * (gm - q * (gp + gm) * (v * x).exp()) / (p * gm - q * gp * (v * b).exp())
    }
}

fn require_positive_drift(model: &ProcessModel) -> Result<f64> {
    match model.rho() {
        Some(r) if model.drift() > 0.0 => Ok(r),
        _ => Err(EscapeError::RoutingMismatch("needs positive drift and Poisson arrivals".into())),
    }
}

fn prepare_plan(model: &ProcessModel, b: f64, p: &Plan) -> Result<AnalyticSolution> {
    let mut pivot = 1.0;
    let eval = match p {
        Plan::PoissonRational { k } => {
            let rho = require_positive_drift(model)?;
            let pi = poisson::rational_pi(rho, k)?;
            Eval::Direct(pi.scale(1.0 / pi.eval(b)))
        }
        Plan::PoissonGamma { rate } => {
            let rho = require_positive_drift(model)?;
            let pi_b = poisson::gamma_half_pi(*rate, rho, b)?;
            Eval::GammaHalf { rate: *rate, rho, pi_b }
        }
        Plan::PoissonConstant { y1 } => {
            let rho = require_positive_drift(model)?;
            let pi = poisson::constant_pi(rho, *y1, b)?;
            Eval::Direct(pi.scale(1.0 / pi.eval(b)))
        }
        Plan::RationalArrivals { k } => {
            let t = ThetaAssembly::new(model, k, b)?;
            pivot = t.pivot();
            Eval::Direct(t.solution())
        }
        Plan::TwoSidedUpper { k, p } => {
            let (f, piv) = theta::two_sided_upper(model, k, *p, b)?;
            pivot = piv;
            Eval::Direct(f)
        }
        Plan::TwoSidedLowerRational { h, q } => Eval::Mirror(two_sided_lower(model, h, *q, b)?),
        Plan::TwoSidedLowerConstant { y1, p, q } => {
            let rho = require_positive_drift(model)?;
            check_lower_condition(model, b)?;
            Eval::LowerConstant { y1: *y1, p: *p, q: *q, rho }
        }
        Plan::PoissonRationalCf | Plan::ZeroDriftRationalCf => {
            let (f, piv) = rational_cf::solve(model, b)?;
            pivot = piv;
            Eval::Direct(f)
        }
        Plan::ZeroDriftUpper { k, p } => {
            let (nk, dk) = transform(k);
            let den = Poly::s().mul(&dk.sub(&nk));
            Eval::Direct(invert_rational(&dk.scale(*p), &den)?)
        }
        Plan::ZeroDriftLower { h, q } => {
            let (nh, dh) = transform(h);
            let den = Poly::s().mul(&dh.sub(&nh));
            Eval::Mirror(invert_rational(&dh.scale(*q), &den)?)
        }
        Plan::ZeroDriftConstant { y1, p } => Eval::ZeroConstant { y1: *y1, p: *p },
        Plan::ZeroDriftDoubleExp { p, rate_pos, rate_neg } => {
            Eval::DoubleExp { p: *p, rate_pos: *rate_pos, rate_neg: *rate_neg }
        }
    };
    Ok(AnalyticSolution { route: p.route(), b, eval, pivot })
}

/// `F(b/c) P(0 <= J < b) < 1`, needed by the lower two-sided solvers.
fn check_lower_condition(model: &ProcessModel, b: f64) -> Result<()> {
    let c = model.drift();
    let jumps = model.jumps();
    let p1 = jumps.cdf_left(b) - jumps.cdf_left(0.0);
    let f = model.arrivals().cdf(b / c);
    if f * p1 >= 1.0 {
        return Err(EscapeError::ConditionViolated(format!("F(b/c) P(0 <= J < b) = {}", f * p1)));
    }
    Ok(())
}

/// `q g` with `N(x) = 1 - q g(b - x)`, `g` the inverse of
/// `R(cs) D(s) / (s (Q(cs) D(s) - N(s) R(cs)))` for arrival transform `R/Q`
/// and positive jump density with transform `N/D`.
fn two_sided_lower(model: &ProcessModel, h: &ExpPoly, q: f64, b: f64) -> Result<ExpPoly> {
    let c = model.drift();
    if c <= 0.0 {
        return Err(EscapeError::RoutingMismatch("needs positive drift".into()));
    }
    check_lower_condition(model, b)?;
    let rt = model
        .arrivals()
        .transform()
        .ok_or_else(|| EscapeError::RoutingMismatch("arrivals have no rational transform".into()))?;
    let (nh, dh) = transform(h);
    let rc = rt.r.compose_scale(c);
    let qc = rt.q.compose_scale(c);
    let num = rc.mul(&dh).scale(q);
    let den = Poly::s().mul(&qc.mul(&dh).sub(&nh.mul(&rc)));
    invert_rational(&num, &den)
}

/// Prepares the analytic solution for a normalised model on `(0, b)`.
pub fn prepare(model: &ProcessModel, b: f64) -> Result<AnalyticSolution> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(EscapeError::Range(format!("width must be positive, got {b}")));
    }
    if model.drift() < 0.0 {
        return Err(EscapeError::RoutingMismatch("reflect negative drift first".into()));
    }
    let p = plan(model, b).ok_or_else(|| EscapeError::RoutingMismatch("no analytic solver applies".into()))?;
    prepare_plan(model, b, &p)
}

fn ep_on_route(model: &ProcessModel, x: f64, b: f64, route: SolverRoute) -> Result<f64> {
    let sol = prepare(model, b)?;
    if sol.route() != route {
        return Err(EscapeError::RoutingMismatch(format!("model routes to {}, not {}", sol.route(), route)));
    }
    Ok(sol.evaluate(x)?.value)
}

/// Escape probability when no jump can land inside the interval: the first
/// jump (or reaching `b` by drift) decides.
pub fn ep_trivial(model: &ProcessModel, x: f64, b: f64) -> Result<f64> {
    let s = decompose_jumps(model, x, b);
    if s.p1 != 0.0 || s.q1 != 0.0 {
        return Err(EscapeError::RoutingMismatch("jumps can land inside the interval".into()));
    }
    let c = model.drift();
    if c > 0.0 {
        let t = (b - x) / c;
        let f = model.arrivals().cdf(t);
        Ok((1.0 - f + s.p2 * f).clamp(0.0, 1.0))
    } else if s.p2 + s.q2 > 0.0 {
        Ok(s.p2 / (s.p2 + s.q2))
    } else {
        Err(EscapeError::NonTermination(0))
    }
}

/// Poisson arrivals, positive drift, negative jumps only.
pub fn ep_poisson_one_sided(model: &ProcessModel, x: f64, b: f64) -> Result<f64> {
    ep_on_route(model, x, b, SolverRoute::PoissonOneSided)
}

/// Rational arrival transform, positive drift, negative exp-polynomial jumps.
pub fn ep_rational_arrivals(model: &ProcessModel, x: f64, b: f64) -> Result<f64> {
    ep_on_route(model, x, b, SolverRoute::RationalArrivalsOneSided)
}

/// Upward jumps that always overshoot `b`.
pub fn ep_two_sided_upper(model: &ProcessModel, x: f64, b: f64) -> Result<f64> {
    ep_on_route(model, x, b, SolverRoute::TwoSidedUpper)
}

/// Downward jumps that always undershoot zero.
pub fn ep_two_sided_lower(model: &ProcessModel, x: f64, b: f64) -> Result<f64> {
    ep_on_route(model, x, b, SolverRoute::TwoSidedLower)
}

/// Poisson arrivals and a jump law with rational moment generating function.
pub fn ep_poisson_rational_cf(model: &ProcessModel, x: f64, b: f64) -> Result<f64> {
    ep_on_route(model, x, b, SolverRoute::PoissonRationalCF)
}

/// Zero drift: only the embedded jump chain matters.
pub fn ep_zero_drift(model: &ProcessModel, x: f64, b: f64) -> Result<f64> {
    ep_on_route(model, x, b, SolverRoute::ZeroDrift)
}

/// Probability of never dropping below zero from `x` with no upper barrier,
/// for Poisson arrivals and negative jumps only; zero without net profit.
pub fn survival_poisson(model: &ProcessModel, x: f64) -> Result<f64> {
    let rho = require_positive_drift(model)?;
    if x < 0.0 {
        return Ok(0.0);
    }
    let jumps = model.jumps();
    let neg = jumps.side_view(Side::Neg, f64::INFINITY);
    if neg.total < 1.0 - 1e-12 {
        return Err(EscapeError::RoutingMismatch("survival needs negative jumps only".into()));
    }
    let m = -jumps.mean();
    if rho * m >= 1.0 {
        return Ok(0.0);
    }
    let pi = if let Some(g) = jumps.gamma_half_rate() {
        return Ok(gamma_half_survival(g, rho, x).clamp(0.0, 1.0));
    } else if neg.is_rational() && !neg.rational.is_zero() {
        poisson::rational_pi(rho, &neg.rational)?.eval(x)
    } else if let ([a], true) = (jumps.atoms(), jumps.continuous_weight() == 0.0) {
        poisson::constant_pi(rho, -a.location, x)?.eval(x)
    } else {
        return Err(EscapeError::RoutingMismatch("no closed form for this jump law".into()));
    };
    Ok(((1.0 - rho * m) * pi).clamp(0.0, 1.0))
}

/// Resolvent density `pi` used by the one-sided and upper two-sided
/// solvers: `pi(0) = 1` for Poisson arrivals, and for arrival transforms of
/// order `n` the first nonzero derivative at zero is `pi^{(n-1)}(0) = 1`.
pub fn resolvent(model: &ProcessModel, b: f64) -> Result<ExpPoly> {
    let p = plan(model, b).ok_or_else(|| EscapeError::RoutingMismatch("no analytic solver applies".into()))?;
    match p {
        Plan::PoissonRational { k } => poisson::rational_pi(require_positive_drift(model)?, &k),
        Plan::PoissonConstant { y1 } => poisson::constant_pi(require_positive_drift(model)?, y1, b),
        Plan::RationalArrivals { k } => Ok(ThetaAssembly::new(model, &k, b)?.pi().clone()),
        Plan::TwoSidedUpper { k, .. } => {
            let rates = model.arrivals().phases().unwrap_or(&[]);
            let c = model.drift();
            let (nk, dk) = transform(&k);
            let mut q = Poly::constant(1.0);
            for &l in rates {
                q = q.mul(&Poly::new(vec![l, 1.0]));
            }
            let q0: f64 = rates.iter().product();
            let den = q.compose_scale(-c).mul(&dk).sub(&nk.scale(q0));
            invert_rational(&dk.scale((-c).powi(rates.len() as i32)), &den)
        }
        _ => Err(EscapeError::RoutingMismatch(format!("route {} has no resolvent density", p.route()))),
    }
}
