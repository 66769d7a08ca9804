//! Process description, jump decomposition and solver routing.

mod arrivals;
mod jumps;

use std::fmt;
use std::sync::Arc;

pub use arrivals::{ArrivalLaw, ArrivalSpec, GenericArrival, ScalarFn};
pub use jumps::{Atom, GenericJumpDensity, JumpDensity, JumpLaw, JumpSpec};
pub(crate) use jumps::Side;

use crate::analytic::plan::plan;
use crate::error::{EscapeError, Result};

/// `X_t = x + c t + sum_{n <= N_t} J_n` with renewal arrivals.
#[derive(Debug, Clone)]
pub struct ProcessModel {
    drift: f64,
    arrivals: Arc<ArrivalLaw>,
    jumps: Arc<JumpLaw>,
}

/// Validate the component laws and assemble a model.
pub fn build_model(c: f64, arrivals: ArrivalSpec, jumps: JumpSpec) -> Result<ProcessModel> {
    if !c.is_finite() {
        return Err(EscapeError::InvalidParameter(format!("drift must be finite, got {c}")));
    }
    Ok(ProcessModel {
        drift: c,
        arrivals: Arc::new(ArrivalLaw::new(arrivals)?),
        jumps: Arc::new(JumpLaw::new(jumps)?),
    })
}

impl ProcessModel {
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn arrivals(&self) -> &ArrivalLaw {
        &self.arrivals
    }

    pub fn jumps(&self) -> &JumpLaw {
        &self.jumps
    }

    /// `lambda / c` for exponential arrivals and nonzero drift.
    pub fn rho(&self) -> Option<f64> {
        match self.arrivals.exponential_rate() {
            Some(l) if self.drift != 0.0 => Some(l / self.drift),
            _ => None,
        }
    }

    /// The model of the mirrored path `-X`: drift `-c`, jumps `-J`.
    pub fn reflected(&self) -> Result<ProcessModel> {
        Ok(ProcessModel {
            drift: -self.drift,
            arrivals: self.arrivals.clone(),
            jumps: Arc::new(self.jumps.reflect()?),
        })
    }
}

/// Masses of the four pieces of the jump law seen from level `x` in `(0, b)`.
#[derive(Debug, Clone)]
pub struct JumpSplit {
    /// `P(-b < J < 0)`.
    pub q1: f64,
    /// `P(J <= -b)`.
    pub q2: f64,
    /// `P(0 <= J < b - x)`.
    pub p1: f64,
    /// `P(J >= b - x)`.
    pub p2: f64,
    pub x: f64,
    pub b: f64,
    law: Arc<JumpLaw>,
}

/// Component of a [`JumpSplit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Q1,
    Q2,
    P1,
    P2,
}

impl JumpSplit {
    pub fn mass(&self, part: SplitPart) -> f64 {
        match part {
            SplitPart::Q1 => self.q1,
            SplitPart::Q2 => self.q2,
            SplitPart::P1 => self.p1,
            SplitPart::P2 => self.p2,
        }
    }

    /// Conditional cdf of `J` given the component; `None` for empty parts.
    pub fn component_cdf(&self, part: SplitPart, y: f64) -> Option<f64> {
        let m = self.mass(part);
        if m <= 0.0 {
            return None;
        }
        let l = &self.law;
        let (b, r) = (self.b, self.b - self.x);
        let v = match part {
            SplitPart::Q2 => l.cdf(y.min(-b)),
            SplitPart::Q1 => {
                if y <= -b {
                    0.0
                } else {
                    l.cdf(y.min(0.0)) - l.cdf(-b) - if y >= 0.0 { l.cdf(0.0) - l.cdf_left(0.0) } else { 0.0 }
                }
            }
            SplitPart::P1 => {
                if y < 0.0 {
                    0.0
                } else if y >= r {
                    self.p1
                } else {
                    l.cdf(y) - l.cdf_left(0.0)
                }
            }
            SplitPart::P2 => {
                if y < r {
                    0.0
                } else {
                    l.cdf(y) - l.cdf_left(r)
                }
            }
        };
        Some((v / m).clamp(0.0, 1.0))
    }
}

/// Split the jump law at `-b`, `0` and `b - x` (interval normalised to `a = 0`).
pub fn decompose_jumps(model: &ProcessModel, x: f64, b: f64) -> JumpSplit {
    let l = &model.jumps;
    let q2 = l.cdf(-b);
    let below0 = l.cdf_left(0.0);
    let below_r = l.cdf_left(b - x);
    JumpSplit {
        q1: (below0 - q2).max(0.0),
        q2,
        p1: (below_r - below0).max(0.0),
        p2: (1.0 - below_r).max(0.0),
        x,
        b,
        law: model.jumps.clone(),
    }
}

/// Solver selection hint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Auto,
    Fredholm,
    Analytic,
    MonteCarlo,
}

/// Starting level, barriers, optional time since the last arrival and
/// solver hint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeQuery {
    pub x: f64,
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub method: Method,
}

impl EscapeQuery {
    pub fn new(x: f64, a: f64, b: f64) -> Self {
        EscapeQuery { x, a, b, z: 0.0, method: Method::Auto }
    }

    pub fn with_history(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x, self.a, self.b, self.z].iter().all(|v| v.is_finite()) {
            return Err(EscapeError::Range("non-finite query value".into()));
        }
        if !(self.a < self.x && self.x < self.b) {
            return Err(EscapeError::Range(format!("need a < x < b, got a={}, x={}, b={}", self.a, self.x, self.b)));
        }
        if self.z < 0.0 {
            return Err(EscapeError::Range(format!("history z must be nonnegative, got {}", self.z)));
        }
        Ok(())
    }
}

/// Which solver answers a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverRoute {
    TrivialDouble,
    PoissonOneSided,
    RationalArrivalsOneSided,
    TwoSidedUpper,
    TwoSidedLower,
    PoissonRationalCF,
    ZeroDrift,
    FredholmNumeric,
    MonteCarloOnly,
}

impl SolverRoute {
    pub fn is_analytic(&self) -> bool {
        !matches!(self, SolverRoute::FredholmNumeric | SolverRoute::MonteCarloOnly)
    }
}

impl fmt::Display for SolverRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolverRoute::TrivialDouble => "TrivialDouble",
            SolverRoute::PoissonOneSided => "PoissonOneSided",
            SolverRoute::RationalArrivalsOneSided => "RationalArrivalsOneSided",
            SolverRoute::TwoSidedUpper => "TwoSidedUpper",
            SolverRoute::TwoSidedLower => "TwoSidedLower",
            SolverRoute::PoissonRationalCF => "PoissonRationalCF",
            SolverRoute::ZeroDrift => "ZeroDrift",
            SolverRoute::FredholmNumeric => "FredholmNumeric",
            SolverRoute::MonteCarloOnly => "MonteCarloOnly",
        };
        f.write_str(s)
    }
}

/// Query mapped to `(0, w)` with nonnegative drift: the (possibly reflected)
/// model, start `y`, width `w`, and whether the answer must be complemented.
pub(crate) struct Normalized {
    pub model: ProcessModel,
    pub y: f64,
    pub w: f64,
    pub reflected: bool,
}

pub(crate) fn normalize(model: &ProcessModel, x: f64, a: f64, b: f64) -> Result<Normalized> {
    let w = b - a;
    let y = x - a;
    if model.drift < 0.0 {
        Ok(Normalized { model: model.reflected()?, y: w - y, w, reflected: true })
    } else {
        Ok(Normalized { model: model.clone(), y, w, reflected: false })
    }
}

/// Route for a normalised model (`c >= 0`) at level `x` in `[0, b]`.
pub(crate) fn route_normalized(model: &ProcessModel, x: f64, b: f64) -> SolverRoute {
    let split = decompose_jumps(model, x, b);
    if split.p1 == 0.0 && split.q1 == 0.0 {
        return SolverRoute::TrivialDouble;
    }
    match plan(model, b) {
        Some(p) => p.route(),
        None => {
            if crate::fredholm::contraction_value(model, b) < 1.0 - 1e-12 {
                SolverRoute::FredholmNumeric
            } else {
                SolverRoute::MonteCarloOnly
            }
        }
    }
}

/// Most specific solver for the query; negative drift is reflected first.
pub fn route(model: &ProcessModel, query: &EscapeQuery) -> SolverRoute {
    match normalize(model, query.x, query.a, query.b) {
        Ok(n) => route_normalized(&n.model, n.y, n.w),
        Err(_) => SolverRoute::MonteCarloOnly,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetProfit {
    Holds,
    Fails,
    Boundary,
}

/// Sign of the mean increment per renewal cycle, `c E tau + E J`.
pub fn net_profit(model: &ProcessModel) -> NetProfit {
    let v = model.drift * model.arrivals.mean() + model.jumps.mean();
    if !v.is_finite() {
        NetProfit::Fails
    } else if v.abs() < 1e-12 {
        NetProfit::Boundary
    } else if v > 0.0 {
        NetProfit::Holds
    } else {
        NetProfit::Fails
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_model(c: f64, lambda: f64, gamma: f64) -> ProcessModel {
        build_model(
            c,
            ArrivalSpec::Exponential { rate: lambda },
            JumpSpec::density(JumpDensity::ExponentialNegative { rate: gamma }),
        )
        .unwrap()
    }

    #[test]
    fn split_of_exponential_negative() {
        let m = exp_model(1.0, 1.0, 1.0);
        let s = decompose_jumps(&m, 1.0, 2.0);
        assert_eq!(s.p1, 0.0);
        assert_eq!(s.p2, 0.0);
        assert!((s.q2 - (-2f64).exp()).abs() < 1e-15);
        assert!((s.q1 - (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert!((s.component_cdf(SplitPart::Q1, -1.0).unwrap() - ((-1f64).exp() - (-2f64).exp()) / s.q1).abs() < 1e-14);
    }

    #[test]
    fn split_of_far_atom() {
        let m = build_model(1.0, ArrivalSpec::Exponential { rate: 1.0 }, JumpSpec::constant(-4.0)).unwrap();
        let s = decompose_jumps(&m, 1.0, 2.0);
        assert_eq!((s.q1, s.q2, s.p1, s.p2), (0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn net_profit_examples() {
        assert_eq!(net_profit(&exp_model(1.0, 1.0, 2.0)), NetProfit::Holds);
        assert_eq!(net_profit(&exp_model(1.0, 2.0, 1.0)), NetProfit::Fails);
        let lap = build_model(0.0, ArrivalSpec::Exponential { rate: 1.0 }, JumpSpec::density(JumpDensity::Laplace { rate: 1.0 })).unwrap();
        assert_eq!(net_profit(&lap), NetProfit::Boundary);
    }

    #[test]
    fn routes() {
        let m = exp_model(1.0, 1.0, 2.0);
        assert_eq!(route(&m, &EscapeQuery::new(1.0, 0.0, 2.0)), SolverRoute::PoissonOneSided);
        let hypo = build_model(
            1.0,
            ArrivalSpec::Hypoexponential { rates: vec![1.0, 2.0] },
            JumpSpec {
                atoms: vec![Atom { location: 4.0, mass: 0.2 }],
                density: Some(JumpDensity::ExponentialNegative { rate: 1.0 }),
            },
        )
        .unwrap();
        assert_eq!(route(&hypo, &EscapeQuery::new(1.0, 0.0, 2.0)), SolverRoute::TwoSidedUpper);
        let zero = build_model(0.0, ArrivalSpec::Erlang { shape: 3, rate: 1.0 }, JumpSpec::density(JumpDensity::Laplace { rate: 1.0 })).unwrap();
        assert_eq!(route(&zero, &EscapeQuery::new(1.0, 0.0, 2.0)), SolverRoute::ZeroDrift);
        // negative drift with positive exponential jumps reflects to the one-sided case
        let neg = build_model(
            -1.0,
            ArrivalSpec::Exponential { rate: 1.0 },
            JumpSpec::density(JumpDensity::ExponentialNegative { rate: 2.0 }.reflect()),
        )
        .unwrap();
        assert_eq!(route(&neg, &EscapeQuery::new(0.5, 0.0, 2.0)), SolverRoute::PoissonOneSided);
    }
}
