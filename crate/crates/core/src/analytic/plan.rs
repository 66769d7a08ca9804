use crate::model::{JumpDensity, ProcessModel, Side, SolverRoute};
use crate::ratfun::ExpPoly;

/// Analytic solution recipe for a normalised model (`c >= 0`, `a = 0`) on
/// an interval of width `b`. Independent of the starting level.
#[derive(Debug, Clone)]
pub(crate) enum Plan {
    /// Exponential arrivals, negative jumps with exp-polynomial density
    /// (defective `k`, the rest of the mass at or below `-b`).
    PoissonRational { k: ExpPoly },
    PoissonGamma { rate: f64 },
    PoissonConstant { y1: f64 },
    /// Rational arrival transform, negative exp-polynomial jumps.
    RationalArrivals { k: ExpPoly },
    /// Sum-of-exponentials arrivals, positive jumps all at or above `b`.
    TwoSidedUpper { k: ExpPoly, p: f64 },
    /// Rational arrivals, negative jumps all at or below `-b`, positive
    /// exp-polynomial jumps.
    TwoSidedLowerRational { h: ExpPoly, q: f64 },
    /// Exponential arrivals, one positive jump size, negative jumps at or
    /// below `-b`.
    TwoSidedLowerConstant { y1: f64, p: f64, q: f64 },
    PoissonRationalCf,
    ZeroDriftUpper { k: ExpPoly, p: f64 },
    ZeroDriftLower { h: ExpPoly, q: f64 },
    ZeroDriftConstant { y1: f64, p: f64 },
    ZeroDriftDoubleExp { p: f64, rate_pos: f64, rate_neg: f64 },
    ZeroDriftRationalCf,
}

impl Plan {
    pub fn route(&self) -> SolverRoute {
        match self {
            Plan::PoissonRational { .. } | Plan::PoissonGamma { .. } | Plan::PoissonConstant { .. } => {
                SolverRoute::PoissonOneSided
            }
            Plan::RationalArrivals { .. } => SolverRoute::RationalArrivalsOneSided,
            Plan::TwoSidedUpper { .. } => SolverRoute::TwoSidedUpper,
            Plan::TwoSidedLowerRational { .. } | Plan::TwoSidedLowerConstant { .. } => SolverRoute::TwoSidedLower,
            Plan::PoissonRationalCf => SolverRoute::PoissonRationalCF,
            Plan::ZeroDriftUpper { .. }
            | Plan::ZeroDriftLower { .. }
            | Plan::ZeroDriftConstant { .. }
            | Plan::ZeroDriftDoubleExp { .. }
            | Plan::ZeroDriftRationalCf => SolverRoute::ZeroDrift,
        }
    }
}

/// The single positive jump size when the positive part is one atom.
fn single_positive_atom(model: &ProcessModel, pos_cont: bool) -> Option<(f64, f64)> {
    let atoms: Vec<_> = model.jumps().atoms().iter().filter(|a| a.location > 0.0).collect();
    if atoms.len() == 1 && !pos_cont {
        Some((atoms[0].location, atoms[0].mass))
    } else {
        None
    }
}

pub(crate) fn plan(model: &ProcessModel, b: f64) -> Option<Plan> {
    let c = model.drift();
    let jumps = model.jumps();
    if c < 0.0 || jumps.zero_atom() {
        return None;
    }
    let neg = jumps.side_view(Side::Neg, b);
    let pos = jumps.side_view(Side::Pos, b);
    let arrivals = model.arrivals();
    let exponential = arrivals.exponential_rate().is_some();
    let rational_arrivals = arrivals.transform().is_some();
    let pos_cont = !pos.rational.is_zero() || pos.irregular || jumps.pieces().iter().any(|p| p.side == Side::Pos);

    if c == 0.0 {
        if pos.is_beyond_only() && neg.is_rational() {
            return Some(Plan::ZeroDriftUpper { k: neg.rational, p: pos.total });
        }
        if neg.is_beyond_only() {
            if let Some((y1, p)) = single_positive_atom(model, pos_cont) {
                return Some(Plan::ZeroDriftConstant { y1, p });
            }
            if pos.is_rational() && pos.beyond == 0.0 {
                return Some(Plan::ZeroDriftLower { h: pos.rational, q: neg.total });
            }
        }
        if jumps.atoms().is_empty() {
            match jumps.spec().density {
                Some(JumpDensity::DoubleExponential { p, rate_pos, rate_neg, shift_pos, shift_neg })
                    if shift_pos == 0.0 && shift_neg == 0.0 =>
                {
                    return Some(Plan::ZeroDriftDoubleExp { p, rate_pos, rate_neg });
                }
                Some(JumpDensity::Laplace { rate }) => {
                    return Some(Plan::ZeroDriftDoubleExp { p: 0.5, rate_pos: rate, rate_neg: rate });
                }
                _ => {}
            }
        }
        if jumps.rational_cf().is_some() {
            return Some(Plan::ZeroDriftRationalCf);
        }
        return None;
    }

    if pos.total == 0.0 {
        if exponential {
            if let Some(rate) = jumps.gamma_half_rate() {
                return Some(Plan::PoissonGamma { rate });
            }
            if neg.is_rational() && !jumps.has_nonpiece_density() {
                return Some(Plan::PoissonRational { k: neg.rational });
            }
            if let [a] = jumps.atoms() {
                if jumps.continuous_weight() == 0.0 && a.location < 0.0 {
                    return Some(Plan::PoissonConstant { y1: -a.location });
                }
            }
            return None;
        }
        if rational_arrivals && neg.is_rational() {
            return Some(Plan::RationalArrivals { k: neg.rational });
        }
        return None;
    }

    if pos.is_beyond_only() && neg.is_rational() && arrivals.phases().is_some() {
        return Some(Plan::TwoSidedUpper { k: neg.rational, p: pos.total });
    }
    if neg.is_beyond_only() {
        if exponential {
            if let Some((y1, p)) = single_positive_atom(model, pos_cont) {
                return Some(Plan::TwoSidedLowerConstant { y1, p, q: neg.total });
            }
        }
        if rational_arrivals && pos.is_rational() && pos.beyond == 0.0 {
            return Some(Plan::TwoSidedLowerRational { h: pos.rational, q: neg.total });
        }
    }
    if exponential && jumps.rational_cf().is_some() {
        return Some(Plan::PoissonRationalCf);
    }
    None
}
