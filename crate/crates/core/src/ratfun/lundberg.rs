use super::poly::{poly_roots, Poly, RootSet};
use crate::error::{EscapeError, Result};
use crate::model::{ProcessModel, Side};

/// Which characteristic equation a model admits.
enum Form {
    /// `(1 - s/rho) Q(s) - R(s)` (or `Q - R` when `c = 0`) for a jump law
    /// with moment generating function `R/Q`.
    JumpCf { simple_required: bool },
    /// `Q_a(-c s) D_k(s) - R_a(-c s) N_k(s)` for rational arrivals `R_a/Q_a`
    /// and negative jumps with transform `N_k/D_k`.
    RationalArrivals,
}

fn form(model: &ProcessModel, b: f64) -> Result<(Form, Poly)> {
    let c = model.drift();
    let jumps = model.jumps();
    if let Some((q, r, _, _)) = jumps.rational_cf() {
        if c == 0.0 {
            return Ok((Form::JumpCf { simple_required: false }, q.sub(&r)));
        }
        if let (true, Some(rho)) = (c > 0.0, model.rho()) {
            let one_minus = Poly::new(vec![1.0, -1.0 / rho]);
            return Ok((Form::JumpCf { simple_required: true }, one_minus.mul(&q).sub(&r)));
        }
    }
    let neg = jumps.side_view(Side::Neg, b);
    let pos = jumps.side_view(Side::Pos, b);
    match model.arrivals().transform() {
        Some(rt) if c > 0.0 && pos.total == 0.0 && neg.is_rational() => {
            let (nk, dk) = if neg.rational.is_zero() {
                (Poly::constant(0.0), Poly::constant(1.0))
            } else {
                neg.rational.laplace_rational()
            };
            let p = rt.q.compose_scale(-c).mul(&dk).sub(&rt.r.compose_scale(-c).mul(&nk));
            Ok((Form::RationalArrivals, p))
        }
        _ => Err(EscapeError::RoutingMismatch("model has no polynomial Lundberg equation".into())),
    }
}

/// Characteristic polynomial whose roots give the exponential basis of the
/// escape probability: `(1 - s/rho) Q - R` for a rational jump transform
/// with Poisson arrivals, `Q - R` with zero drift, or
/// `Q_a(-cs) D_k - R_a(-cs) N_k` for rational arrivals with one-sided jumps.
pub fn lundberg_polynomial(model: &ProcessModel, b: f64) -> Result<Poly> {
    form(model, b).map(|(_, p)| p)
}

/// Roots of [`lundberg_polynomial`] with multiplicities. The positive-drift
/// jump transform form needs simple roots.
pub fn lundberg_roots(model: &ProcessModel, b: f64) -> Result<RootSet> {
    let (f, p) = form(model, b)?;
    let roots = poly_roots(p.coeffs())?;
    if let Form::JumpCf { simple_required: true } = f {
        if !roots.all_simple() {
            return Err(EscapeError::MultipleRootsDetected(format!("{:?}", roots.roots)));
        }
    }
    Ok(roots)
}
