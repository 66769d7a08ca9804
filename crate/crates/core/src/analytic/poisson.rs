use num_complex::Complex64;
use statrs::function::erf::erf;

use crate::error::{EscapeError, Result};
use crate::ratfun::{bromwich_invert, invert_rational, ExpPoly, Poly, Term};

/// `pi` with `pi(0) = 1` for Poisson arrivals at rate `rho` per unit
/// distance and defective negative jump density `k` (in magnitude):
/// transform `D / (s D - rho D + rho N)`.
pub(crate) fn rational_pi(rho: f64, k: &ExpPoly) -> Result<ExpPoly> {
    let (nk, dk) = transform(k);
    let s = Poly::s();
    let den = s.mul(&dk).sub(&dk.scale(rho)).add(&nk.scale(rho));
    invert_rational(&dk, &den)
}

/// Laplace transform of an exp-polynomial density as `(N, D)`; zero maps to
/// `(0, 1)`.
pub(crate) fn transform(k: &ExpPoly) -> (Poly, Poly) {
    if k.is_zero() {
        (Poly::constant(0.0), Poly::constant(1.0))
    } else {
        k.laplace_rational()
    }
}

/// Upper bound on the number of shifted terms in the constant-jump series.
const MAX_CONSTANT_TERMS: usize = 20_000;

/// `pi` for a constant negative jump `y1`: the step-shifted series
/// `sum_k (-rho)^k / k! (x - k y1)^k e^{rho (x - k y1)}` up to `x_max`.
pub(crate) fn constant_pi(rho: f64, y1: f64, x_max: f64) -> Result<ExpPoly> {
    let terms_needed = (x_max / y1).floor() as usize + 1;
    if terms_needed > MAX_CONSTANT_TERMS {
        return Err(EscapeError::InvalidParameter(format!(
            "jump size {y1} too small for width {x_max}: {terms_needed} series terms"
        )));
    }
    let mut terms = Vec::with_capacity(terms_needed);
    let mut coef = 1.0;
    for k in 0..terms_needed {
        if k > 0 {
            coef *= -rho / k as f64;
        }
        let mut t = Term::real(coef, rho, k as u32);
        t.shift = k as f64 * y1;
        terms.push(t);
    }
    Ok(ExpPoly::new(terms))
}

/// Roots `s-, s+` and `xi = s + gamma` of the quadratic attached to
/// `Gamma(1/2)` jumps.
fn gamma_roots(gamma: f64, rho: f64) -> (f64, f64) {
    let disc = (gamma * (gamma + 4.0 * rho)).sqrt();
    ((2.0 * rho - gamma + disc) / 2.0, (2.0 * rho - gamma - disc) / 2.0)
}

/// Survival function `(1 - rho m) pi(x)` for `Gamma(1/2, gamma)` jumps in
/// closed form with error functions.
pub fn gamma_half_survival(gamma: f64, rho: f64, x: f64) -> f64 {
    let (sp, sm) = gamma_roots(gamma, rho);
    let (xp, xm) = (sp + gamma, sm + gamma);
    let ep = (sp * x).exp();
    let em = (sm * x).exp();
    let d = sm - sp;
    0.5 * (1.0 + erf((gamma * x).sqrt()))
        + (ep * sm * xp * (sp - rho) - em * sp * xm * (sm - rho)) / (2.0 * gamma * rho * d)
        + (xm.sqrt() * sp * em * erf((x * xm).sqrt()) - xp.sqrt() * sm * ep * erf((x * xp).sqrt()))
            / (2.0 * gamma.sqrt() * d)
}

/// `pi(x)` with `pi(0) = 1` for `Gamma(1/2, gamma)` negative jumps, from the
/// error-function closed form.
pub fn gamma_half_pi_closed(gamma: f64, rho: f64, x: f64) -> f64 {
    gamma_half_survival(gamma, rho, x) / (1.0 - rho / (2.0 * gamma))
}

/// `pi(x)` for `Gamma(1/2, gamma)` jumps by numerical inversion of
/// `sqrt(g+s) / ((sqrt g - sqrt(g+s)) rho + s sqrt(g+s))`.
pub fn gamma_half_pi_talbot(gamma: f64, rho: f64, x: f64, nodes: usize) -> Result<f64> {
    if x == 0.0 {
        return Ok(1.0);
    }
    let (sp, _) = gamma_roots(gamma, rho);
    let sg = gamma.sqrt();
    let g = |s: Complex64| {
        let r = (s + gamma).sqrt();
        r / ((sg - r) * rho + s * r)
    };
    bromwich_invert(g, x, nodes, sp.max(0.0) + 1e-3)
}

/// Nodes used when the closed form is ill-conditioned.
pub(crate) const GAMMA_TALBOT_NODES: usize = 64;

/// Whether the closed form divides by a near-zero `1 - rho m`.
pub(crate) fn gamma_needs_talbot(gamma: f64, rho: f64) -> bool {
    (1.0 - rho / (2.0 * gamma)).abs() < 1e-6
}

pub(crate) fn gamma_half_pi(gamma: f64, rho: f64, x: f64) -> Result<f64> {
    if gamma_needs_talbot(gamma, rho) {
        gamma_half_pi_talbot(gamma, rho, x, GAMMA_TALBOT_NODES)
    } else {
        Ok(gamma_half_pi_closed(gamma, rho, x))
    }
}
