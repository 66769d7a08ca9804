use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::linear::solve_equilibrated;
use super::theta::combine;
use crate::error::{EscapeError, Result};
use crate::model::ProcessModel;
use crate::ratfun::{lundberg_roots, ExpPoly, Term};

/// Real basis `x^j e^{rx}` (real and imaginary parts for complex `r`) from
/// the roots of the characteristic polynomial.
fn real_basis(model: &ProcessModel, b: f64) -> Result<Vec<ExpPoly>> {
    let roots = lundberg_roots(model, b)?;
    let mut basis = Vec::new();
    for root in &roots.roots {
        let r = root.value;
        if r.im < 0.0 {
            continue;
        }
        for j in 0..root.multiplicity {
            if r.im == 0.0 {
                basis.push(ExpPoly::new(vec![Term::new(Complex64::new(1.0, 0.0), r, j as u32)]));
            } else {
                basis.push(ExpPoly::new(vec![Term::new(Complex64::new(1.0, 0.0), r, j as u32)]));
                basis.push(ExpPoly::new(vec![Term::new(Complex64::new(0.0, -1.0), r, j as u32)]));
            }
        }
    }
    Ok(basis)
}

/// Escape probability for a jump law with rational moment generating
/// function, under Poisson arrivals (`c > 0`) or any arrivals with `c = 0`.
/// Solves the boundary system on the exponential basis and returns the
/// solution with its smallest relative pivot.
pub(crate) fn solve(model: &ProcessModel, b: f64) -> Result<(ExpPoly, f64)> {
    let c = model.drift();
    let (q, _, hp, hm) = model
        .jumps()
        .rational_cf()
        .ok_or_else(|| EscapeError::RoutingMismatch("jump law has no rational transform".into()))?;
    let inv_rho = if c > 0.0 {
        1.0 / model.rho().ok_or_else(|| EscapeError::RoutingMismatch("needs Poisson arrivals".into()))?
    } else {
        0.0
    };
    let n = q.degree();
    let basis = real_basis(model, b)?;
    let unknowns = if c > 0.0 { n + 1 } else { n };
    if basis.len() != unknowns {
        return Err(EscapeError::RoutingMismatch(format!(
            "{} basis functions for {} boundary conditions",
            basis.len(),
            unknowns
        )));
    }
    let hp_d: Vec<ExpPoly> = (0..n).map(|j| hp.nth_derivative(j)).collect();
    let hm_d: Vec<ExpPoly> = (0..n).map(|j| hm.nth_derivative(j)).collect();
    let sign = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let jump_i: Vec<f64> = (0..n).map(|l| hp_d[l].eval(0.0) - sign(l) * hm_d[l].eval(0.0)).collect();
    let phi_d: Vec<Vec<f64>> = basis
        .iter()
        .map(|f| (0..=n).map(|d| f.nth_derivative(d).eval(b)).collect())
        .collect();

    let mut a = DMatrix::zeros(unknowns, unknowns);
    let mut rhs = DVector::zeros(unknowns);
    let offset = if c > 0.0 {
        for (k, d) in phi_d.iter().enumerate() {
            a[(0, k)] = d[0];
        }
        rhs[0] = 1.0;
        1
    } else {
        0
    };
    for j in 0..n {
        let row = j + offset;
        for (k, f) in basis.iter().enumerate() {
            let d = &phi_d[k];
            let mut v = d[j] - inv_rho * d[j + 1];
            for l in 0..j {
                v += sign(l) * jump_i[l] * d[j - l - 1];
            }
            v -= f.convolve(&hm_d[j]).eval(b);
            a[(row, k)] = v;
        }
        rhs[row] = if j == 0 { hp.integral_to_infinity() } else { sign(j - 1) * hp_d[j - 1].eval(0.0) };
    }
    let (alpha, pivot) = solve_equilibrated(&a, &rhs)?;
    Ok((combine(&basis, alpha.as_slice(), None), pivot))
}
