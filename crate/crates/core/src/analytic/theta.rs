use nalgebra::{DMatrix, DVector};

use super::linear::{scaled_det, solve_equilibrated};
use super::poisson::transform;
use crate::error::{EscapeError, Result};
use crate::model::ProcessModel;
use crate::ratfun::{initial_data, invert_rational, ExpPoly, Poly};

/// Bordered determinant representation of the escape probability for
/// rational arrival transforms of order `n` and negative exp-polynomial
/// jumps: `N(x) = det Theta(x, b) / det Theta(b, b)` where `Theta(x, b)` has
/// first row `(0, pi(x), ..., pi^{(n-1)}(x))` bordering the matrix of
/// boundary functionals `A`.
#[derive(Debug, Clone)]
pub struct ThetaAssembly {
    b: f64,
    derivs: Vec<ExpPoly>,
    a: DMatrix<f64>,
    border: DVector<f64>,
    alpha: DVector<f64>,
    pivot: f64,
}

impl ThetaAssembly {
    /// Builds the system for `(0, b)`; the model must have positive drift,
    /// a rational arrival transform and no positive jumps.
    pub fn new(model: &ProcessModel, k: &ExpPoly, b: f64) -> Result<Self> {
        let c = model.drift();
        let rt = model
            .arrivals()
            .transform()
            .ok_or_else(|| EscapeError::RoutingMismatch("arrivals have no rational transform".into()))?;
        if c <= 0.0 {
            return Err(EscapeError::RoutingMismatch("bordered system needs positive drift".into()));
        }
        let n = rt.order();
        let (nk, dk) = transform(k);
        let den = rt.q.compose_scale(-c).mul(&dk).sub(&rt.r.compose_scale(-c).mul(&nk));
        // scaled so that pi^{(n-1)}(0) = 1
        let num = dk.scale(rt.q.leading() * (-c).powi(n as i32));
        let pi = invert_rational(&num, &den)?;
        let mut derivs = vec![pi];
        for j in 1..(2 * n).max(2) - 1 {
            let d = derivs[j - 1].derivative();
            derivs.push(d);
        }
        let f0 = initial_data(rt);
        let xi: Vec<f64> = (0..n.saturating_sub(1)).map(|j| (-1.0 / c).powi(j as i32 + 1) * f0[j]).collect();
        // m_i^{(d)} = (pi^{(i)} * k)^{(d)} for d <= n - 2
        let conv: Vec<Vec<ExpPoly>> = (0..n)
            .map(|i| {
                let mut v = vec![derivs[i].convolve(k)];
                for d in 1..n.saturating_sub(1) {
                    let next = v[d - 1].derivative();
                    v.push(next);
                }
                v
            })
            .collect();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let mut v = derivs[i + j].eval(b);
                for (l, xl) in xi.iter().enumerate().take(j) {
                    v -= xl * conv[i][j - l - 1].eval(b);
                }
                a[(j, i)] = v;
            }
        }
        let border = DVector::from_fn(n, |j, _| if j == 0 { -1.0 } else { xi[j - 1] });
        let (alpha, pivot) = solve_equilibrated(&a, &(-&border))?;
        derivs.truncate(n);
        Ok(ThetaAssembly { b, derivs, a, border, alpha, pivot })
    }

    pub fn order(&self) -> usize {
        self.derivs.len()
    }

    /// Normalised resolvent density with `pi^{(n-1)}(0) = 1`.
    pub fn pi(&self) -> &ExpPoly {
        &self.derivs[0]
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Smallest relative pivot of the equilibrated boundary matrix.
    pub fn pivot(&self) -> f64 {
        self.pivot
    }

    fn theta(&self, x: f64) -> DMatrix<f64> {
        let n = self.order();
        let mut t = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            t[(0, i + 1)] = self.derivs[i].eval(x);
        }
        for j in 0..n {
            t[(j + 1, 0)] = self.border[j];
            for i in 0..n {
                t[(j + 1, i + 1)] = self.a[(j, i)];
            }
        }
        t
    }

    /// `det Theta(x, b)` computed with row equilibration, as
    /// `(mantissa, log scale)`.
    pub fn det_theta(&self, x: f64) -> (f64, f64) {
        scaled_det(&self.theta(x))
    }

    /// `det A`, which equals `det Theta(b, b)`.
    pub fn det_boundary(&self) -> (f64, f64) {
        scaled_det(&self.a)
    }

    /// `det Theta(x, b) / det Theta(b, b)`.
    pub fn det_ratio(&self, x: f64) -> f64 {
        let (d1, l1) = self.det_theta(x);
        let (d0, l0) = self.det_boundary();
        d1 / d0 * (l1 - l0).exp()
    }

    /// The same ratio expanded as an exponential polynomial in `x`.
    pub fn solution(&self) -> ExpPoly {
        combine(&self.derivs, self.alpha.as_slice(), None)
    }
}

/// `particular + sum alpha_i f_i`.
pub(crate) fn combine(basis: &[ExpPoly], alpha: &[f64], particular: Option<&ExpPoly>) -> ExpPoly {
    let mut out = particular.cloned().unwrap_or_else(ExpPoly::zero);
    for (f, a) in basis.iter().zip(alpha) {
        out = out.add(&f.scale(*a));
    }
    out
}

/// Sum-of-exponentials arrivals with upward jumps that always clear `b`
/// (mass `p`) and negative exp-polynomial jumps `k`. Returns the solution
/// and the smallest relative pivot.
pub(crate) fn two_sided_upper(model: &ProcessModel, k: &ExpPoly, p: f64, b: f64) -> Result<(ExpPoly, f64)> {
    let c = model.drift();
    let rates = model
        .arrivals()
        .phases()
        .ok_or_else(|| EscapeError::RoutingMismatch("arrivals are not a sum of exponential phases".into()))?;
    let n = rates.len();
    let mut q = Poly::constant(1.0);
    for &l in rates {
        q = q.mul(&Poly::new(vec![l, 1.0]));
    }
    let q0: f64 = rates.iter().product();
    let (nk, dk) = transform(k);
    let den = q.compose_scale(-c).mul(&dk).sub(&nk.scale(q0));
    let pi = invert_rational(&dk, &den)?;
    let pi_m1 = pi.antiderivative_from_0();
    let mut derivs = vec![pi];
    for j in 1..(2 * n).max(2) - 1 {
        let d = derivs[j - 1].derivative();
        derivs.push(d);
    }
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for r in 0..n {
        for j in 0..n {
            a[(r, j)] = derivs[j + r].eval(b);
        }
        let prev = if r == 0 { pi_m1.eval(b) } else { derivs[r - 1].eval(b) };
        rhs[r] = if r == 0 { 1.0 } else { 0.0 } - p * q0 * prev;
    }
    let (alpha, pivot) = solve_equilibrated(&a, &rhs)?;
    let particular = pi_m1.scale(p * q0);
    Ok((combine(&derivs[..n], alpha.as_slice(), Some(&particular)), pivot))
}
