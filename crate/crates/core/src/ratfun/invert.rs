use num_complex::Complex64;

use super::exppoly::{factorial, ExpPoly, Term};
use super::poly::{poly_roots, Poly, RationalTransform, RootSet};
use crate::error::{EscapeError, Result};

/// Taylor coefficients of `p` at `r`, orders `0..count`.
fn taylor_at(p: &Poly, r: Complex64, count: usize) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = p.coeffs().iter().map(|&a| Complex64::new(a, 0.0)).collect();
    let mut out = Vec::with_capacity(count);
    // repeated synthetic division by (s - r)
    for _ in 0..count {
        if c.is_empty() {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let n = c.len();
        let mut q = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (0..n).rev() {
            acc = acc * r + c[k];
            if k > 0 {
                q[k - 1] = acc;
            }
        }
        out.push(acc);
        c = q;
    }
    out
}

fn series_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..(n - i) {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Inverse Laplace transform of `num/den` by partial fractions, using an
/// already known factorisation `den = lead * prod (s - r)^mu`.
pub fn invert_with_roots(num: &Poly, lead: f64, roots: &RootSet) -> Result<ExpPoly> {
    if !num.is_zero() && num.degree() >= roots.degree() {
        return Err(EscapeError::InvalidParameter(format!(
            "improper rational function: numerator degree {} vs denominator degree {}",
            num.degree(),
            roots.degree()
        )));
    }
    let mut terms = Vec::new();
    for (idx, root) in roots.roots.iter().enumerate() {
        let r = root.value;
        let mu = root.multiplicity;
        // g(s) = num(s) / (lead prod_{other} (s - r_o)^mu_o), expanded at r
        let mut series = taylor_at(num, r, mu);
        for (jdx, other) in roots.roots.iter().enumerate() {
            if jdx == idx {
                continue;
            }
            let d = r - other.value;
            let m = other.multiplicity as i32;
            // (d + t)^{-m} = d^{-m} sum_i binom(-m, i) (t/d)^i
            let mut factor = Vec::with_capacity(mu);
            let mut coef = d.powi(-m);
            for i in 0..mu {
                factor.push(coef);
                coef = coef * (-(m + i as i32) as f64) / ((i + 1) as f64) / d;
            }
            series = series_mul(&series, &factor);
        }
        for j in 1..=mu {
            let a = series[mu - j] / lead;
            terms.push(Term::new(a / factorial(j as u32 - 1), r, j as u32 - 1));
        }
    }
    Ok(ExpPoly::new(terms))
}

/// Inverse Laplace transform of the proper rational function `num/den`.
pub fn invert_rational(num: &Poly, den: &Poly) -> Result<ExpPoly> {
    let roots = poly_roots(den.coeffs())?;
    invert_with_roots(num, den.leading(), &roots)
}

/// Derivatives `f^{(k)}(0+)`, `k = 0..n-1`, of the density whose Laplace
/// transform is `R/Q`, from the triangular system
/// `sum_{k=0}^{n-j-1} a_{j+k+1} f^{(k)}(0) = b_j`.
pub fn initial_data(rt: &RationalTransform) -> Vec<f64> {
    let n = rt.order();
    let a = rt.q.coeffs();
    let b = |j: usize| rt.r.coeffs().get(j).copied().unwrap_or(0.0);
    let mut f = vec![0.0; n];
    for k in 0..n {
        // equation j = n - 1 - k determines f^{(k)}
        let j = n - 1 - k;
        let mut rhs = b(j);
        for (l, fl) in f.iter().enumerate().take(k) {
            rhs -= a[j + l + 1] * fl;
        }
        f[k] = rhs / a[n];
    }
    f
}
