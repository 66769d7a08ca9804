use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{EscapeError, Result};

/// Numerical inverse Laplace transform on a fixed cotangent contour
/// `s = sigma + z(theta)/x` with `z = N(0.5017 theta cot(0.6407 theta)
/// - 0.6122 + 0.2645 i theta)` and `nodes` midpoint nodes in `theta`.
///
/// `sigma` must bound the real parts of all singularities of `g`.
pub fn bromwich_invert<F>(g: F, x: f64, nodes: usize, sigma: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(x > 0.0) {
        return Err(EscapeError::InvalidParameter(format!("inversion point must be positive, got {x}")));
    }
    let n = nodes.max(4) as f64;
    let h = 2.0 * PI / n;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..nodes.max(4) {
        let theta = -PI + (k as f64 + 0.5) * h;
        let (z, dz) = contour(theta, n);
        let s = sigma + z / x;
        let gs = g(s);
        if !gs.re.is_finite() || !gs.im.is_finite() {
            return Err(EscapeError::NonFinite(format!("{s}")));
        }
        acc += (s * x).exp() * gs * dz;
    }
    let v = (acc * h / (2.0 * PI * x) / Complex64::new(0.0, 1.0)).re;
    if !v.is_finite() {
        return Err(EscapeError::NonFinite("sum".into()));
    }
    Ok(v)
}

fn contour(theta: f64, n: f64) -> (Complex64, Complex64) {
    let (a, b, c, d) = (0.5017, 0.6407, 0.6122, 0.2645);
    if theta == 0.0 {
        return (Complex64::new(n * (a / b - c), 0.0), Complex64::new(0.0, n * d));
    }
    let cot = 1.0 / (b * theta).tan();
    let z = Complex64::new(n * (a * theta * cot - c), n * d * theta);
    let sin = (b * theta).sin();
    let dz = Complex64::new(n * (a * cot - a * b * theta / (sin * sin)), n * d);
    (z, dz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_pairs() {
        let v = bromwich_invert(|s| 1.0 / (s + 1.0), 1.0, 48, 0.0).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-10);
        let v = bromwich_invert(|s| 1.0 / (s * s), 2.0, 48, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn growing_function_with_shift() {
        let v = bromwich_invert(|s| 1.0 / (s - 0.5), 2.0, 48, 0.5).unwrap();
        assert!((v - 1f64.exp()).abs() < 1e-10);
    }
}
