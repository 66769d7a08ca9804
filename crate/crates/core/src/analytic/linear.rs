use nalgebra::{DMatrix, DVector};

use crate::error::{EscapeError, Result};

/// Relative pivot below which a boundary system counts as singular.
pub(crate) const PIVOT_FLOOR: f64 = 1e-12;

/// Solves `A alpha = rhs` after scaling each row to unit max-norm.
/// Returns the solution and the smallest relative pivot.
pub(crate) fn solve_equilibrated(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = a.nrows();
    let mut a = a.clone();
    let mut rhs = rhs.clone();
    for i in 0..n {
        let s = a.row(i).amax();
        if s > 0.0 && s.is_finite() {
            a.row_mut(i).scale_mut(1.0 / s);
            rhs[i] /= s;
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(EscapeError::NonFinite("boundary system".into()));
    }
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio >= PIVOT_FLOOR) {
        return Err(EscapeError::SingularThetaAtB(ratio));
    }
    let x = lu.solve(&rhs).ok_or(EscapeError::SingularThetaAtB(ratio))?;
    Ok((x, ratio))
}

/// Determinant with row equilibration; returns `(det of scaled matrix, log
/// of the product of the scales)`.
pub(crate) fn scaled_det(a: &DMatrix<f64>) -> (f64, f64) {
    let mut a = a.clone();
    let mut log_scale = 0.0;
    for i in 0..a.nrows() {
        let s = a.row(i).amax();
        if s > 0.0 {
            a.row_mut(i).scale_mut(1.0 / s);
            log_scale += s.ln();
        }
    }
    (a.determinant(), log_scale)
}
