use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{EscapeError, Result};

/// Real polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Trailing (highest-order) exact zeros are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Poly::new(vec![0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn eval_c(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&0.0) + other.coeffs.get(i).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// `P(k s)` as a polynomial in `s`.
    pub fn compose_scale(&self, k: f64) -> Poly {
        let mut p = 1.0;
        Poly::new(
            self.coeffs
                .iter()
                .map(|c| {
                    let v = c * p;
                    p *= k;
                    v
                })
                .collect(),
        )
    }

    /// Sum of absolute coefficients weighted by powers of `|s|`; the natural
    /// scale for judging a residual `|P(s)|`.
    pub fn magnitude_at(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs())
    }

    /// Polynomial with the given roots (with multiplicity) times `lead`.
    /// The imaginary parts cancel when the roots come in conjugate pairs.
    pub fn from_roots(roots: &RootSet, lead: f64) -> Poly {
        let c = complex_from_roots(roots);
        Poly::new(c.iter().map(|z| z.re * lead).collect())
    }
}

pub(crate) fn complex_from_roots(roots: &RootSet) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in &roots.roots {
        for _ in 0..r.multiplicity {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, a) in c.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r.value;
            }
            c = next;
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Root>,
}

impl RootSet {
    pub fn degree(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn all_simple(&self) -> bool {
        self.roots.iter().all(|r| r.multiplicity == 1)
    }

    pub fn max_real_part(&self) -> f64 {
        self.roots.iter().map(|r| r.value.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Build from known real roots, merging exact duplicates.
    pub fn from_real(values: &[f64]) -> RootSet {
        let mut roots: Vec<Root> = Vec::new();
        for &v in values {
            match roots.iter_mut().find(|r| r.value.re == v) {
                Some(r) => r.multiplicity += 1,
                None => roots.push(Root { value: Complex64::new(v, 0.0), multiplicity: 1 }),
            }
        }
        RootSet { roots }
    }
}

fn eval_deriv_c(coeffs: &[f64], order: usize, s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in (order..coeffs.len()).rev() {
        let mut f = 1.0;
        for t in 0..order {
            f *= (k - t) as f64;
        }
        acc = acc * s + coeffs[k] * f;
    }
    acc
}

fn newton_polish(coeffs: &[f64], order: usize, mut z: Complex64, steps: usize) -> Complex64 {
    let mut fz = eval_deriv_c(coeffs, order, z).norm();
    for _ in 0..steps {
        let d = eval_deriv_c(coeffs, order + 1, z);
        if d.norm() == 0.0 {
            break;
        }
        let cand = z - eval_deriv_c(coeffs, order, z) / d;
        let fc = eval_deriv_c(coeffs, order, cand).norm();
        if fc.is_finite() && fc < fz {
            z = cand;
            fz = fc;
        } else {
            break;
        }
    }
    z
}

fn single_linkage(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        l[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut rep: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match rep.iter().position(|&x| x == r) {
            Some(p) => groups[p].push(i),
            None => {
                rep.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

fn merge_groups(coeffs: &[f64], values: &[Complex64], groups: &[Vec<usize>]) -> RootSet {
    let roots = groups
        .iter()
        .map(|g| {
            let mean = g.iter().map(|&i| values[i]).sum::<Complex64>() / g.len() as f64;
            let value = if g.len() > 1 { newton_polish(coeffs, g.len() - 1, mean, 4) } else { mean };
            Root { value, multiplicity: g.len() }
        })
        .collect();
    RootSet { roots }
}

/// Snap tiny imaginary parts to zero and force exact conjugate pairs.
fn symmetrize_roots(mut set: RootSet) -> RootSet {
    for r in set.roots.iter_mut() {
        if r.value.im.abs() <= 1e-12 * (1.0 + r.value.norm()) {
            r.value.im = 0.0;
        }
    }
    let n = set.roots.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        if paired[i] || set.roots[i].value.im <= 0.0 {
            continue;
        }
        let target = set.roots[i].value.conj();
        let best = (0..n)
            .filter(|&j| !paired[j] && j != i && set.roots[j].value.im < 0.0)
            .filter(|&j| set.roots[j].multiplicity == set.roots[i].multiplicity)
            .min_by(|&a, &b| {
                (set.roots[a].value - target)
                    .norm()
                    .partial_cmp(&(set.roots[b].value - target).norm())
                    .unwrap()
            });
        if let Some(j) = best {
            let avg = (set.roots[i].value + set.roots[j].value.conj()) * 0.5;
            set.roots[i].value = avg;
            set.roots[j].value = avg.conj();
            paired[i] = true;
            paired[j] = true;
        }
    }
    set.roots.sort_by(|a, b| {
        (a.value.re, a.value.im)
            .partial_cmp(&(b.value.re, b.value.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    set
}

/// All complex roots of a real polynomial (ascending coefficients).
///
/// Eigenvalues of the companion matrix, Newton polish, then clustering.
/// Roots closer than `1e-8 (1 + max|r|)` are always merged. Coarser clusters
/// (up to `1e-4` relative) are also merged when the polynomial rebuilt from
/// the merged roots still matches the input to `1e-11` relative, which is how
/// multiple roots blurred by eigenvalue perturbation get recognised.
pub fn poly_roots(coeffs: &[f64]) -> Result<RootSet> {
    let p = Poly::new(coeffs.to_vec());
    let n = p.degree();
    if n == 0 || !p.leading().is_finite() || p.leading() == 0.0 {
        return Err(EscapeError::DegenerateLeadingCoefficient);
    }
    let lead = p.leading();
    let monic: Vec<f64> = p.coeffs().iter().map(|c| c / lead).collect();
    let zeros = monic.iter().take_while(|&&c| c == 0.0).count();
    let reduced = &monic[zeros..];
    let m = reduced.len() - 1;

    let mut values: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); zeros];
    if m == 1 {
        values.push(Complex64::new(-reduced[0], 0.0));
    } else if m > 1 {
        let mut comp = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            comp[(i, m - 1)] = -reduced[i];
            if i + 1 < m {
                comp[(i + 1, i)] = 1.0;
            }
        }
        for z in comp.complex_eigenvalues().iter() {
            values.push(newton_polish(&monic, 0, *z, 3));
        }
    }

    let scale = 1.0 + values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let base_groups = single_linkage(&values, 1e-8 * scale);
    let mut best = merge_groups(&monic, &values, &base_groups);
    let mut best_count = base_groups.len();
    let norm1: f64 = monic.iter().map(|c| c.abs()).sum();
    for k in 1..=4 {
        let tol = 1e-8 * scale * 10f64.powi(k);
        let groups = single_linkage(&values, tol);
        if groups.len() >= best_count {
            continue;
        }
        let cand = merge_groups(&monic, &values, &groups);
        let rebuilt = complex_from_roots(&cand);
        let err = rebuilt
            .iter()
            .zip(monic.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if err <= 1e-11 * norm1 {
            best = cand;
            best_count = groups.len();
        }
    }
    Ok(symmetrize_roots(best))
}

/// Rational transform `R(s)/Q(s)` with real coefficients.
///
/// As a Laplace transform of an interarrival density the denominator must be
/// stable and `R(0) = Q(0)`; as a moment generating function of a two-sided
/// severity density the roots split across the imaginary axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransform {
    pub q: Poly,
    pub r: Poly,
}

impl RationalTransform {
    pub fn new(q: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let q = Poly::new(q);
        let r = Poly::new(r);
        if q.degree() == 0 || q.leading() == 0.0 {
            return Err(EscapeError::DegenerateLeadingCoefficient);
        }
        if !r.is_zero() && r.degree() >= q.degree() {
            return Err(EscapeError::InvalidParameter(format!(
                "numerator degree {} must be below denominator degree {}",
                r.degree(),
                q.degree()
            )));
        }
        if q.coeffs().iter().chain(r.coeffs()).any(|c| !c.is_finite()) {
            return Err(EscapeError::InvalidParameter("non-finite coefficient".into()));
        }
        let rt = RationalTransform { q, r };
        for root in rt.denominator_roots()?.roots {
            let scale = rt.r.magnitude_at(root.value).max(1e-300);
            if rt.r.eval_c(root.value).norm() <= 1e-9 * scale {
                return Err(EscapeError::InvalidParameter(format!(
                    "numerator and denominator share the root {}",
                    root.value
                )));
            }
        }
        Ok(rt)
    }

    pub fn order(&self) -> usize {
        self.q.degree()
    }

    pub fn denominator_roots(&self) -> Result<RootSet> {
        poly_roots(self.q.coeffs())
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.r.eval_c(s) / self.q.eval_c(s)
    }

    /// Check the conditions for being the Laplace transform of a density.
    pub fn validate_density_lt(&self) -> Result<()> {
        let a0 = self.q.coeffs()[0];
        let b0 = self.r.coeffs()[0];
        if (a0 - b0).abs() > 1e-9 * a0.abs().max(1.0) {
            return Err(EscapeError::MassNotOne(b0 / a0));
        }
        for root in self.denominator_roots()?.roots {
            if root.value.re >= 0.0 {
                return Err(EscapeError::UnstableRationalTransform(format!("{}", root.value)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_real(rs: &RootSet) -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = rs.roots.iter().map(|r| (r.value.re, r.multiplicity)).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    }

    #[test]
    fn simple_real_roots() {
        let rs = poly_roots(&[-1.0, 0.0, 1.0]).unwrap();
        let v = sorted_real(&rs);
        assert!((v[0].0 + 1.0).abs() < 1e-14 && (v[1].0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn double_root_is_merged() {
        let rs = poly_roots(&[9.0, 6.0, 1.0]).unwrap();
        assert_eq!(rs.roots.len(), 1);
        assert_eq!(rs.roots[0].multiplicity, 2);
        assert!((rs.roots[0].value.re + 3.0).abs() < 1e-12);
    }

    #[test]
    fn triple_root_is_merged() {
        // (s+2)^3
        let rs = poly_roots(&[8.0, 12.0, 6.0, 1.0]).unwrap();
        assert_eq!(rs.roots.len(), 1);
        assert_eq!(rs.roots[0].multiplicity, 3);
        assert!((rs.roots[0].value.re + 2.0).abs() < 1e-10);
    }

    #[test]
    fn golden_ratio_roots() {
        // s^2 - (2r - g)s + r(r - 2g) with r = g = 1 has roots (1 +- sqrt5)/2
        let rs = poly_roots(&[-1.0, -1.0, 1.0]).unwrap();
        let v = sorted_real(&rs);
        let s5 = 5f64.sqrt();
        assert!((v[0].0 - (1.0 - s5) / 2.0).abs() < 1e-12);
        assert!((v[1].0 - (1.0 + s5) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_pairs_are_exact() {
        // (s^2 + 2s + 5)(s + 1)
        let rs = poly_roots(&[5.0, 7.0, 3.0, 1.0]).unwrap();
        let cplx: Vec<_> = rs.roots.iter().filter(|r| r.value.im != 0.0).collect();
        assert_eq!(cplx.len(), 2);
        assert_eq!(cplx[0].value, cplx[1].value.conj());
    }

    #[test]
    fn zero_roots_are_exact() {
        let rs = poly_roots(&[0.0, -1.0, -1.0, 1.0]).unwrap();
        assert!(rs.roots.iter().any(|r| r.value == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn degenerate_polynomial_rejected() {
        assert_eq!(poly_roots(&[1.0]), Err(EscapeError::DegenerateLeadingCoefficient));
    }

    #[test]
    fn unstable_transform_rejected() {
        // Q = (s - 1)(s + 2)
        let rt = RationalTransform::new(vec![-2.0, 1.0, 1.0], vec![-2.0]).unwrap();
        assert!(matches!(rt.validate_density_lt(), Err(EscapeError::UnstableRationalTransform(_))));
    }
}
