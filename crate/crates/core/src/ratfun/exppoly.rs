use num_complex::Complex64;

use super::poly::Poly;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// One term `coef (x - shift)^power e^{rate (x - shift)}`.
///
/// A zero shift means the term is valid on the whole line; a positive shift
/// multiplies it by the unit step at `shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: Complex64,
    pub rate: Complex64,
    pub power: u32,
    pub shift: f64,
}

impl Term {
    pub fn new(coef: Complex64, rate: Complex64, power: u32) -> Self {
        Term { coef, rate, power, shift: 0.0 }
    }

    pub fn real(coef: f64, rate: f64, power: u32) -> Self {
        Term::new(Complex64::new(coef, 0.0), Complex64::new(rate, 0.0), power)
    }

    fn eval(&self, x: f64) -> Complex64 {
        if self.shift > 0.0 && x < self.shift {
            return ZERO;
        }
        let u = x - self.shift;
        self.coef * u.powi(self.power as i32) * (self.rate * u).exp()
    }

    fn with(&self, coef: Complex64, power: u32) -> Term {
        Term { coef, rate: self.rate, power, shift: self.shift }
    }
}

/// Exponential polynomial `sum c x^k e^{s x}` with complex coefficients and
/// rates, plus optional step-shifted terms.
///
/// Every constructor and operation symmetrizes over complex conjugation and
/// merges duplicate terms, so evaluation is real up to rounding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpPoly {
    terms: Vec<Term>,
}

impl ExpPoly {
    pub fn new(terms: Vec<Term>) -> Self {
        let mut e = ExpPoly { terms };
        e.symmetrize();
        e
    }

    pub fn zero() -> Self {
        ExpPoly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        ExpPoly::new(vec![Term::real(c, 0.0, 0)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_shifts(&self) -> bool {
        self.terms.iter().any(|t| t.shift > 0.0)
    }

    fn symmetrize(&mut self) {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len() * 2);
        let mut push = |t: Term| {
            if t.coef == ZERO {
                return;
            }
            match out
                .iter_mut()
                .find(|o| o.rate == t.rate && o.power == t.power && o.shift == t.shift)
            {
                Some(o) => o.coef += t.coef,
                None => out.push(t),
            }
        };
        for t in &self.terms {
            if t.rate.im == 0.0 {
                push(Term { coef: Complex64::new(t.coef.re, 0.0), ..*t });
            } else {
                push(Term { coef: t.coef * 0.5, ..*t });
                push(Term { coef: t.coef.conj() * 0.5, rate: t.rate.conj(), ..*t });
            }
        }
        out.retain(|t| t.coef != ZERO);
        self.terms = out;
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_complex(x).re
    }

    pub fn eval_complex(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Sum of the moduli of the individual terms at `x`; compared with
    /// `|eval(x)|` it measures cancellation.
    pub fn eval_abs_sum(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x).norm()).sum()
    }

    pub fn scale(&self, k: f64) -> ExpPoly {
        ExpPoly::new(self.terms.iter().map(|t| Term { coef: t.coef * k, ..*t }).collect())
    }

    pub fn add(&self, other: &ExpPoly) -> ExpPoly {
        ExpPoly::new(self.terms.iter().chain(other.terms.iter()).copied().collect())
    }

    pub fn sub(&self, other: &ExpPoly) -> ExpPoly {
        self.add(&other.scale(-1.0))
    }

    /// `f(x - theta) 1{x >= theta}` for `theta >= 0`.
    pub fn shifted(&self, theta: f64) -> ExpPoly {
        assert!(theta >= 0.0, "shift must be nonnegative");
        ExpPoly::new(self.terms.iter().map(|t| Term { shift: t.shift + theta, ..*t }).collect())
    }

    pub fn derivative(&self) -> ExpPoly {
        let mut out = Vec::with_capacity(self.terms.len() * 2);
        for t in &self.terms {
            if t.power > 0 {
                out.push(t.with(t.coef * t.power as f64, t.power - 1));
            }
            out.push(t.with(t.coef * t.rate, t.power));
        }
        ExpPoly::new(out)
    }

    pub fn nth_derivative(&self, order: usize) -> ExpPoly {
        (0..order).fold(self.clone(), |f, _| f.derivative())
    }

    /// `x f(x)`.
    pub fn mul_x(&self) -> ExpPoly {
        let mut out = Vec::with_capacity(self.terms.len() * 2);
        for t in &self.terms {
            out.push(t.with(t.coef, t.power + 1));
            if t.shift > 0.0 {
                out.push(t.with(t.coef * t.shift, t.power));
            }
        }
        ExpPoly::new(out)
    }

    /// Terms of `int_0^u v^k e^{s v} dv` for a single unshifted term with
    /// `s != 0`, without the constant of integration, plus that constant.
    fn primitive(t: &Term) -> (Vec<Term>, Complex64) {
        let k = t.power;
        if t.rate == ZERO {
            let term = Term { coef: t.coef / (k + 1) as f64, rate: ZERO, power: k + 1, shift: t.shift };
            return (vec![term], ZERO);
        }
        let kf = factorial(k);
        let mut terms = Vec::with_capacity(k as usize + 1);
        for l in 0..=k {
            let sign = if (k - l).is_multiple_of(2) { 1.0 } else { -1.0 };
            let c = t.coef * sign * kf / factorial(l) / t.rate.powi((k - l + 1) as i32);
            terms.push(t.with(c, l));
        }
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let constant = -t.coef * sign * kf / t.rate.powi(k as i32 + 1);
        (terms, constant)
    }

    /// `int_0^x f`.
    pub fn antiderivative_from_0(&self) -> ExpPoly {
        let mut out = Vec::new();
        for t in &self.terms {
            let (terms, c) = Self::primitive(t);
            out.extend(terms);
            if c != ZERO {
                out.push(Term { coef: c, rate: ZERO, power: 0, shift: t.shift });
            }
        }
        ExpPoly::new(out)
    }

    /// `int_x^inf f` for unshifted functions whose rates all have negative
    /// real part.
    pub fn tail(&self) -> ExpPoly {
        let mut out = Vec::new();
        for t in &self.terms {
            debug_assert!(t.shift == 0.0 && t.rate.re < 0.0, "tail needs decaying unshifted terms");
            let (terms, _) = Self::primitive(t);
            out.extend(terms.into_iter().map(|u| Term { coef: -u.coef, ..u }));
        }
        ExpPoly::new(out)
    }

    /// `int_0^inf f` for unshifted decaying functions.
    pub fn integral_to_infinity(&self) -> f64 {
        self.tail().eval(0.0)
    }

    /// `(f * g)(x) = int_0^x f(z) g(x - z) dz`, both supported on `[0, inf)`.
    pub fn convolve(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = Vec::new();
        for f in &self.terms {
            for g in &other.terms {
                let shift = f.shift + g.shift;
                for mut t in convolve_terms(f, g) {
                    t.shift = shift;
                    out.push(t);
                }
            }
        }
        ExpPoly::new(out)
    }

    /// Laplace transform at complex `s`.
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef * factorial(t.power) / (s - t.rate).powi(t.power as i32 + 1) * (-s * t.shift).exp()
            })
            .sum()
    }

    /// Laplace transform as `num/den` with `den` monic; unshifted only.
    pub fn laplace_rational(&self) -> (Poly, Poly) {
        assert!(!self.has_shifts(), "shifted terms have no rational transform");
        let mut poles: Vec<(Complex64, u32)> = Vec::new();
        for t in &self.terms {
            match poles.iter_mut().find(|p| p.0 == t.rate) {
                Some(p) => p.1 = p.1.max(t.power + 1),
                None => poles.push((t.rate, t.power + 1)),
            }
        }
        let linear = |r: Complex64| vec![-r, Complex64::new(1.0, 0.0)];
        let mut den = vec![Complex64::new(1.0, 0.0)];
        for &(r, mu) in &poles {
            for _ in 0..mu {
                den = cmul(&den, &linear(r));
            }
        }
        let mut num = vec![ZERO];
        for t in &self.terms {
            let mut part = vec![Complex64::new(t.coef.re, t.coef.im) * factorial(t.power)];
            for &(r, mu) in &poles {
                let reps = if r == t.rate { mu - (t.power + 1) } else { mu };
                for _ in 0..reps {
                    part = cmul(&part, &linear(r));
                }
            }
            num = cadd(&num, &part);
        }
        (
            Poly::new(num.iter().map(|z| z.re).collect()),
            Poly::new(den.iter().map(|z| z.re).collect()),
        )
    }
}

fn cmul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn cadd(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(ZERO) + b.get(i).copied().unwrap_or(ZERO))
        .collect()
}

fn convolve_terms(f: &Term, g: &Term) -> Vec<Term> {
    let (a, b) = (f.rate, g.rate);
    let (j, k) = (f.power, g.power);
    let c = f.coef * g.coef;
    let scale = 1.0 + a.norm() + b.norm();
    if (a - b).norm() <= 1e-12 * scale {
        let w = factorial(j) * factorial(k) / factorial(j + k + 1);
        return vec![Term::new(c * w, a, j + k + 1)];
    }
    // e^{bx} int_0^x z^j (x - z)^k e^{dz} dz with d = a - b
    let d = a - b;
    let mut out = Vec::new();
    for i in 0..=k {
        let outer = c * binomial(k, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
        let m = j + i;
        let mf = factorial(m);
        for l in 0..=m {
            let sign = if (m - l) % 2 == 0 { 1.0 } else { -1.0 };
            let w = outer * sign * mf / factorial(l) / d.powi((m - l + 1) as i32);
            out.push(Term::new(w, a, k - i + l));
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let w = -outer * sign * mf / d.powi(m as i32 + 1);
        out.push(Term::new(w, b, k - i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn derivative_of_exponential() {
        let f = ExpPoly::new(vec![Term::real(1.0, 0.7, 0)]);
        let d = f.derivative();
        assert!((d.eval(1.3) - 0.7 * (0.7f64 * 1.3).exp()).abs() < 1e-14);
    }

    #[test]
    fn convolution_of_distinct_exponentials() {
        let f = ExpPoly::new(vec![Term::real(1.0, -1.0, 0)]);
        let g = ExpPoly::new(vec![Term::real(1.0, -3.0, 0)]);
        let h = f.convolve(&g);
        let x = 0.8f64;
        let expect = ((-x).exp() - (-3.0 * x).exp()) / 2.0;
        assert!((h.eval(x) - expect).abs() < 1e-14);
    }

    #[test]
    fn convolution_with_equal_rates() {
        // e^{-x} * x e^{-x} = x^2/2 e^{-x}
        let f = ExpPoly::new(vec![Term::real(1.0, -1.0, 0)]);
        let g = ExpPoly::new(vec![Term::real(1.0, -1.0, 1)]);
        let x = 1.7f64;
        assert!((f.convolve(&g).eval(x) - x * x / 2.0 * (-x).exp()).abs() < 1e-14);
    }

    #[test]
    fn convolution_matches_quadrature() {
        let f = ExpPoly::new(vec![Term::new(c(0.5, 0.2), c(-0.3, 1.1), 1), Term::real(0.4, 0.2, 0)]);
        let g = ExpPoly::new(vec![Term::real(2.0, -1.5, 2)]);
        let x = 2.3;
        let n = 20000;
        let h = x / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let z = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * f.eval(z) * g.eval(x - z);
        }
        acc *= h;
        assert!((f.convolve(&g).eval(x) - acc).abs() < 1e-7);
    }

    #[test]
    fn antiderivative_and_tail() {
        let f = ExpPoly::new(vec![Term::real(3.0, -2.0, 2)]);
        let big_f = f.antiderivative_from_0();
        assert!(big_f.eval(0.0).abs() < 1e-15);
        let total = f.integral_to_infinity();
        // int 3 x^2 e^{-2x} = 3 * 2 / 8
        assert!((total - 0.75).abs() < 1e-14);
        let x = 0.9;
        assert!((big_f.eval(x) + f.tail().eval(x) - total).abs() < 1e-14);
    }

    #[test]
    fn shifted_terms() {
        let f = ExpPoly::new(vec![Term::real(1.0, 0.5, 1)]).shifted(1.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert!((f.eval(2.0) - 1.0 * 0.5f64.exp()).abs() < 1e-15);
        let a = f.antiderivative_from_0();
        assert_eq!(a.eval(0.9), 0.0);
        // int_1^2 (x-1) e^{(x-1)/2} dx = int_0^1 u e^{u/2} du
        let expect = 2.0 * 0.5f64.exp() - 4.0 * (0.5f64.exp() - 1.0);
        assert!((a.eval(2.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn conjugate_symmetry_gives_real_values() {
        let f = ExpPoly::new(vec![Term::new(c(1.0, 2.0), c(-0.5, 3.0), 0)]);
        assert_eq!(f.terms().len(), 2);
        let v = f.eval_complex(0.77);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn laplace_round_trip() {
        let f = ExpPoly::new(vec![Term::real(2.0, -1.0, 0), Term::real(-0.5, -3.0, 1)]);
        let (num, den) = f.laplace_rational();
        for s in [0.3, 1.0, 4.5] {
            let direct = f.laplace(c(s, 0.0)).re;
            assert!((num.eval(s) / den.eval(s) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn mul_x_on_shifted() {
        let f = ExpPoly::new(vec![Term::real(1.0, -1.0, 0)]).shifted(0.5);
        let g = f.mul_x();
        assert!((g.eval(2.0) - 2.0 * (-1.5f64).exp()).abs() < 1e-15);
    }
}
