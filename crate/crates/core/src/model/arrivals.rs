use num_complex::Complex64;
use rand::Rng;
use std::fmt;
use std::sync::Arc;

use crate::error::{EscapeError, Result};
use crate::quad;
use crate::ratfun::{invert_rational, invert_with_roots, ExpPoly, Poly, RationalTransform, RootSet};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied interarrival law given by density and cdf on `[0, support_end]`.
#[derive(Clone)]
pub struct GenericArrival {
    pub density: ScalarFn,
    pub cdf: ScalarFn,
    pub support_end: f64,
}

impl fmt::Debug for GenericArrival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericArrival").field("support_end", &self.support_end).finish()
    }
}

/// Interarrival-time law.
#[derive(Clone, Debug)]
pub enum ArrivalSpec {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Hypoexponential { rates: Vec<f64> },
    RationalLT(RationalTransform),
    Generic(GenericArrival),
}

impl ArrivalSpec {
    /// Mixture `p Exp(l1) + (1 - p) Exp(l2)` as a rational transform.
    pub fn hyperexponential(p: f64, l1: f64, l2: f64) -> Result<ArrivalSpec> {
        if !(0.0..=1.0).contains(&p) {
            return Err(EscapeError::InvalidParameter(format!("mixing weight {p} outside [0, 1]")));
        }
        for l in [l1, l2] {
            if !(l > 0.0 && l.is_finite()) {
                return Err(EscapeError::NonPositiveRate(l));
            }
        }
        let q = vec![l1 * l2, l1 + l2, 1.0];
        let r = vec![l1 * l2, p * l1 + (1.0 - p) * l2];
        Ok(ArrivalSpec::RationalLT(RationalTransform::new(q, r)?))
    }
}

#[derive(Debug)]
struct RationalArrival {
    transform: RationalTransform,
    density: ExpPoly,
    tail: ExpPoly,
    // int_t^inf s f(s) ds
    tail_moment: ExpPoly,
    mean: f64,
    // exponential phases when the law is a sum of exponentials
    phases: Option<Vec<f64>>,
}

#[derive(Debug)]
enum Kind {
    Rational(RationalArrival),
    Generic(GenericArrival, f64),
}

/// Validated interarrival law with the evaluators every solver needs.
#[derive(Debug)]
pub struct ArrivalLaw {
    spec: ArrivalSpec,
    kind: Kind,
}

fn check_rate(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(EscapeError::NonPositiveRate(l))
    }
}

fn from_phases(rates: &[f64]) -> Result<RationalArrival> {
    for &l in rates {
        check_rate(l)?;
    }
    if rates.is_empty() {
        return Err(EscapeError::InvalidParameter("hypoexponential law needs at least one rate".into()));
    }
    let mut q = Poly::constant(1.0);
    let mut r0 = 1.0;
    for &l in rates {
        q = q.mul(&Poly::new(vec![l, 1.0]));
        r0 *= l;
    }
    let roots = RootSet::from_real(&rates.iter().map(|l| -l).collect::<Vec<_>>());
    let density = invert_with_roots(&Poly::constant(r0), 1.0, &roots)?;
    let transform = RationalTransform { q, r: Poly::constant(r0) };
    Ok(finish_rational(transform, density, Some(rates.to_vec())))
}

fn finish_rational(transform: RationalTransform, density: ExpPoly, phases: Option<Vec<f64>>) -> RationalArrival {
    let tail = density.tail();
    let tail_moment = density.mul_x().tail();
    let mean = tail_moment.eval(0.0);
    RationalArrival { transform, density, tail, tail_moment, mean, phases }
}

impl ArrivalLaw {
    pub fn new(spec: ArrivalSpec) -> Result<Self> {
        let kind = match &spec {
            ArrivalSpec::Exponential { rate } => Kind::Rational(from_phases(&[*rate])?),
            ArrivalSpec::Erlang { shape, rate } => {
                if *shape == 0 {
                    return Err(EscapeError::InvalidParameter("Erlang shape must be at least 1".into()));
                }
                Kind::Rational(from_phases(&vec![*rate; *shape as usize])?)
            }
            ArrivalSpec::Hypoexponential { rates } => {
                let mut sorted = rates.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                Kind::Rational(from_phases(&sorted)?)
            }
            ArrivalSpec::RationalLT(rt) => {
                if rt.r.is_zero() {
                    return Err(EscapeError::MassNotOne(0.0));
                }
                rt.validate_density_lt()?;
                let density = invert_rational(&rt.r, &rt.q)?;
                let law = finish_rational(rt.clone(), density, None);
                let horizon = 60.0 * law.mean.max(1e-12);
                for i in 1..=400 {
                    let t = horizon * i as f64 / 400.0;
                    if law.density.eval(t) < -1e-9 {
                        return Err(EscapeError::InvalidParameter(format!(
                            "rational transform is not a density: negative at t = {t}"
                        )));
                    }
                }
                Kind::Rational(law)
            }
            ArrivalSpec::Generic(g) => {
                if !(g.support_end > 0.0 && g.support_end.is_finite()) {
                    return Err(EscapeError::InvalidParameter("generic support must be a finite positive bound".into()));
                }
                let d = g.density.clone();
                let mass = quad::integrate(|t| d(t), 0.0, g.support_end, 2000);
                if (mass - 1.0).abs() > 1e-6 {
                    return Err(EscapeError::MassNotOne(mass));
                }
                let mean = quad::integrate(|t| t * d(t), 0.0, g.support_end, 2000);
                Kind::Generic(g.clone(), mean)
            }
        };
        Ok(ArrivalLaw { spec, kind })
    }

    pub fn spec(&self) -> &ArrivalSpec {
        &self.spec
    }

    /// Rate of an exponential law.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.spec {
            ArrivalSpec::Exponential { rate } => Some(rate),
            _ => None,
        }
    }

    /// Exponential phases of an Exponential, Erlang or Hypoexponential law.
    pub fn phases(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Rational(r) => r.phases.as_deref(),
            _ => None,
        }
    }

    pub fn transform(&self) -> Option<&RationalTransform> {
        match &self.kind {
            Kind::Rational(r) => Some(&r.transform),
            _ => None,
        }
    }

    pub fn density_exppoly(&self) -> Option<&ExpPoly> {
        match &self.kind {
            Kind::Rational(r) => Some(&r.density),
            _ => None,
        }
    }

    /// Laplace transform `E e^{-s tau}` when it is rational.
    pub fn laplace(&self, s: Complex64) -> Option<Complex64> {
        self.transform().map(|rt| rt.eval(s))
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Rational(r) => r.mean,
            Kind::Generic(_, m) => *m,
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Rational(r) => r.density.eval(t),
            Kind::Generic(g, _) => {
                if t > g.support_end {
                    0.0
                } else {
                    (g.density)(t)
                }
            }
        }
    }

    /// `P(tau > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            Kind::Rational(r) => match self.spec {
                ArrivalSpec::Exponential { rate } => (-rate * t).exp(),
                _ => r.tail.eval(t).clamp(0.0, 1.0),
            },
            Kind::Generic(g, _) => {
                if t >= g.support_end {
                    0.0
                } else {
                    (1.0 - (g.cdf)(t)).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// `P(tau <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.tail(t)
    }

    /// `E[tau; tau > t]`.
    pub fn tail_moment(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.kind {
            Kind::Rational(r) => r.tail_moment.eval(t),
            Kind::Generic(g, _) => {
                let d = g.density.clone();
                let hi = g.support_end;
                if t >= hi {
                    return 0.0;
                }
                let panels = ((hi - t) / hi * 400.0).ceil().max(1.0) as usize;
                quad::integrate(|s| s * d(s), t, hi, panels)
            }
        }
    }

    /// Mass and first moment of the law on `(t0, t1]`.
    pub fn cell_moments(&self, t0: f64, t1: f64) -> (f64, f64) {
        match &self.kind {
            Kind::Rational(_) => {
                (self.tail(t0) - self.tail(t1), self.tail_moment(t0) - self.tail_moment(t1))
            }
            Kind::Generic(g, _) => {
                let lo = t0.max(0.0);
                let hi = t1.min(g.support_end);
                if hi <= lo {
                    return (0.0, 0.0);
                }
                let d = g.density.clone();
                (self.tail(t0) - self.tail(t1), quad::integrate(|s| s * d(s), lo, hi, 1))
            }
        }
    }

    /// Support bound beyond which the tail is below `eps`.
    pub fn effective_horizon(&self, eps: f64) -> f64 {
        if let Kind::Generic(g, _) = &self.kind {
            return g.support_end;
        }
        let mut t = self.mean().max(1e-12);
        while self.tail(t) > eps && t < 1e12 {
            t *= 2.0;
        }
        t
    }

    fn solve_tail(&self, target_tail: f64, from: f64) -> f64 {
        // smallest t >= from with tail(t) <= target, safeguarded Newton
        let mut lo = from;
        let mut hi = from + self.mean().max(1e-12);
        while self.tail(hi) > target_tail {
            lo = hi;
            hi = from + 2.0 * (hi - from);
            if hi > 1e15 {
                return hi;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.tail(t) - target_tail;
            if g > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let f = self.density(t);
            let newton = if f > 0.0 { t + g / f } else { f64::NAN };
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi.max(1.0) || g.abs() <= 1e-16 * target_tail {
                break;
            }
        }
        t
    }

    /// Draw one interarrival time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let Some(phases) = self.phases() {
            return phases.iter().map(|l| -(1.0 - rng.random::<f64>()).ln() / l).sum();
        }
        let u = 1.0 - rng.random::<f64>();
        self.solve_tail(u, 0.0)
    }

    /// Draw the time to the next arrival given that `z` has elapsed since the
    /// last one: inverse of `t -> tail(z + t)/tail(z)`.
    pub fn sample_residual<R: Rng + ?Sized>(&self, z: f64, rng: &mut R) -> Result<f64> {
        if z <= 0.0 || self.exponential_rate().is_some() {
            return Ok(self.sample(rng));
        }
        let tz = self.tail(z);
        if tz < 1e-300 {
            return Err(EscapeError::TailUnderflow(z));
        }
        let u = 1.0 - rng.random::<f64>();
        Ok((self.solve_tail(u * tz, z) - z).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn erlang_tail_and_mean() {
        let law = ArrivalLaw::new(ArrivalSpec::Erlang { shape: 2, rate: 1.0 }).unwrap();
        let t = 1.3f64;
        assert!((law.tail(t) - (1.0 + t) * (-t).exp()).abs() < 1e-15);
        assert!((law.mean() - 2.0).abs() < 1e-14);
        let (m, p) = law.cell_moments(0.0, 1e3);
        assert!((m - 1.0).abs() < 1e-14 && (p - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hyperexponential_density() {
        let spec = ArrivalSpec::hyperexponential(0.3, 1.0, 2.0).unwrap();
        let law = ArrivalLaw::new(spec).unwrap();
        let t = 0.4f64;
        let expect = 0.3 * (-t).exp() + 0.7 * 2.0 * (-2.0 * t).exp();
        assert!((law.density(t) - expect).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_rates() {
        assert_eq!(
            ArrivalLaw::new(ArrivalSpec::Exponential { rate: 0.0 }).unwrap_err(),
            EscapeError::NonPositiveRate(0.0)
        );
    }

    #[test]
    fn residual_sampling_matches_conditional_tail() {
        let law = ArrivalLaw::new(ArrivalSpec::RationalLT(
            RationalTransform::new(vec![1.0, 2.0, 1.0], vec![1.0]).unwrap(),
        ))
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 20000;
        let z = 1.0;
        let hits = (0..n).filter(|_| law.sample_residual(z, &mut rng).unwrap() > 0.5).count();
        let expect = law.tail(1.5) / law.tail(1.0);
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!(((hits as f64 / n as f64) - expect).abs() < 4.0 * se);
    }
}
