use rand::Rng;
use statrs::function::erf::{erf, erf_inv, erfc};
use std::f64::consts::PI;
use std::fmt;

use super::arrivals::ScalarFn;
use crate::error::{EscapeError, Result};
use crate::quad;
use crate::ratfun::{invert_with_roots, poly_roots, ExpPoly, Poly, RationalTransform, Term};

/// Point mass of the jump law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// User-supplied jump density with its cdf, supported on `support`.
#[derive(Clone)]
pub struct GenericJumpDensity {
    pub density: ScalarFn,
    pub cdf: ScalarFn,
    pub support: (f64, f64),
}

impl fmt::Debug for GenericJumpDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericJumpDensity").field("support", &self.support).finish()
    }
}

/// Absolutely continuous part of the jump law, normalised to unit mass.
///
/// `DoubleExponential` has density `p g+ e^{-g+ (y - shift_pos)}` on
/// `y >= shift_pos` and `(1 - p) g- e^{g- (y - shift_neg)}` on `y <= shift_neg`.
/// `RationalCf` holds the moment generating function `E e^{sJ} = R(s)/Q(s)`.
#[derive(Clone, Debug)]
pub enum JumpDensity {
    ExponentialNegative { rate: f64 },
    DoubleExponential { p: f64, rate_pos: f64, rate_neg: f64, shift_pos: f64, shift_neg: f64 },
    Laplace { rate: f64 },
    GammaHalfNegative { rate: f64 },
    RationalCf(RationalTransform),
    Generic(GenericJumpDensity),
    /// Law of `-J` for `J` distributed as the inner density.
    Reflected(Box<JumpDensity>),
}

impl JumpDensity {
    /// Double-exponential law whose shifts are multiples `eps` of the
    /// interval width.
    pub fn double_exponential_scaled(
        p: f64,
        rate_pos: f64,
        rate_neg: f64,
        eps_pos: f64,
        eps_neg: f64,
        width: f64,
    ) -> JumpDensity {
        JumpDensity::DoubleExponential {
            p,
            rate_pos,
            rate_neg,
            shift_pos: eps_pos * width,
            shift_neg: eps_neg * width,
        }
    }

    /// Density of `-J`, expressed through a named family when possible.
    pub fn reflect(&self) -> JumpDensity {
        match self {
            JumpDensity::ExponentialNegative { rate } => JumpDensity::DoubleExponential {
                p: 1.0,
                rate_pos: *rate,
                rate_neg: *rate,
                shift_pos: 0.0,
                shift_neg: 0.0,
            },
            JumpDensity::DoubleExponential { p, rate_pos, rate_neg, shift_pos, shift_neg } => {
                JumpDensity::DoubleExponential {
                    p: 1.0 - p,
                    rate_pos: *rate_neg,
                    rate_neg: *rate_pos,
                    shift_pos: -shift_neg,
                    shift_neg: -shift_pos,
                }
            }
            JumpDensity::Laplace { rate } => JumpDensity::Laplace { rate: *rate },
            JumpDensity::RationalCf(rt) => JumpDensity::RationalCf(RationalTransform {
                q: rt.q.compose_scale(-1.0),
                r: rt.r.compose_scale(-1.0),
            }),
            JumpDensity::Reflected(inner) => (**inner).clone(),
            other => JumpDensity::Reflected(Box::new(other.clone())),
        }
    }
}

/// Jump-size law: finitely many atoms plus an optional density carrying the
/// remaining mass.
#[derive(Clone, Debug, Default)]
pub struct JumpSpec {
    pub atoms: Vec<Atom>,
    pub density: Option<JumpDensity>,
}

impl JumpSpec {
    pub fn density(d: JumpDensity) -> Self {
        JumpSpec { atoms: Vec::new(), density: Some(d) }
    }

    pub fn constant(location: f64) -> Self {
        JumpSpec { atoms: vec![Atom { location, mass: 1.0 }], density: None }
    }

    pub fn atoms(atoms: Vec<Atom>) -> Self {
        JumpSpec { atoms, density: None }
    }

    pub fn reflect(&self) -> JumpSpec {
        JumpSpec {
            atoms: self.atoms.iter().map(|a| Atom { location: -a.location, mass: a.mass }).collect(),
            density: self.density.as_ref().map(|d| d.reflect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Pos,
    Neg,
}

/// One-signed exp-polynomial component: `J = anchor + U` (`Pos`) or
/// `J = anchor - U` (`Neg`) where `U >= 0` has defective density `g`.
#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub side: Side,
    pub anchor: f64,
    pub g: ExpPoly,
    pub mass: f64,
    tail: ExpPoly,
    tail1: ExpPoly,
    mom1: f64,
    exp_rate: Option<f64>,
}

impl Piece {
    fn new(side: Side, anchor: f64, g: ExpPoly) -> Piece {
        let tail = g.tail();
        let tail1 = g.mul_x().tail();
        let mass = tail.eval(0.0);
        let mom1 = tail1.eval(0.0);
        let exp_rate = match g.terms() {
            [t] if t.power == 0 && t.rate.im == 0.0 => Some(-t.rate.re),
            _ => None,
        };
        Piece { side, anchor, g, mass, tail, tail1, mom1, exp_rate }
    }

    fn exponential(side: Side, anchor: f64, mass: f64, rate: f64) -> Piece {
        Piece::new(side, anchor, ExpPoly::new(vec![Term::real(mass * rate, -rate, 0)]))
    }

    fn flipped(&self) -> Piece {
        let side = if self.side == Side::Pos { Side::Neg } else { Side::Pos };
        Piece { side, anchor: -self.anchor, ..self.clone() }
    }

    fn tail_at(&self, u: f64) -> f64 {
        if u <= 0.0 {
            self.mass
        } else {
            match self.exp_rate {
                Some(r) => self.mass * (-r * u).exp(),
                None => self.tail.eval(u),
            }
        }
    }

    fn tail1_at(&self, u: f64) -> f64 {
        if u <= 0.0 {
            self.mom1
        } else {
            match self.exp_rate {
                Some(r) => self.mass * (-r * u).exp() * (u + 1.0 / r),
                None => self.tail1.eval(u),
            }
        }
    }

    fn cdf(&self, y: f64) -> f64 {
        match self.side {
            Side::Pos => {
                let u = y - self.anchor;
                if u <= 0.0 {
                    0.0
                } else {
                    self.mass - self.tail_at(u)
                }
            }
            Side::Neg => self.tail_at(self.anchor - y),
        }
    }

    fn pmom(&self, y: f64) -> f64 {
        match self.side {
            Side::Pos => {
                let u = y - self.anchor;
                if u <= 0.0 {
                    0.0
                } else {
                    self.anchor * (self.mass - self.tail_at(u)) + (self.mom1 - self.tail1_at(u))
                }
            }
            Side::Neg => {
                let u = (self.anchor - y).max(0.0);
                self.anchor * self.tail_at(u) - self.tail1_at(u)
            }
        }
    }

    fn mean(&self) -> f64 {
        match self.side {
            Side::Pos => self.anchor * self.mass + self.mom1,
            Side::Neg => self.anchor * self.mass - self.mom1,
        }
    }

    fn density(&self, y: f64) -> f64 {
        let u = match self.side {
            Side::Pos => y - self.anchor,
            Side::Neg => self.anchor - y,
        };
        if u < 0.0 {
            0.0
        } else {
            self.g.eval(u)
        }
    }

    fn sample_magnitude<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = 1.0 - rng.random::<f64>();
        if let Some(r) = self.exp_rate {
            return -v.ln() / r;
        }
        let target = v * self.mass;
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.tail_at(hi) > target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.tail_at(u) - target;
            if f > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let d = self.g.eval(u);
            let newton = if d > 0.0 { u + f / d } else { f64::NAN };
            u = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        u
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = self.sample_magnitude(rng);
        match self.side {
            Side::Pos => self.anchor + u,
            Side::Neg => self.anchor - u,
        }
    }
}

#[derive(Debug, Clone)]
enum Continuous {
    None,
    Pieces(Vec<Piece>),
    /// `J = sign * V` with `V ~ Gamma(1/2, rate)`.
    GammaHalf { rate: f64, sign: f64 },
    /// `J = sign * V` with `V` drawn from the generic law.
    Generic { law: GenericJumpDensity, sign: f64, mean: f64 },
}

/// Pieces of a rational characteristic function `E e^{sJ} = R(s)/Q(s)`.
fn rational_cf_pieces(rt: &RationalTransform, weight: f64) -> Result<Vec<Piece>> {
    let a0 = rt.q.coeffs()[0];
    let b0 = rt.r.coeffs()[0];
    if (a0 - b0).abs() > 1e-9 * a0.abs().max(1e-300) {
        return Err(EscapeError::MassNotOne(b0 / a0));
    }
    let roots = poly_roots(rt.q.coeffs())?;
    for r in &roots.roots {
        if r.value.re.abs() <= 1e-12 * (1.0 + r.value.norm()) {
            return Err(EscapeError::UnstableRationalTransform(format!("{}", r.value)));
        }
    }
    let all = invert_with_roots(&rt.r, rt.q.leading(), &roots)?;
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for t in all.terms() {
        if t.rate.re < 0.0 {
            neg.push(Term { coef: t.coef * weight, ..*t });
        } else {
            let sign = if (t.power + 1) % 2 == 0 { 1.0 } else { -1.0 };
            pos.push(Term { coef: t.coef * sign * weight, rate: -t.rate, ..*t });
        }
    }
    let mut pieces = Vec::new();
    if !neg.is_empty() {
        pieces.push(Piece::new(Side::Neg, 0.0, ExpPoly::new(neg)));
    }
    if !pos.is_empty() {
        pieces.push(Piece::new(Side::Pos, 0.0, ExpPoly::new(pos)));
    }
    let mass: f64 = pieces.iter().map(|p| p.mass).sum();
    if (mass - weight).abs() > 1e-6 {
        return Err(EscapeError::MassNotOne(mass / weight));
    }
    Ok(pieces)
}

fn check_rate(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(EscapeError::NonPositiveRate(r))
    }
}

fn compile_density(d: &JumpDensity, weight: f64) -> Result<Continuous> {
    Ok(match d {
        JumpDensity::ExponentialNegative { rate } => {
            check_rate(*rate)?;
            Continuous::Pieces(vec![Piece::exponential(Side::Neg, 0.0, weight, *rate)])
        }
        JumpDensity::DoubleExponential { p, rate_pos, rate_neg, shift_pos, shift_neg } => {
            check_rate(*rate_pos)?;
            check_rate(*rate_neg)?;
            if !(0.0..=1.0).contains(p) {
                return Err(EscapeError::InvalidParameter(format!("double-exponential weight {p} outside [0, 1]")));
            }
            if !shift_pos.is_finite() || !shift_neg.is_finite() {
                return Err(EscapeError::InvalidParameter("non-finite shift".into()));
            }
            let mut pieces = Vec::new();
            if *p > 0.0 {
                pieces.push(Piece::exponential(Side::Pos, *shift_pos, weight * p, *rate_pos));
            }
            if *p < 1.0 {
                pieces.push(Piece::exponential(Side::Neg, *shift_neg, weight * (1.0 - p), *rate_neg));
            }
            Continuous::Pieces(pieces)
        }
        JumpDensity::Laplace { rate } => compile_density(
            &JumpDensity::DoubleExponential { p: 0.5, rate_pos: *rate, rate_neg: *rate, shift_pos: 0.0, shift_neg: 0.0 },
            weight,
        )?,
        JumpDensity::GammaHalfNegative { rate } => {
            check_rate(*rate)?;
            Continuous::GammaHalf { rate: *rate, sign: -1.0 }
        }
        JumpDensity::RationalCf(rt) => Continuous::Pieces(rational_cf_pieces(rt, weight)?),
        JumpDensity::Generic(g) => {
            let (lo, hi) = g.support;
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(EscapeError::InvalidParameter("generic jump support must be a finite interval".into()));
            }
            let dens = g.density.clone();
            let mass = quad::integrate(|y| dens(y), lo, hi, 2000);
            if (mass - 1.0).abs() > 1e-6 {
                return Err(EscapeError::MassNotOne(mass));
            }
            let mean = quad::integrate(|y| y * dens(y), lo, hi, 2000);
            Continuous::Generic { law: g.clone(), sign: 1.0, mean }
        }
        JumpDensity::Reflected(inner) => match compile_density(inner, weight)? {
            Continuous::None => Continuous::None,
            Continuous::Pieces(ps) => Continuous::Pieces(ps.iter().map(|p| p.flipped()).collect()),
            Continuous::GammaHalf { rate, sign } => Continuous::GammaHalf { rate, sign: -sign },
            Continuous::Generic { law, sign, mean } => Continuous::Generic { law, sign: -sign, mean },
        },
    })
}

/// `E[V; V >= w]` for `V ~ Gamma(1/2, g)`.
fn gamma_half_upper_moment(g: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.5 / g;
    }
    (0.5 * erfc((g * w).sqrt()) + (g * w / PI).sqrt() * (-g * w).exp()) / g
}

/// What one sign of the jump law looks like relative to an interval of
/// width `b`; drives routing to the analytic solvers.
#[derive(Debug, Clone)]
pub(crate) struct SideView {
    /// Defective density of `|J|` from pieces anchored at zero.
    pub rational: ExpPoly,
    pub rational_mass: f64,
    /// Mass with `|J| >= b`.
    pub beyond: f64,
    /// Atoms with `0 < |J| < b`, as magnitudes.
    pub inside_atoms: Vec<Atom>,
    /// Any other mass inside `(0, b)`.
    pub irregular: bool,
    pub total: f64,
}

impl SideView {
    fn empty() -> Self {
        SideView {
            rational: ExpPoly::zero(),
            rational_mass: 0.0,
            beyond: 0.0,
            inside_atoms: Vec::new(),
            irregular: false,
            total: 0.0,
        }
    }

    /// Only rational pieces at zero and mass beyond `b`.
    pub fn is_rational(&self) -> bool {
        self.inside_atoms.is_empty() && !self.irregular
    }

    /// No mass strictly inside `(0, b)` in magnitude.
    pub fn is_beyond_only(&self) -> bool {
        self.is_rational() && self.rational.is_zero()
    }
}

/// Validated jump law.
#[derive(Debug, Clone)]
pub struct JumpLaw {
    spec: JumpSpec,
    atoms: Vec<Atom>,
    weight: f64,
    cont: Continuous,
}

impl JumpLaw {
    pub fn new(spec: JumpSpec) -> Result<Self> {
        for a in &spec.atoms {
            if !a.location.is_finite() || !(0.0..=1.0).contains(&a.mass) {
                return Err(EscapeError::InvalidParameter(format!("invalid atom {a:?}")));
            }
        }
        let atom_mass: f64 = spec.atoms.iter().map(|a| a.mass).sum();
        let mut atoms: Vec<Atom> = spec.atoms.iter().copied().filter(|a| a.mass > 0.0).collect();
        let (weight, cont) = match &spec.density {
            None => {
                if (atom_mass - 1.0).abs() > 1e-6 {
                    return Err(EscapeError::MassNotOne(atom_mass));
                }
                for a in atoms.iter_mut() {
                    a.mass /= atom_mass;
                }
                (0.0, Continuous::None)
            }
            Some(d) => {
                if atom_mass > 1.0 + 1e-6 {
                    return Err(EscapeError::MassNotOne(atom_mass));
                }
                let w = (1.0 - atom_mass).max(0.0);
                if w == 0.0 {
                    (0.0, Continuous::None)
                } else {
                    (w, compile_density(d, w)?)
                }
            }
        };
        atoms.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap());
        Ok(JumpLaw { spec, atoms, weight, cont })
    }

    pub fn spec(&self) -> &JumpSpec {
        &self.spec
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Mass of the absolutely continuous part.
    pub fn continuous_weight(&self) -> f64 {
        self.weight
    }

    /// True when the law is a single `Gamma(1/2)` density on the negative axis.
    pub(crate) fn gamma_half_rate(&self) -> Option<f64> {
        match self.cont {
            Continuous::GammaHalf { rate, sign } if sign < 0.0 && self.atoms.is_empty() => Some(rate),
            _ => None,
        }
    }

    pub(crate) fn pieces(&self) -> &[Piece] {
        match &self.cont {
            Continuous::Pieces(p) => p,
            _ => &[],
        }
    }

    pub(crate) fn has_nonpiece_density(&self) -> bool {
        matches!(self.cont, Continuous::GammaHalf { .. } | Continuous::Generic { .. })
    }

    /// `P(J <= y)` restricted to the continuous part.
    pub fn continuous_cdf(&self, y: f64) -> f64 {
        match &self.cont {
            Continuous::None => 0.0,
            Continuous::Pieces(ps) => ps.iter().map(|p| p.cdf(y)).sum(),
            Continuous::GammaHalf { rate, sign } => {
                if *sign < 0.0 {
                    if y >= 0.0 {
                        self.weight
                    } else {
                        self.weight * erfc((-rate * y).sqrt())
                    }
                } else if y <= 0.0 {
                    0.0
                } else {
                    self.weight * erf((rate * y).sqrt())
                }
            }
            Continuous::Generic { law, sign, .. } => {
                let (lo, hi) = law.support;
                let v = if *sign > 0.0 {
                    if y <= lo {
                        0.0
                    } else if y >= hi {
                        1.0
                    } else {
                        (law.cdf)(y)
                    }
                } else if -y >= hi {
                    0.0
                } else if -y <= lo {
                    1.0
                } else {
                    1.0 - (law.cdf)(-y)
                };
                self.weight * v
            }
        }
    }

    /// `E[J; J <= y]` restricted to the continuous part.
    pub fn continuous_partial_mean(&self, y: f64) -> f64 {
        match &self.cont {
            Continuous::None => 0.0,
            Continuous::Pieces(ps) => ps.iter().map(|p| p.pmom(y)).sum(),
            Continuous::GammaHalf { rate, sign } => {
                if *sign < 0.0 {
                    -self.weight * gamma_half_upper_moment(*rate, -y)
                } else if y <= 0.0 {
                    0.0
                } else {
                    self.weight * (0.5 / rate - gamma_half_upper_moment(*rate, y))
                }
            }
            Continuous::Generic { law, sign, .. } => {
                let (lo, hi) = law.support;
                let d = law.density.clone();
                let (a, b) = if *sign > 0.0 { (lo, y.min(hi)) } else { ((-y).max(lo), hi) };
                if b <= a {
                    return 0.0;
                }
                let panels = ((b - a) / (hi - lo) * 400.0).ceil().max(1.0) as usize;
                sign * self.weight * quad::integrate(|v| v * d(v), a, b, panels)
            }
        }
    }

    /// Mass and first moment of the continuous part on `(y0, y1]`.
    pub fn continuous_cell_moments(&self, y0: f64, y1: f64) -> (f64, f64) {
        if let Continuous::Generic { law, sign, .. } = &self.cont {
            let (lo, hi) = law.support;
            let d = law.density.clone();
            let (a, b) = if *sign > 0.0 { (y0.max(lo), y1.min(hi)) } else { ((-y1).max(lo), (-y0).min(hi)) };
            let m1 = if b > a { sign * self.weight * quad::gauss8(&|v| v * d(v), a, b) } else { 0.0 };
            return (self.continuous_cdf(y1) - self.continuous_cdf(y0), m1);
        }
        (
            self.continuous_cdf(y1) - self.continuous_cdf(y0),
            self.continuous_partial_mean(y1) - self.continuous_partial_mean(y0),
        )
    }

    /// Density of the continuous part (zero where absent).
    pub fn continuous_density(&self, y: f64) -> f64 {
        match &self.cont {
            Continuous::None => 0.0,
            Continuous::Pieces(ps) => ps.iter().map(|p| p.density(y)).sum(),
            Continuous::GammaHalf { rate, sign } => {
                let v = sign * y;
                if v <= 0.0 {
                    0.0
                } else {
                    self.weight * (rate / (PI * v)).sqrt() * (-rate * v).exp()
                }
            }
            Continuous::Generic { law, sign, .. } => {
                let v = sign * y;
                if v < law.support.0 || v > law.support.1 {
                    0.0
                } else {
                    self.weight * (law.density)(v)
                }
            }
        }
    }

    /// `P(J <= y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        self.continuous_cdf(y) + self.atoms.iter().filter(|a| a.location <= y).map(|a| a.mass).sum::<f64>()
    }

    /// `P(J < y)`.
    pub fn cdf_left(&self, y: f64) -> f64 {
        self.continuous_cdf(y) + self.atoms.iter().filter(|a| a.location < y).map(|a| a.mass).sum::<f64>()
    }

    /// `P(lo < J < hi)`.
    pub fn prob_open(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf_left(hi) - self.cdf(lo)).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.location * a.mass).sum();
        let cont = match &self.cont {
            Continuous::None => 0.0,
            Continuous::Pieces(ps) => ps.iter().map(|p| p.mean()).sum(),
            Continuous::GammaHalf { rate, sign } => sign * self.weight * 0.5 / rate,
            Continuous::Generic { sign, mean, .. } => sign * self.weight * mean,
        };
        atoms + cont
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u = rng.random::<f64>();
        for a in &self.atoms {
            if u < a.mass {
                return a.location;
            }
            u -= a.mass;
        }
        match &self.cont {
            Continuous::None => self.atoms.last().map(|a| a.location).unwrap_or(0.0),
            Continuous::Pieces(ps) => {
                for p in ps {
                    if u < p.mass {
                        return p.sample(rng);
                    }
                    u -= p.mass;
                }
                ps.last().map(|p| p.sample(rng)).unwrap_or(0.0)
            }
            Continuous::GammaHalf { rate, sign } => {
                let v = erf_inv(rng.random::<f64>());
                sign * v * v / rate
            }
            Continuous::Generic { law, sign, .. } => {
                let target = rng.random::<f64>();
                let (mut lo, mut hi) = law.support;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if (law.cdf)(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                sign * 0.5 * (lo + hi)
            }
        }
    }

    pub fn reflect(&self) -> Result<JumpLaw> {
        JumpLaw::new(self.spec.reflect())
    }

    /// Structure of the jumps of one sign relative to width `b`.
    pub(crate) fn side_view(&self, side: Side, b: f64) -> SideView {
        let mut v = SideView::empty();
        let mut rational = Vec::new();
        for a in &self.atoms {
            let m = match side {
                Side::Pos => a.location,
                Side::Neg => -a.location,
            };
            if m <= 0.0 {
                continue;
            }
            if m >= b {
                v.beyond += a.mass;
            } else {
                v.inside_atoms.push(Atom { location: m, mass: a.mass });
            }
        }
        match &self.cont {
            Continuous::None => {}
            Continuous::Pieces(ps) => {
                for p in ps {
                    // anchor measured along the side's direction
                    let a = match side {
                        Side::Pos => p.anchor,
                        Side::Neg => -p.anchor,
                    };
                    if p.side == side {
                        if a == 0.0 {
                            rational.extend_from_slice(p.g.terms());
                            v.rational_mass += p.mass;
                        } else if a >= b {
                            v.beyond += p.mass;
                        } else {
                            v.irregular = true;
                        }
                    } else if a > 0.0 {
                        // opposite-direction piece reaching into this side
                        v.irregular = true;
                    }
                }
            }
            Continuous::GammaHalf { .. } | Continuous::Generic { .. } => {
                let side_mass = match side {
                    Side::Pos => self.weight - self.continuous_cdf(0.0),
                    Side::Neg => self.continuous_cdf(0.0),
                };
                if side_mass > 0.0 {
                    v.irregular = true;
                }
            }
        }
        v.rational = ExpPoly::new(rational);
        v.total = match side {
            Side::Pos => 1.0 - self.cdf(0.0),
            Side::Neg => self.cdf_left(0.0),
        };
        v
    }

    pub(crate) fn zero_atom(&self) -> bool {
        self.atoms.iter().any(|a| a.location == 0.0)
    }

    /// Moment generating function `E e^{sJ} = R(s)/Q(s)` and the one-sided
    /// densities (`h+` in `y`, `h-` in `u = -y`) when the law consists only
    /// of exp-polynomial pieces anchored at zero.
    pub(crate) fn rational_cf(&self) -> Option<(Poly, Poly, ExpPoly, ExpPoly)> {
        if !self.atoms.is_empty() {
            return None;
        }
        let ps = match &self.cont {
            Continuous::Pieces(ps) => ps,
            _ => return None,
        };
        if ps.iter().any(|p| p.anchor != 0.0) {
            return None;
        }
        let collect = |side: Side| {
            ExpPoly::new(ps.iter().filter(|p| p.side == side).flat_map(|p| p.g.terms().to_vec()).collect())
        };
        let hp = collect(Side::Pos);
        let hm = collect(Side::Neg);
        let (np, dp) = if hp.is_zero() { (Poly::constant(0.0), Poly::constant(1.0)) } else { hp.laplace_rational() };
        let (nm, dm) = if hm.is_zero() { (Poly::constant(0.0), Poly::constant(1.0)) } else { hm.laplace_rational() };
        let np = np.compose_scale(-1.0);
        let dp = dp.compose_scale(-1.0);
        let q = dp.mul(&dm);
        let r = np.mul(&dm).add(&nm.mul(&dp));
        Some((q, r, hp, hm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_negative_cdf_and_moments() {
        let law = JumpLaw::new(JumpSpec::density(JumpDensity::ExponentialNegative { rate: 2.0 })).unwrap();
        assert!((law.cdf(-1.0) - (-2f64).exp()).abs() < 1e-15);
        assert!((law.mean() + 0.5).abs() < 1e-15);
        let (m, m1) = law.continuous_cell_moments(f64::NEG_INFINITY.max(-1e3), 0.0);
        assert!((m - 1.0).abs() < 1e-14 && (m1 + 0.5).abs() < 1e-14);
    }

    #[test]
    fn gamma_half_moments() {
        let g = 1.5;
        let law = JumpLaw::new(JumpSpec::density(JumpDensity::GammaHalfNegative { rate: g })).unwrap();
        assert!((law.mean() + 0.5 / g).abs() < 1e-15);
        let y = -0.4;
        let q = quad::integrate(|z| z * law.continuous_density(z), -60.0, y, 4000);
        assert!((law.continuous_partial_mean(y) - q).abs() < 1e-8);
        let r = law.reflect().unwrap();
        assert!((r.cdf(0.4) - (1.0 - law.cdf_left(-0.4))).abs() < 1e-15);
        assert!((r.continuous_partial_mean(0.4) + (law.continuous_partial_mean(0.0) - law.continuous_partial_mean(-0.4))).abs() < 1e-14);
    }

    #[test]
    fn rational_cf_laplace_pieces() {
        // Laplace(1): E e^{sJ} = 1/(1 - s^2)
        let rt = RationalTransform::new(vec![1.0, 0.0, -1.0], vec![1.0]).unwrap();
        let law = JumpLaw::new(JumpSpec::density(JumpDensity::RationalCf(rt))).unwrap();
        for y in [-1.3, -0.2, 0.4, 2.0] {
            assert!((law.continuous_density(y) - 0.5 * (-f64::abs(y)).exp()).abs() < 1e-14);
        }
        let (q, r, hp, hm) = law.rational_cf().unwrap();
        let s = 0.3;
        assert!((r.eval(s) / q.eval(s) - 1.0 / (1.0 - s * s)).abs() < 1e-14);
        assert!((hp.eval(0.0) - 0.5).abs() < 1e-15 && (hm.eval(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixed_atoms_and_density() {
        let spec = JumpSpec {
            atoms: vec![Atom { location: 4.0, mass: 0.2 }],
            density: Some(JumpDensity::ExponentialNegative { rate: 1.0 }),
        };
        let law = JumpLaw::new(spec).unwrap();
        assert!((law.cdf(10.0) - 1.0).abs() < 1e-15);
        assert!((law.cdf_left(4.0) - 0.8).abs() < 1e-15);
        let v = law.side_view(Side::Pos, 2.0);
        assert!((v.beyond - 0.2).abs() < 1e-15 && v.is_beyond_only());
        let v = law.side_view(Side::Neg, 2.0);
        assert!(v.is_rational() && (v.rational_mass - 0.8).abs() < 1e-15);
    }

    #[test]
    fn mass_mismatch_rejected() {
        let spec = JumpSpec::atoms(vec![Atom { location: -1.0, mass: 0.5 }]);
        assert!(matches!(JumpLaw::new(spec), Err(EscapeError::MassNotOne(_))));
    }
}
