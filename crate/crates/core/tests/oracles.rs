//! Solver outputs against independently derived reference values.

use escape_core::analytic::{
    ep_poisson_one_sided, ep_poisson_rational_cf, ep_rational_arrivals, ep_trivial, ep_two_sided_lower,
    ep_two_sided_upper, ep_zero_drift, gamma_half_pi_closed, gamma_half_pi_talbot, prepare, survival_poisson,
};
use escape_core::fredholm::{contraction_value, solve_fredholm, FredholmOptions};
use escape_core::ratfun::RationalTransform;
use escape_core::{build_model, ArrivalSpec, Atom, JumpDensity, JumpSpec, ProcessModel, SolverRoute};

fn grid(b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| b * i as f64 / (n - 1) as f64).collect()
}

fn poisson_exp(c: f64, lambda: f64, gamma: f64) -> ProcessModel {
    build_model(c, ArrivalSpec::Exponential { rate: lambda }, JumpSpec::density(JumpDensity::ExponentialNegative { rate: gamma }))
        .unwrap()
}

#[test]
fn poisson_exponential_jumps_closed_form() {
    // pi(x) = (g - rho e^{(rho - g) x}) / (g - rho)
    let (rho, g, b) = (1.0, 2.0, 2.0);
    let pi = |x: f64| (g - rho * ((rho - g) * x).exp()) / (g - rho);
    let m = poisson_exp(1.0, 1.0, 2.0);
    for x in grid(b, 51) {
        let v = ep_poisson_one_sided(&m, x, b).unwrap();
        assert!((v - pi(x) / pi(b)).abs() < 1e-13, "x={x}");
    }
    assert!((ep_poisson_one_sided(&m, 1.0, b).unwrap() - 0.8752890233594002).abs() < 1e-13);
}

#[test]
fn erlang_arrivals_against_reference_nystrom() {
    // independent Nystrom solve, Richardson-checked to ~1e-7
    let m = build_model(
        1.0,
        ArrivalSpec::Erlang { shape: 2, rate: 1.0 },
        JumpSpec::density(JumpDensity::ExponentialNegative { rate: 1.0 }),
    )
    .unwrap();
    let want = [(0.0, 0.7282180), (0.5, 0.8456086), (1.0, 0.9280894), (1.5, 0.9803270), (2.0, 1.0)];
    for (x, v) in want {
        let got = ep_rational_arrivals(&m, x, 2.0).unwrap();
        assert!((got - v).abs() < 1e-6, "x={x}: {got} vs {v}");
    }
}

#[test]
fn hyperexponential_bordered_determinant_formula() {
    let (p, l1, l2, g, c, b): (f64, f64, f64, f64, f64, f64) = (0.3, 1.0, 2.0, 1.0, 1.0, 2.0);
    let q = 1.0 - p;
    let (t1, t2) = (l1 / c, l2 / c);
    let aa = g - t1 - t2;
    let bb = t1 * t2 - g * (q * t1 + p * t2);
    let disc = (aa * aa - 4.0 * bb).sqrt();
    let (sp, sm) = ((-aa + disc) / 2.0, (-aa - disc) / 2.0);
    let f0 = p * l1 + q * l2;
    let theta = |x: f64| {
        sp * (f0 - c * (sp + g)) * (sp * b).exp() * ((sm + g) * (sm * x).exp() - g)
            - sm * (f0 - c * (sm + g)) * (sm * b).exp() * ((sp + g) * (sp * x).exp() - g)
    };
    let m = build_model(
        c,
        ArrivalSpec::hyperexponential(p, l1, l2).unwrap(),
        JumpSpec::density(JumpDensity::ExponentialNegative { rate: g }),
    )
    .unwrap();
    for x in grid(b, 11) {
        let want = theta(x) / theta(b);
        let got = ep_rational_arrivals(&m, x, b).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs(), "x={x}: {got} vs {want}");
    }
}

#[test]
fn gamma_half_resolvent_reference() {
    // high-precision Talbot inversion (mpmath) of the resolvent transform
    let want = [(0.5, 1.067352601940801), (1.0, 1.099639274732011), (2.0, 1.1277695738838773)];
    for (x, v) in want {
        assert!((gamma_half_pi_closed(1.0, 0.25, x) - v).abs() < 1e-10);
        assert!((gamma_half_pi_talbot(1.0, 0.25, x, 64).unwrap() - v).abs() < 1e-9);
    }
}

#[test]
fn gamma_half_route_uses_resolvent_ratio() {
    let m = build_model(1.0, ArrivalSpec::Exponential { rate: 0.25 }, JumpSpec::density(JumpDensity::GammaHalfNegative { rate: 1.0 }))
        .unwrap();
    let v = ep_poisson_one_sided(&m, 1.0, 2.0).unwrap();
    assert!((v - 1.099639274732011 / 1.1277695738838773).abs() < 1e-10);
}

#[test]
fn lower_two_sided_exponential_up_jumps() {
    // positive Exp(g) jumps w.p. p, the rest far below: closed form in the
    // two roots of s^2 + (rho + g) s + q rho g
    let (c, lambda, b, g, p): (f64, f64, f64, f64, f64) = (1.0, 1.0, 2.0, 1.5, 0.6);
    let q = 1.0 - p;
    let rho = lambda / c;
    let d = (rho + g).powi(2) - 4.0 * q * rho * g;
    let sp = (-(rho + g) + d.sqrt()) / 2.0;
    let sm = (-(rho + g) - d.sqrt()) / 2.0;
    let n5 = |x: f64| {
        ((sm * (b - x)).exp() * sp * (sm + g) - (sp * (b - x)).exp() * sm * (sp + g)) / (g * (sp - sm))
    };
    let spec = JumpSpec {
        atoms: vec![Atom { location: -2.0 * b, mass: q }],
        density: Some(JumpDensity::DoubleExponential { p: 1.0, rate_pos: g, rate_neg: 1.0, shift_pos: 0.0, shift_neg: 0.0 }),
    };
    let m = build_model(c, ArrivalSpec::Exponential { rate: lambda }, spec).unwrap();
    for x in grid(b, 11) {
        let got = ep_two_sided_lower(&m, x, b).unwrap();
        assert!((got - n5(x)).abs() < 1e-12, "x={x}: {got} vs {}", n5(x));
    }
}

#[test]
fn lower_two_sided_constant_up_jump() {
    // Poisson count of up-jumps before the first far-down jump
    let (b, y1, p, rho): (f64, f64, f64, f64) = (2.0, 0.7, 0.6, 1.0);
    let q = 1.0 - p;
    let n6 = |x: f64| {
        let k1 = ((b - x) / y1).floor() as usize;
        let mut s = 0.0;
        for k in 0..=k1 {
            let xi = b - x - k as f64 * y1;
            let mut cdf_poisson = 0.0;
            let mut term = (-rho * xi).exp();
            for j in 0..=k {
                if j > 0 {
                    term *= rho * xi / j as f64;
                }
                cdf_poisson += term;
            }
            s += p.powi(k as i32) * (1.0 - cdf_poisson);
        }
        1.0 - q * s
    };
    let spec = JumpSpec::atoms(vec![Atom { location: -2.0 * b, mass: q }, Atom { location: y1, mass: p }]);
    let m = build_model(1.0, ArrivalSpec::Exponential { rate: rho }, spec).unwrap();
    for x in grid(b, 11) {
        let got = ep_two_sided_lower(&m, x, b).unwrap();
        assert!((got - n6(x)).abs() < 1e-12, "x={x}");
    }
}

#[test]
fn constant_down_jump_series() {
    let (rho, y1, b) = (1.0f64, 0.3f64, 2.0f64);
    let pis = |x: f64| {
        let mut s = 0.0;
        let mut fact = 1.0;
        for k in 0..=((x / y1).floor() as i32) {
            if k > 0 {
                fact *= k as f64;
            }
            s += (-rho * (-y1 * rho).exp()).powi(k) * (x - k as f64 * y1).powi(k) / fact;
        }
        (rho * x).exp() * s
    };
    let m = build_model(1.0, ArrivalSpec::Exponential { rate: rho }, JumpSpec::constant(-y1)).unwrap();
    for x in grid(b, 11) {
        let got = ep_poisson_one_sided(&m, x, b).unwrap();
        assert!((got - pis(x) / pis(b)).abs() < 1e-11, "x={x}");
    }
}

#[test]
fn laplace_under_poisson_reference() {
    // independent Nystrom solve with Richardson extrapolation
    let m = build_model(1.0, ArrivalSpec::Exponential { rate: 1.0 }, JumpSpec::density(JumpDensity::Laplace { rate: 1.0 })).unwrap();
    let got = ep_poisson_rational_cf(&m, 1.0, 2.0).unwrap();
    assert!((got - 0.8807809782639145).abs() < 1e-8, "{got}");
}

#[test]
fn zero_drift_laplace_linear() {
    let (g, b) = (1.3, 2.0);
    let m = build_model(0.0, ArrivalSpec::Exponential { rate: 1.0 }, JumpSpec::density(JumpDensity::Laplace { rate: g })).unwrap();
    for x in grid(b, 21) {
        let got = ep_zero_drift(&m, x, b).unwrap();
        assert!((got - (1.0 + g * x) / (2.0 + g * b)).abs() < 1e-12);
    }
}

#[test]
fn zero_drift_closed_form_matches_boundary_system() {
    // same law written as a rational transform goes through the general
    // boundary system instead of the closed form
    let (p, gp, gm, b) = (0.3, 2.0, 0.7, 2.0);
    let q = 1.0 - p;
    let direct = build_model(
        0.0,
        ArrivalSpec::Exponential { rate: 1.0 },
        JumpSpec::density(JumpDensity::DoubleExponential { p, rate_pos: gp, rate_neg: gm, shift_pos: 0.0, shift_neg: 0.0 }),
    )
    .unwrap();
    // E e^{sJ} = p gp/(gp - s) + q gm/(gm + s)
    let qs = vec![gp * gm, gp - gm, -1.0];
    let rs = vec![gp * gm, p * gp - q * gm];
    let cf = build_model(
        0.0,
        ArrivalSpec::Exponential { rate: 1.0 },
        JumpSpec::density(JumpDensity::RationalCf(RationalTransform::new(qs, rs).unwrap())),
    )
    .unwrap();
    assert_eq!(prepare(&cf, b).unwrap().route(), SolverRoute::ZeroDrift);
    for x in grid(b, 11) {
        let a = ep_zero_drift(&direct, x, b).unwrap();
        let c = ep_zero_drift(&cf, x, b).unwrap();
        assert!((a - c).abs() < 1e-10, "x={x}: {a} vs {c}");
    }
}

#[test]
fn upper_two_sided_against_fredholm() {
    let m = build_model(
        1.0,
        ArrivalSpec::Hypoexponential { rates: vec![1.0, 2.0] },
        JumpSpec { atoms: vec![Atom { location: 4.0, mass: 0.2 }], density: Some(JumpDensity::ExponentialNegative { rate: 1.0 }) },
    )
    .unwrap();
    let sol = solve_fredholm(&m, 2.0, &FredholmOptions::default()).unwrap();
    for x in grid(2.0, 11) {
        let a = ep_two_sided_upper(&m, x, 2.0).unwrap();
        let f = sol.eval(x).unwrap();
        assert!((a - f).abs() < 5e-4, "x={x}: {a} vs {f}");
    }
}

#[test]
fn trivial_case_formula() {
    // all jumps beyond the interval: first event decides
    let spec = JumpSpec::atoms(vec![Atom { location: -5.0, mass: 0.4 }, Atom { location: 3.0, mass: 0.6 }]);
    let m = build_model(1.0, ArrivalSpec::Erlang { shape: 2, rate: 1.0 }, spec).unwrap();
    let x = 0.5;
    let t: f64 = 1.5;
    let f = 1.0 - (1.0 + t) * (-t).exp();
    assert!((ep_trivial(&m, x, 2.0).unwrap() - (1.0 - f + 0.6 * f)).abs() < 1e-15);
    let sol = solve_fredholm(&m, 2.0, &FredholmOptions::default()).unwrap();
    for (xi, v) in sol.nodes.iter().zip(&sol.values) {
        assert!((v - ep_trivial(&m, *xi, 2.0).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn contraction_constant_examples() {
    let e2 = 1.0 - (-2f64).exp();
    assert!((contraction_value(&poisson_exp(1.0, 1.0, 1.0), 2.0) - e2 * e2).abs() < 1e-15);
    let far = build_model(1.0, ArrivalSpec::Exponential { rate: 1.0 }, JumpSpec::constant(-4.0)).unwrap();
    assert_eq!(contraction_value(&far, 2.0), 0.0);
    let lap = build_model(0.0, ArrivalSpec::Exponential { rate: 1.0 }, JumpSpec::density(JumpDensity::Laplace { rate: 1.5 })).unwrap();
    assert!((contraction_value(&lap, 2.0) - (1.0 - (-3f64).exp())).abs() < 1e-15);
}

#[test]
fn survival_exponential_jumps() {
    // S(x) = 1 - rho m e^{-(g - rho) x}
    let m = poisson_exp(1.0, 1.0, 2.0);
    for x in [0.0f64, 0.5, 3.0] {
        let want = 1.0 - 0.5 * (-(2.0 - 1.0) * x).exp();
        assert!((survival_poisson(&m, x).unwrap() - want).abs() < 1e-13);
    }
    assert_eq!(survival_poisson(&poisson_exp(1.0, 3.0, 2.0), 1.0).unwrap(), 0.0);
}
