//! Fixed-order Gauss-Legendre quadrature.

const NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// 8-point rule on `[a, b]`.
pub(crate) fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    NODES.iter().zip(WEIGHTS.iter()).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Composite 8-point rule with `panels` equal panels.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    (0..panels).map(|i| gauss8(&f, a + i as f64 * h, a + (i + 1) as f64 * h)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let v = integrate(|x: f64| x.powi(15), 0.0, 1.0, 1);
        assert!((v - 1.0 / 16.0).abs() < 1e-15);
    }
}
