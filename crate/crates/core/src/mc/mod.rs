//! Event-driven Monte Carlo estimates. Between arrivals the path is linear,
//! so barrier crossings by drift are decided exactly from the interarrival
//! time; jumps are checked at arrival instants.
//!
//! Path `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so every
//! estimate is bit-identical for any number of worker threads.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{EscapeError, Result};
use crate::model::{net_profit, NetProfit, ProcessModel};

/// Hard cap on arrivals per path.
pub const EVENT_CAP: u64 = 10_000_000;

/// Largest tolerated fraction of censored paths.
const CENSORED_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitSide {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRecord {
    pub side: ExitSide,
    pub exit_time: f64,
    pub jumps_seen: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    /// Paths that finished (censored paths excluded).
    pub n_paths: u64,
    pub seed: u64,
    pub censored: u64,
    /// Survival horizon, when the estimate is truncated in time.
    pub horizon: Option<f64>,
    pub notes: Vec<String>,
}

impl McEstimate {
    fn from_counts(hits: u64, n: u64, seed: u64, censored: u64) -> Result<Self> {
        if n == 0 || censored as f64 > CENSORED_FRACTION * (n + censored) as f64 {
            return Err(EscapeError::NonTermination(censored));
        }
        let v = hits as f64 / n as f64;
        let se = (v * (1.0 - v) / n as f64).sqrt();
        let mut notes = Vec::new();
        if censored > 0 {
            notes.push(format!("{censored} paths hit the event cap and were excluded"));
        }
        Ok(McEstimate {
            value: v,
            stderr: se,
            ci95: ((v - 1.96 * se).max(0.0), (v + 1.96 * se).min(1.0)),
            n_paths: n,
            seed,
            censored,
            horizon: None,
            notes,
        })
    }
}

/// Generator for path `index`; the keyed base generator is cloned and moved
/// to its own stream.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn base_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn stream(base: &ChaCha8Rng, index: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(index);
    rng
}

fn check_query(x: f64, a: f64, b: f64) -> Result<()> {
    if !(a < x && x < b) || !x.is_finite() || !a.is_finite() || !b.is_finite() {
        return Err(EscapeError::Range(format!("need a < x < b, got a={a}, x={x}, b={b}")));
    }
    Ok(())
}

/// One path from `x` in `(a, b)`; the first interarrival has already lasted
/// `z`.
fn run_path(model: &ProcessModel, x: f64, a: f64, b: f64, z: f64, rng: &mut ChaCha8Rng) -> Result<ExitRecord> {
    let c = model.drift();
    let arr = model.arrivals();
    let jumps = model.jumps();
    let w = b - a;
    let mut y = x - a;
    let mut t = 0.0;
    let mut events = 0u64;
    loop {
        if events >= EVENT_CAP {
            return Err(EscapeError::NonTermination(events));
        }
        let tau = if events == 0 && z > 0.0 { arr.sample_residual(z, rng)? } else { arr.sample(rng) };
        if c > 0.0 && tau >= (w - y) / c {
            return Ok(ExitRecord { side: ExitSide::Upper, exit_time: t + (w - y) / c, jumps_seen: events });
        }
        if c < 0.0 && tau >= y / -c {
            return Ok(ExitRecord { side: ExitSide::Lower, exit_time: t + y / -c, jumps_seen: events });
        }
        y += c * tau;
        t += tau;
        y += jumps.sample(rng);
        events += 1;
        if y >= w {
            return Ok(ExitRecord { side: ExitSide::Upper, exit_time: t, jumps_seen: events });
        }
        if y <= 0.0 {
            return Ok(ExitRecord { side: ExitSide::Lower, exit_time: t, jumps_seen: events });
        }
    }
}

/// Simulates one path to its first exit from `(a, b)`.
pub fn simulate_exit(model: &ProcessModel, x: f64, a: f64, b: f64, rng: &mut ChaCha8Rng) -> Result<ExitRecord> {
    check_query(x, a, b)?;
    run_path(model, x, a, b, 0.0, rng)
}

fn estimate(model: &ProcessModel, x: f64, a: f64, b: f64, z: f64, n_paths: u64, seed: u64) -> Result<McEstimate> {
    check_query(x, a, b)?;
    if n_paths < 100 {
        return Err(EscapeError::InvalidParameter(format!("need at least 100 paths, got {n_paths}")));
    }
    let base = base_rng(seed);
    // stop as soon as the estimate is known to be invalid
    let allowance = (CENSORED_FRACTION * n_paths as f64).floor() as u64;
    let seen = AtomicU64::new(0);
    let (hits, censored) = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(&base, i);
            match run_path(model, x, a, b, z, &mut rng) {
                Ok(r) => Ok(((r.side == ExitSide::Upper) as u64, 0u64)),
                Err(EscapeError::NonTermination(_)) => {
                    if seen.fetch_add(1, Ordering::Relaxed) + 1 > allowance {
                        Err(EscapeError::NonTermination(allowance + 1))
                    } else {
                        Ok((0, 1))
                    }
                }
                Err(e) => Err(e),
            }
        })
        .try_reduce(|| (0, 0), |p, q| Ok((p.0 + q.0, p.1 + q.1)))?;
    McEstimate::from_counts(hits, n_paths - censored, seed, censored)
}

/// Fraction of `n_paths` paths leaving `(a, b)` through `b`.
pub fn estimate_ep(model: &ProcessModel, x: f64, a: f64, b: f64, n_paths: u64, seed: u64) -> Result<McEstimate> {
    estimate(model, x, a, b, 0.0, n_paths, seed)
}

/// As [`estimate_ep`], with the first interarrival drawn from the residual
/// law given `z` time units since the last arrival.
pub fn estimate_conditional_ep(
    model: &ProcessModel,
    x: f64,
    a: f64,
    b: f64,
    z: f64,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(EscapeError::Range(format!("elapsed time must be nonnegative, got {z}")));
    }
    if model.arrivals().tail(z) < 1e-300 {
        return Err(EscapeError::TailUnderflow(z));
    }
    estimate(model, x, a, b, z, n_paths, seed)
}

/// Default survival horizon: a multiple of the time to drift a distance
/// `max(x, |EJ|)` at the net rate, plus 100 mean interarrivals; only the
/// latter without net profit.
pub fn default_horizon(model: &ProcessModel, x: f64) -> f64 {
    let et = model.arrivals().mean();
    let ej = model.jumps().mean();
    let net = model.drift() * et + ej;
    match net_profit(model) {
        NetProfit::Holds => 50.0 * et * x.max(ej.abs()) / net + 100.0 * et,
        _ => 100.0 * et,
    }
}

/// Fraction of paths from `x > 0` that stay above zero up to `horizon`
/// (no upper barrier). Overestimates the infinite-horizon survival.
pub fn estimate_survival(
    model: &ProcessModel,
    x: f64,
    horizon: Option<f64>,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(EscapeError::Range(format!("start must be nonnegative, got {x}")));
    }
    if n_paths < 100 {
        return Err(EscapeError::InvalidParameter(format!("need at least 100 paths, got {n_paths}")));
    }
    let horizon = horizon.unwrap_or_else(|| default_horizon(model, x));
    if !(horizon > 0.0) {
        return Err(EscapeError::Range(format!("horizon must be positive, got {horizon}")));
    }
    let c = model.drift();
    let base = base_rng(seed);
    let (hits, censored) = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(&base, i);
            let (mut y, mut t) = (x, 0.0);
            for _ in 0..EVENT_CAP {
                let tau = model.arrivals().sample(&mut rng);
                if c < 0.0 && tau >= y / -c {
                    return if t + y / -c > horizon { (1u64, 0u64) } else { (0, 0) };
                }
                if t + tau > horizon {
                    return (1, 0);
                }
                t += tau;
                y += c * tau + model.jumps().sample(&mut rng);
                if y <= 0.0 {
                    return (0, 0);
                }
            }
            (0, 1)
        })
        .reduce(|| (0, 0), |p, q| (p.0 + q.0, p.1 + q.1));
    let mut est = McEstimate::from_counts(hits, n_paths - censored, seed, censored)?;
    est.horizon = Some(horizon);
    est.notes.push(format!("truncated at horizon {horizon}: biased upward"));
    if net_profit(model) != NetProfit::Holds {
        est.notes.push("net profit condition fails: survival tends to zero".into());
    }
    Ok(est)
}
