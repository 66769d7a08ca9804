use rayon::prelude::*;

use crate::error::{EscapeError, Result};
use crate::model::ProcessModel;

/// Negative atom whose landing point crosses zero inside drift cell `j`:
/// `G` jumps at `u* = -location`, so the arrival stage integrates that cell
/// exactly in two pieces instead of interpolating across the jump.
#[derive(Debug, Clone)]
struct Split {
    j: usize,
    ustar: f64,
    mass: f64,
    /// Interpolation weight of `N_1` in the atom term at node `j + 1`.
    theta: f64,
    /// Per row `i <= j`: `int (u - x_j)/delta` over `[x_j, u*]`.
    i1: Vec<f64>,
    /// Per row: mass, `int (u - x_j)/delta` and `int (u - u*)/(x_{j+1} - u*)`
    /// over `[u*, x_{j+1}]`.
    k0: Vec<f64>,
    k1: Vec<f64>,
    j1: Vec<f64>,
}

/// Discretised escape operator `N -> O N` on the uniform grid of `(0, b)`.
#[derive(Debug, Clone)]
pub struct FredholmOperator {
    model: ProcessModel,
    m: usize,
    b: f64,
    delta: f64,
    /// Hat weights of the continuous jump part, indexed by `j - i + m`.
    wl: Vec<f64>,
    wr: Vec<f64>,
    wc: Vec<f64>,
    atom_rows: Vec<Vec<(usize, f64)>>,
    /// `P(x_i + J >= b)` and `P(x_i + J <= 0)`.
    up: Vec<f64>,
    low: Vec<f64>,
    /// Arrival-stage hat weights indexed by `j - i`; empty for zero drift.
    vl: Vec<f64>,
    vr: Vec<f64>,
    vc: Vec<f64>,
    /// `P(tau > (b - x_i)/c)`.
    tail: Vec<f64>,
    splits: Vec<Split>,
}

impl FredholmOperator {
    pub fn new(model: &ProcessModel, b: f64, m: usize) -> Result<Self> {
        let c = model.drift();
        if c < 0.0 {
            return Err(EscapeError::RoutingMismatch("reflect negative drift first".into()));
        }
        let delta = b / m as f64;
        let jumps = model.jumps();
        let mi = m as i64;
        // cells ((k-1) delta, k delta] of the jump variable, k in [-m+1, m]
        let cell = |k: i64| jumps.continuous_cell_moments((k - 1) as f64 * delta, k as f64 * delta);
        let cells: Vec<(f64, f64)> = (-mi + 1..=mi).into_par_iter().map(cell).collect();
        let cell_at = |k: i64| cells[(k + mi - 1) as usize];
        let mut wl = vec![0.0; 2 * m + 1];
        let mut wr = vec![0.0; 2 * m + 1];
        for k in -mi..=mi {
            let idx = (k + mi) as usize;
            if k > -mi {
                let (h, kk) = cell_at(k);
                wl[idx] = (1 - k) as f64 * h + kk / delta;
            }
            if k < mi {
                let (h, kk) = cell_at(k + 1);
                wr[idx] = (k + 1) as f64 * h - kk / delta;
            }
        }
        let wc: Vec<f64> = wl.iter().zip(&wr).map(|(a, b)| a + b).collect();
        let weight = jumps.continuous_weight();
        let mut up = Vec::with_capacity(m + 1);
        let mut low = Vec::with_capacity(m + 1);
        let mut atom_rows = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let x = i as f64 * delta;
            up.push(weight - jumps.continuous_cdf((m - i) as f64 * delta));
            low.push(jumps.continuous_cdf(-x));
            let (row, u, l) = atom_row(model, x, b, delta, m);
            up[i] += u;
            low[i] += l;
            atom_rows.push(row);
        }

        let (mut vl, mut vr, mut vc, mut tail, mut splits) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        if c > 0.0 {
            let arr = model.arrivals();
            let dt = delta / c;
            // arrival cells ((k-1) dt, k dt], k = 1..=m
            let tcells: Vec<(f64, f64)> =
                (1..=m).into_par_iter().map(|k| arr.cell_moments((k - 1) as f64 * dt, k as f64 * dt)).collect();
            vl = vec![0.0; m + 1];
            vr = vec![0.0; m + 1];
            for k in 0..=m {
                if k >= 1 {
                    let (f, s) = tcells[k - 1];
                    vl[k] = (1.0 - k as f64) * f + s / dt;
                }
                if k < m {
                    let (f, s) = tcells[k];
                    vr[k] = (k + 1) as f64 * f - s / dt;
                }
            }
            vc = vl.iter().zip(&vr).map(|(a, b)| a + b).collect();
            tail = (0..=m).map(|i| arr.tail((m - i) as f64 * dt)).collect();
            for a in jumps.atoms() {
                let ustar = -a.location;
                if !(ustar > 0.0 && ustar < b) {
                    continue;
                }
                let j = ((ustar / delta).floor() as usize).min(m - 1);
                let xj = j as f64 * delta;
                let xj1 = (j + 1) as f64 * delta;
                let w2 = xj1 - ustar;
                if w2 <= 1e-14 * delta {
                    continue;
                }
                let mut s = Split {
                    j,
                    ustar,
                    mass: a.mass,
                    theta: w2 / delta,
                    i1: vec![0.0; j + 1],
                    k0: vec![0.0; j + 1],
                    k1: vec![0.0; j + 1],
                    j1: vec![0.0; j + 1],
                };
                for i in 0..=j {
                    let x = i as f64 * delta;
                    s.i1[i] = linear_moment(model, x, 0.0, xj, ustar, xj, delta).1;
                    let (k0, k1) = linear_moment(model, x, 0.0, ustar, xj1, xj, delta);
                    s.k0[i] = k0;
                    s.k1[i] = k1;
                    s.j1[i] = linear_moment(model, x, 0.0, ustar, xj1, ustar, w2).1;
                }
                splits.push(s);
            }
        }
        Ok(FredholmOperator {
            model: model.clone(),
            m,
            b,
            delta,
            wl,
            wr,
            wc,
            atom_rows,
            up,
            low,
            vl,
            vr,
            vc,
            tail,
            splits,
        })
    }

    /// Number of grid cells.
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|i| i as f64 * self.delta).collect()
    }

    fn has_drift(&self) -> bool {
        !self.vc.is_empty()
    }

    /// Jump stage: `G_i = E N(x_i + J)` with exterior values `lo`, `hi`.
    fn jump_stage(&self, n: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        let m = self.m;
        (0..=m)
            .into_par_iter()
            .map(|i| {
                let off = m - i;
                let mut acc = self.wr[off] * n[0] + self.wl[2 * m - i] * n[m];
                let w = &self.wc[off + 1..off + m];
                acc += w.iter().zip(&n[1..m]).map(|(a, b)| a * b).sum::<f64>();
                for &(j, wt) in &self.atom_rows[i] {
                    acc += wt * n[j];
                }
                acc + self.up[i] * hi + self.low[i] * lo
            })
            .collect()
    }

    /// Arrival stage for positive drift.
    fn drift_stage(&self, g: &[f64], n: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        let m = self.m;
        let mut out: Vec<f64> = (0..=m)
            .into_par_iter()
            .map(|i| {
                if i == m {
                    return self.tail[m] * hi;
                }
                let mut acc = self.tail[i] * hi + self.vr[0] * g[i] + self.vl[m - i] * g[m];
                if i + 1 < m {
                    let w = &self.vc[1..m - i];
                    acc += w.iter().zip(&g[i + 1..m]).map(|(a, b)| a * b).sum::<f64>();
                }
                acc
            })
            .collect();
        for s in &self.splits {
            let (gp, n0) = self.split_values(s, n);
            let ml = s.mass * lo;
            for (i, o) in out.iter_mut().enumerate().take(s.j + 1) {
                *o += -(gp - ml) * s.i1[i] + s.mass * n0 * (s.k0[i] - s.j1[i]) + gp * s.j1[i]
                    - ml * (s.k0[i] - s.k1[i])
                    - gp * s.k1[i];
            }
        }
        out
    }

    /// Atom contribution to `G` at node `j + 1`, and `N_0`.
    fn split_values(&self, s: &Split, n: &[f64]) -> (f64, f64) {
        (s.mass * (n[0] * (1.0 - s.theta) + n[1] * s.theta), n[0])
    }

    /// `O N` with exterior values `lo` below zero and `hi` at or above `b`.
    pub fn apply(&self, n: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        assert_eq!(n.len(), self.m + 1, "grid vector has the wrong length");
        let g = self.jump_stage(n, lo, hi);
        if self.has_drift() {
            self.drift_stage(&g, n, lo, hi)
        } else {
            g
        }
    }

    /// The linear part of the operator (zero forcing).
    pub fn apply_homogeneous(&self, n: &[f64]) -> Vec<f64> {
        self.apply(n, 0.0, 0.0)
    }

    /// Value of the operator with `N = 0` inside: the case where the first
    /// event decides.
    pub fn initial_iterate(&self, lo: f64, hi: f64) -> Vec<f64> {
        (0..=self.m)
            .map(|i| {
                let t = if self.has_drift() { self.tail[i] } else { 0.0 };
                t * hi + (1.0 - t) * (self.up[i] * hi + self.low[i] * lo)
            })
            .collect()
    }

    /// Jump stage at an arbitrary level `u` in `[0, b]`.
    fn jump_stage_at(&self, n: &[f64], lo: f64, hi: f64, u: f64) -> f64 {
        let jumps = self.model.jumps();
        let (m, d) = (self.m, self.delta);
        let mut acc = 0.0;
        for (j, nj) in n.iter().enumerate() {
            let xj = j as f64 * d;
            if j > 0 {
                let (h, k) = jumps.continuous_cell_moments(xj - d - u, xj - u);
                acc += nj * ((u - (xj - d)) * h + k) / d;
            }
            if j < m {
                let (h, k) = jumps.continuous_cell_moments(xj - u, xj + d - u);
                acc += nj * ((xj + d - u) * h - k) / d;
            }
        }
        let (row, up, low) = atom_row(&self.model, u, self.b, d, m);
        for (j, w) in row {
            acc += w * n[j];
        }
        acc + (jumps.continuous_weight() - jumps.continuous_cdf(self.b - u) + up) * hi
            + (jumps.continuous_cdf(-u) + low) * lo
    }

    /// Piecewise-linear `G` on `[0, b]` as segments `(u0, u1, g(u0+), g(u1-))`,
    /// exact across the jumps caused by negative atoms.
    fn segments(&self, g: &[f64], n: &[f64], lo: f64) -> Vec<(f64, f64, f64, f64)> {
        let d = self.delta;
        let mut segs = Vec::with_capacity(self.m + 2 * self.splits.len());
        for j in 0..self.m {
            let (x0, x1) = (j as f64 * d, (j + 1) as f64 * d);
            let here: Vec<&Split> = self.splits.iter().filter(|s| s.j == j).collect();
            if here.is_empty() {
                segs.push((x0, x1, g[j], g[j + 1]));
                continue;
            }
            // G = non-atom part (linear) + exact atom parts
            let mut left = g[j];
            let mut right = g[j + 1];
            for s in &here {
                left -= s.mass * lo;
                right -= self.split_values(s, n).0;
            }
            let value = |u: f64, from_right: bool| {
                let mut v = left + (right - left) * (u - x0) / d;
                for s in &here {
                    let (gp, n0) = self.split_values(s, n);
                    if u < s.ustar || (u == s.ustar && !from_right) {
                        v += s.mass * lo;
                    } else {
                        v += s.mass * n0 + (gp - s.mass * n0) * (u - s.ustar) / (x1 - s.ustar);
                    }
                }
                v
            };
            let mut cuts: Vec<f64> = here.iter().map(|s| s.ustar).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = x0;
            for c in cuts.into_iter().chain(std::iter::once(x1)) {
                if c > prev {
                    segs.push((prev, c, value(prev, true), value(c, false)));
                }
                prev = c;
            }
        }
        segs
    }

    /// Escape probability at level `x` given elapsed time `z` since the last
    /// arrival, from grid values `n` (one extra operator application).
    pub(crate) fn evaluate(&self, n: &[f64], lo: f64, hi: f64, x: f64, z: f64) -> Result<f64> {
        if !self.has_drift() {
            return Ok(self.jump_stage_at(n, lo, hi, x));
        }
        let arr = self.model.arrivals();
        let z = if arr.exponential_rate().is_some() { 0.0 } else { z };
        let fz = arr.tail(z);
        if !(fz >= 1e-300) {
            return Err(EscapeError::TailUnderflow(z));
        }
        let c = self.model.drift();
        let g = self.jump_stage(n, lo, hi);
        let mut acc = arr.tail(z + (self.b - x) / c) * hi;
        for (u0, u1, v0, v1) in self.segments(&g, n, lo) {
            if u1 <= x {
                continue;
            }
            let a = u0.max(x);
            let slope = (v1 - v0) / (u1 - u0);
            let (f, s) = arr.cell_moments(z + (a - x) / c, z + (u1 - x) / c);
            let t_mom = s - z * f;
            acc += (v0 + slope * (x - u0)) * f + slope * c * t_mom;
        }
        Ok(acc / fz)
    }
}

/// Atom contributions at level `x`: interpolation weights on the grid,
/// mass landing at or above `b`, mass landing at or below zero.
fn atom_row(model: &ProcessModel, x: f64, b: f64, delta: f64, m: usize) -> (Vec<(usize, f64)>, f64, f64) {
    let mut row = Vec::new();
    let (mut up, mut low) = (0.0, 0.0);
    for a in model.jumps().atoms() {
        let z = x + a.location;
        if z >= b {
            up += a.mass;
        } else if z <= 0.0 {
            low += a.mass;
        } else {
            let jj = ((z / delta).floor() as usize).min(m - 1);
            let th = z / delta - jj as f64;
            row.push((jj, a.mass * (1.0 - th)));
            row.push((jj + 1, a.mass * th));
        }
    }
    (row, up, low)
}

/// For the arrival law seen from level `x` after elapsed time `z`, the mass
/// on the drift path segment `[u_lo, u_hi]` and `int (u - u0)/scale` over it.
fn linear_moment(model: &ProcessModel, x: f64, z: f64, u_lo: f64, u_hi: f64, u0: f64, scale: f64) -> (f64, f64) {
    let c = model.drift();
    let (f, s) = model.arrivals().cell_moments(z + (u_lo - x) / c, z + (u_hi - x) / c);
    let t_mom = s - z * f;
    (f, ((x - u0) * f + c * t_mom) / scale)
}
