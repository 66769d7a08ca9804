//! Run configuration: a JSON document with `model`, `query`, `numerics`,
//! `mc` and `output` blocks and an optional top-level `method`.

use std::path::PathBuf;

use escape_core::fredholm::FredholmOptions;
use escape_core::ratfun::RationalTransform;
use escape_core::{build_model, ArrivalSpec, Atom, JumpDensity, JumpSpec, Method, ProcessModel, SolveOptions};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub query: QueryConfig,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub drift: f64,
    pub arrivals: ArrivalConfig,
    pub jumps: JumpConfig,
}

/// Interarrival law. `type` is one of `exponential` (rate), `erlang`
/// (shape, rate), `hypoexponential` (rates), `hyperexponential` (p, rates)
/// or `rational` (Q, R: ascending coefficients of the Laplace transform
/// `R(s)/Q(s)`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalConfig {
    #[serde(rename = "type")]
    pub kind: String,
    pub rate: Option<f64>,
    pub rates: Option<Vec<f64>>,
    pub shape: Option<u32>,
    pub p: Option<f64>,
    #[serde(rename = "Q")]
    pub q: Option<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Option<Vec<f64>>,
}

/// Jump law. `type` is one of `exponential_negative` (rate), `laplace`
/// (rate), `double_exponential` (p, rate_pos, rate_neg, optional shifts),
/// `gamma_half_negative` (rate), `rational` (Q, R: ascending coefficients
/// of the moment generating function `R(s)/Q(s)`), `constant` (value) or
/// `atoms`. Any density type may carry extra `atoms`, in which case its
/// weight is one minus the atom masses.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    #[serde(rename = "type")]
    pub kind: String,
    pub rate: Option<f64>,
    pub p: Option<f64>,
    pub rate_pos: Option<f64>,
    pub rate_neg: Option<f64>,
    pub shift_pos: Option<f64>,
    pub shift_neg: Option<f64>,
    pub value: Option<f64>,
    pub atoms: Option<Vec<AtomConfig>>,
    #[serde(rename = "Q")]
    pub q: Option<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub location: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    #[serde(default)]
    pub a: f64,
    pub b: f64,
    pub x: Option<f64>,
    pub x_grid: Option<GridSpec>,
    #[serde(default)]
    pub z: f64,
}

/// Either explicit levels or `n` evenly spaced levels on `[from, to]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub from: f64,
    pub to: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Auto,
    Analytic,
    Fredholm,
    Mc,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Method {
        match m {
            MethodName::Auto => Method::Auto,
            MethodName::Analytic => Method::Analytic,
            MethodName::Fredholm => Method::Fredholm,
            MethodName::Mc => Method::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Contour nodes for numerical transform inversion.
    pub nodes: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let f = FredholmOptions::default();
        NumericsConfig { grid: f.grid, tol: f.tol, max_iter: f.max_iter, nodes: 64 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { paths: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn need<T: Copy>(v: Option<T>, field: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::field(field, "missing for this type"))
}

fn need_vec(v: &Option<Vec<f64>>, field: &str) -> Result<Vec<f64>, CliError> {
    v.clone().ok_or_else(|| CliError::field(field, "missing for this type"))
}

/// Rejects fields that the chosen `type` does not use.
fn only(present: &[(&str, bool)], allowed: &[&str], block: &str) -> Result<(), CliError> {
    for (name, set) in present {
        if *set && !allowed.contains(name) {
            return Err(CliError::field(&format!("{block}.{name}"), "not used by this type"));
        }
    }
    Ok(())
}

impl ArrivalConfig {
    pub fn to_spec(&self) -> Result<ArrivalSpec, CliError> {
        let present = [
            ("rate", self.rate.is_some()),
            ("rates", self.rates.is_some()),
            ("shape", self.shape.is_some()),
            ("p", self.p.is_some()),
            ("Q", self.q.is_some()),
            ("R", self.r.is_some()),
        ];
        let spec = match self.kind.as_str() {
            "exponential" => {
                only(&present, &["rate"], "model.arrivals")?;
                ArrivalSpec::Exponential { rate: need(self.rate, "model.arrivals.rate")? }
            }
            "erlang" => {
                only(&present, &["rate", "shape"], "model.arrivals")?;
                ArrivalSpec::Erlang { shape: need(self.shape, "model.arrivals.shape")?, rate: need(self.rate, "model.arrivals.rate")? }
            }
            "hypoexponential" => {
                only(&present, &["rates"], "model.arrivals")?;
                ArrivalSpec::Hypoexponential { rates: need_vec(&self.rates, "model.arrivals.rates")? }
            }
            "hyperexponential" => {
                only(&present, &["p", "rates"], "model.arrivals")?;
                let rates = need_vec(&self.rates, "model.arrivals.rates")?;
                if rates.len() != 2 {
                    return Err(CliError::field("model.arrivals.rates", "hyperexponential takes exactly two rates"));
                }
                ArrivalSpec::hyperexponential(need(self.p, "model.arrivals.p")?, rates[0], rates[1])?
            }
            "rational" => {
                only(&present, &["Q", "R"], "model.arrivals")?;
                let t = RationalTransform::new(need_vec(&self.q, "model.arrivals.Q")?, need_vec(&self.r, "model.arrivals.R")?)?;
                ArrivalSpec::RationalLT(t)
            }
            other => return Err(CliError::field("model.arrivals.type", format!("unknown arrival type `{other}`"))),
        };
        Ok(spec)
    }
}

impl JumpConfig {
    pub fn to_spec(&self) -> Result<JumpSpec, CliError> {
        let present = [
            ("rate", self.rate.is_some()),
            ("p", self.p.is_some()),
            ("rate_pos", self.rate_pos.is_some()),
            ("rate_neg", self.rate_neg.is_some()),
            ("shift_pos", self.shift_pos.is_some()),
            ("shift_neg", self.shift_neg.is_some()),
            ("value", self.value.is_some()),
            ("Q", self.q.is_some()),
            ("R", self.r.is_some()),
        ];
        let atoms: Vec<Atom> =
            self.atoms.iter().flatten().map(|a| Atom { location: a.location, mass: a.mass }).collect();
        let density = match self.kind.as_str() {
            "exponential_negative" => {
                only(&present, &["rate"], "model.jumps")?;
                JumpDensity::ExponentialNegative { rate: need(self.rate, "model.jumps.rate")? }
            }
            "laplace" => {
                only(&present, &["rate"], "model.jumps")?;
                JumpDensity::Laplace { rate: need(self.rate, "model.jumps.rate")? }
            }
            "gamma_half_negative" => {
                only(&present, &["rate"], "model.jumps")?;
                JumpDensity::GammaHalfNegative { rate: need(self.rate, "model.jumps.rate")? }
            }
            "double_exponential" => {
                only(&present, &["p", "rate_pos", "rate_neg", "shift_pos", "shift_neg"], "model.jumps")?;
                JumpDensity::DoubleExponential {
                    p: need(self.p, "model.jumps.p")?,
                    rate_pos: need(self.rate_pos, "model.jumps.rate_pos")?,
                    rate_neg: need(self.rate_neg, "model.jumps.rate_neg")?,
                    shift_pos: self.shift_pos.unwrap_or(0.0),
                    shift_neg: self.shift_neg.unwrap_or(0.0),
                }
            }
            "rational" => {
                only(&present, &["Q", "R"], "model.jumps")?;
                let t = RationalTransform::new(need_vec(&self.q, "model.jumps.Q")?, need_vec(&self.r, "model.jumps.R")?)?;
                JumpDensity::RationalCf(t)
            }
            "constant" => {
                only(&present, &["value"], "model.jumps")?;
                if !atoms.is_empty() {
                    return Err(CliError::field("model.jumps.atoms", "not used by type `constant`"));
                }
                return Ok(JumpSpec::constant(need(self.value, "model.jumps.value")?));
            }
            "atoms" => {
                only(&present, &[], "model.jumps")?;
                if atoms.is_empty() {
                    return Err(CliError::field("model.jumps.atoms", "at least one atom is required"));
                }
                return Ok(JumpSpec::atoms(atoms));
            }
            other => return Err(CliError::field("model.jumps.type", format!("unknown jump type `{other}`"))),
        };
        Ok(JumpSpec { atoms, density: Some(density) })
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        let q = &self.query;
        if !(q.a.is_finite() && q.b.is_finite()) || q.a >= q.b {
            return Err(CliError::Range(format!("need a < b, got a = {}, b = {}", q.a, q.b)));
        }
        if let Some(x) = q.x {
            if !(q.a < x && x < q.b) {
                return Err(CliError::Range(format!("need a < x < b, got x = {x} on ({}, {})", q.a, q.b)));
            }
        }
        if let Some(g) = &q.x_grid {
            for x in g.points()? {
                if !(q.a <= x && x <= q.b) {
                    return Err(CliError::Range(format!("grid level {x} outside [{}, {}]", q.a, q.b)));
                }
            }
        }
        if !(q.z >= 0.0 && q.z.is_finite()) {
            return Err(CliError::field("query.z", "must be finite and nonnegative"));
        }
        let n = &self.numerics;
        if n.grid < 2 {
            return Err(CliError::field("numerics.grid", "needs at least 2 cells"));
        }
        if !(n.tol > 0.0) {
            return Err(CliError::field("numerics.tol", "must be positive"));
        }
        if n.max_iter == 0 {
            return Err(CliError::field("numerics.max_iter", "must be positive"));
        }
        if n.nodes < 8 {
            return Err(CliError::field("numerics.nodes", "needs at least 8 nodes"));
        }
        if self.mc.paths == 0 {
            return Err(CliError::field("mc.paths", "must be positive"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ProcessModel, CliError> {
        let m = &self.model;
        Ok(build_model(m.drift, m.arrivals.to_spec()?, m.jumps.to_spec()?)?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            fredholm: FredholmOptions { grid: self.numerics.grid, tol: self.numerics.tol, max_iter: self.numerics.max_iter },
            mc_paths: self.mc.paths,
            seed: self.mc.seed,
        }
    }

    /// Levels for grid commands: `x_grid`, else `x`, else 11 levels on `[a, b]`.
    pub fn levels(&self) -> Result<Vec<f64>, CliError> {
        let q = &self.query;
        match (&q.x_grid, q.x) {
            (Some(g), _) => g.points(),
            (None, Some(x)) => Ok(vec![x]),
            (None, None) => Ok(RangeSpec { from: q.a, to: q.b, n: 11 }.points()),
        }
    }

    pub fn single_level(&self) -> Result<f64, CliError> {
        self.query.x.ok_or_else(|| CliError::field("query.x", "required for this command (or pass --x)"))
    }
}

impl RangeSpec {
    fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.from];
        }
        let last = (self.n - 1) as f64;
        (0..self.n).map(|i| if i + 1 == self.n { self.to } else { self.from + (self.to - self.from) * i as f64 / last }).collect()
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        match self {
            GridSpec::Points(p) if p.is_empty() => Err(CliError::field("query.x_grid", "is empty")),
            GridSpec::Points(p) => Ok(p.clone()),
            GridSpec::Range(r) if r.n == 0 => Err(CliError::field("query.x_grid.n", "must be positive")),
            GridSpec::Range(r) => Ok(r.points()),
        }
    }
}
