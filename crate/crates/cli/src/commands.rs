use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use escape_core::mc::{estimate_conditional_ep, estimate_ep};
use escape_core::{sweep, EscapeResult, Method, Solver};

use crate::config::RunConfig;
use crate::error::CliError;

/// Lossless text form of a float (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).map_err(|source| CliError::Io { path: p.display().to_string(), source })?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn method(cfg: &RunConfig) -> Method {
    cfg.method.into()
}

/// Single probability. Prints a summary; writes a one-row CSV when an
/// output path is set.
pub fn solve(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let x = cfg.single_level()?;
    let q = &cfg.query;
    let solver = Solver::new(&model, q.a, q.b, cfg.solve_options())?;
    let r = solver.eval(x, q.z, method(cfg))?;
    println!("N({}) = {} ± {:.3e}", x, fmt_f64(r.probability), r.error_bound);
    println!("route = {}", r.route);
    println!("solved_by = {:?}", r.solved_by);
    for d in &r.diagnostics {
        println!("note: {d}");
    }
    if let Some(p) = out {
        write_results(&[r], Some(p))?;
    }
    Ok(())
}

const SWEEP_HEADER: [&str; 5] = ["x", "N", "route", "err", "solved_by"];

fn write_results(rows: &[EscapeResult], out: Option<&Path>) -> Result<(), CliError> {
    let mut w = writer(out)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.x),
            fmt_f64(r.probability),
            r.route.to_string(),
            fmt_f64(r.error_bound),
            format!("{:?}", r.solved_by),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io { path: "output".into(), source })?;
    Ok(())
}

pub fn sweep_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let q = &cfg.query;
    let rows = sweep(&model, q.a, q.b, &cfg.levels()?, q.z, method(cfg), &cfg.solve_options())?;
    write_results(&rows, out)
}

/// Re-emits a sweep CSV in canonical form; used to check round trips.
pub fn reemit_sweep(input: &str) -> Result<String, CliError> {
    let mut r = csv::Reader::from_reader(input.as_bytes());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(r.headers()?)?;
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<String, CliError> {
            let v: f64 = rec[i].parse().map_err(|_| CliError::Range(format!("bad number `{}`", &rec[i])))?;
            Ok(fmt_f64(v))
        };
        w.write_record([num(0)?, num(1)?, rec[2].to_string(), num(3)?, rec[4].to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io { path: "buffer".into(), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let q = &cfg.query;
    let x = cfg.single_level()?;
    let est = if q.z > 0.0 {
        estimate_conditional_ep(&model, x, q.a, q.b, q.z, cfg.mc.paths, cfg.mc.seed)?
    } else {
        estimate_ep(&model, x, q.a, q.b, cfg.mc.paths, cfg.mc.seed)?
    };
    let mut w = writer(out)?;
    w.write_record(["x", "value", "stderr", "ci_low", "ci_high", "n_paths", "censored", "seed"])?;
    w.write_record([
        fmt_f64(x),
        fmt_f64(est.value),
        fmt_f64(est.stderr),
        fmt_f64(est.ci95.0),
        fmt_f64(est.ci95.1),
        est.n_paths.to_string(),
        est.censored.to_string(),
        est.seed.to_string(),
    ])?;
    w.flush().map_err(|source| CliError::Io { path: "output".into(), source })?;
    Ok(())
}

/// One row of a cross-method comparison.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub x: f64,
    pub analytic: Option<f64>,
    pub fredholm: f64,
    pub mc: f64,
    pub mc_stderr: f64,
    pub max_diff: f64,
    pub agrees: bool,
}

/// Pairs involving the simulation only fail beyond four standard errors.
pub fn compare_row(x: f64, analytic: Option<f64>, fredholm: f64, mc: f64, mc_stderr: f64, tol: f64) -> CompareRow {
    let mc_tol = tol.max(4.0 * mc_stderr);
    let mut max_diff = (fredholm - mc).abs();
    let mut agrees = max_diff <= mc_tol;
    if let Some(a) = analytic {
        let af = (a - fredholm).abs();
        let am = (a - mc).abs();
        max_diff = max_diff.max(af).max(am);
        agrees &= af <= tol && am <= mc_tol;
    }
    CompareRow { x, analytic, fredholm, mc, mc_stderr, max_diff, agrees }
}

pub fn compare(cfg: &RunConfig, out: Option<&Path>, tol: f64) -> Result<(), CliError> {
    let model = cfg.model()?;
    let q = &cfg.query;
    let solver = Solver::new(&model, q.a, q.b, cfg.solve_options())?;
    let mut rows = Vec::new();
    for x in cfg.levels()? {
        let analytic = match solver.eval(x, q.z, Method::Analytic) {
            Ok(r) => Some(r.probability),
            Err(e) => {
                eprintln!("note: no analytic value at x = {x}: {e}");
                None
            }
        };
        let fredholm = solver.eval(x, q.z, Method::Fredholm)?.probability;
        let mc = solver.eval(x, q.z, Method::MonteCarlo)?;
        rows.push(compare_row(x, analytic, fredholm, mc.probability, mc.error_bound, tol));
    }
    let mut w = writer(out)?;
    w.write_record(["x", "analytic", "fredholm", "mc", "mc_stderr", "max_pairwise_diff"])?;
    for r in &rows {
        w.write_record([
            fmt_f64(r.x),
            opt_f64(r.analytic),
            fmt_f64(r.fredholm),
            fmt_f64(r.mc),
            fmt_f64(r.mc_stderr),
            fmt_f64(r.max_diff),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io { path: "output".into(), source })?;
    let bad = rows.iter().filter(|r| !r.agrees).count();
    if bad > 0 {
        return Err(CliError::Mismatch(bad, rows.len()));
    }
    Ok(())
}
