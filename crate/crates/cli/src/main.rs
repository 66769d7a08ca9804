use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use escape_cli::commands;
use escape_cli::config::MethodName;
use escape_cli::{parse_config, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "escape", version, about = "Two-sided exit probabilities for renewal jump processes with drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability of leaving through the upper barrier from one level.
    Solve(Common),
    /// Probabilities over a grid of starting levels, as CSV.
    Sweep(Common),
    /// Monte Carlo estimate at one level, as CSV.
    Simulate(Common),
    /// Analytic, integral-equation and Monte Carlo values side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Largest accepted difference between deterministic methods.
        #[arg(long, default_value_t = 5e-4)]
        tolerance: f64,
    },
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Loads the config and applies command-line overrides before validation.
fn load(c: &Common) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&c.config)
        .map_err(|source| CliError::Io { path: c.config.display().to_string(), source })?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(obj) = doc.as_object_mut() {
        let query = obj.entry("query").or_insert_with(|| serde_json::json!({}));
        if let Some(q) = query.as_object_mut() {
            if let Some(x) = c.x {
                q.insert("x".into(), x.into());
                q.remove("x_grid");
            }
            if let Some(b) = c.b {
                q.insert("b".into(), b.into());
            }
        }
        if let Some(m) = c.method {
            obj.insert("method".into(), serde_json::to_value(format!("{m:?}").to_lowercase())?);
        }
        let mc = obj.entry("mc").or_insert_with(|| serde_json::json!({}));
        if let Some(mc) = mc.as_object_mut() {
            if let Some(p) = c.paths {
                mc.insert("paths".into(), p.into());
            }
            if let Some(s) = c.seed {
                mc.insert("seed".into(), s.into());
            }
        }
    }
    // schema errors are reported against the original text so line numbers match
    serde_json::from_str::<RunConfig>(&text)?;
    parse_config(&serde_json::to_string_pretty(&doc)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(c) => {
            let cfg = load(&c)?;
            commands::solve(&cfg, c.out.as_deref().or(cfg.output.path.as_deref()))
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            commands::sweep_cmd(&cfg, c.out.as_deref().or(cfg.output.path.as_deref()))
        }
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            commands::simulate(&cfg, c.out.as_deref().or(cfg.output.path.as_deref()))
        }
        Command::Compare { common, tolerance } => {
            let cfg = load(&common)?;
            commands::compare(&cfg, common.out.as_deref().or(cfg.output.path.as_deref()), tolerance)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
