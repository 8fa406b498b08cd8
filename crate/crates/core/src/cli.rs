//! Command-line front end: `tw`, `solve`, `mc` and `check`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::{RunConfig, RunConfigError, ValidRun};
use crate::diagnostics::{check_invariants, DiagnosticsReport};
use crate::mc::{compare_mc_pde, price_bond_mc, McComparison, McConfig, McError, McResult};
use crate::model::{DerivedConstants, ModelParams};
use crate::output::{write_csv, write_json};
use crate::solver::{
    run_solver, Grid, MatrixStats, SolutionField, SolveError, SolverConfig, StepExtremes,
};
use crate::traveling_wave::TravelingWave;

#[derive(Debug, Parser)]
#[command(name = "credit-fbp", version, about = "Defaultable bond with rating migration: traveling wave, PDE solve, Monte Carlo check")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the traveling wave.
    Tw(CommonArgs),
    /// Solve the evolution problem and write snapshots, errors and boundaries.
    Solve(CommonArgs),
    /// Price by Monte Carlo on boundaries from a fresh solve.
    Mc(CommonArgs),
    /// Solve and print the invariant table; exit 0 iff everything holds.
    Check(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML config; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Comma-separated snapshot times, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// Monte Carlo seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] RunConfigError),
    #[error("solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error("monte carlo failed: {0}")]
    Mc(#[from] McError),
    #[error("invariants failed: {}", .0.join(", "))]
    Invariants(Vec<&'static str>),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Solve(_) | CliError::Mc(_) => 4,
            CliError::Invariants(_) => 5,
            CliError::Io { .. } => 6,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads the config file and applies command-line overrides.
pub fn load_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(ts) = &args.snapshots {
        cfg.output.snapshot_times = Some(ts.clone());
    }
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    Ok(cfg)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

#[derive(Debug, Serialize)]
struct TwMeta {
    params: ModelParams,
    kappa_star: f64,
    eta_star: f64,
    psi_inverse_gamma: f64,
    c_l: f64,
    c_h: f64,
    c: f64,
    samples: usize,
}

/// Writes `tw.csv` (xi, K, u_tw, dK) and `tw_meta.json`.
pub fn cmd_tw(cfg: &RunConfig, out_dir: &Path) -> Result<TravelingWave, CliError> {
    let run = cfg.validate()?;
    prepare_dir(out_dir)?;
    let tw = run.wave;
    let o = &run.output;
    let n = o.tw_samples;
    let rows = (0..n).map(|i| {
        let xi = if i + 1 == n {
            o.tw_xi_max
        } else {
            o.tw_xi_min + (o.tw_xi_max - o.tw_xi_min) * i as f64 / (n - 1) as f64
        };
        [xi, tw.value(xi), tw.u_value(xi), tw.derivative(xi)]
    });
    let path = out_dir.join("tw.csv");
    write_csv(&path, &["xi", "K", "u_tw", "dK"], rows).map_err(io_err(&path))?;
    let DerivedConstants { c_l, c_h, c } = tw.constants;
    let meta = TwMeta {
        params: *run.params.raw(),
        kappa_star: tw.kappa_star,
        eta_star: tw.eta_star,
        psi_inverse_gamma: tw.gap,
        c_l,
        c_h,
        c,
        samples: n,
    };
    let path = out_dir.join("tw_meta.json");
    write_json(&path, &meta).map_err(io_err(&path))?;
    Ok(tw)
}

#[derive(Debug, Serialize)]
struct SolveMeta<'a> {
    params: ModelParams,
    grid: Grid,
    solver: SolverConfig,
    matrix: MatrixStats,
    extremes: StepExtremes,
    report: &'a DiagnosticsReport,
}

/// Result of a solve together with its invariant report.
#[derive(Debug)]
pub struct SolveOutput {
    pub field: SolutionField,
    pub report: DiagnosticsReport,
}

fn solve(run: &ValidRun) -> Result<SolveOutput, CliError> {
    let field = run_solver(&run.params, &run.grid, &run.solver, &run.snapshot_times)?;
    let report = check_invariants(&field, &run.wave, &run.solver);
    Ok(SolveOutput { field, report })
}

fn trace_rows(n: usize, every: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&i| i % every == 0 || i + 1 == n)
}

/// Writes `snapshots.csv`, `error.csv`, `boundaries.csv` and
/// `diagnostics.json`. The files are written even when an invariant fails;
/// the failure is then reported as an error.
pub fn cmd_solve(cfg: &RunConfig, out_dir: &Path) -> Result<SolveOutput, CliError> {
    let run = cfg.validate()?;
    prepare_dir(out_dir)?;
    let out = solve(&run)?;
    let field = &out.field;
    let nodes = field.grid.nodes();

    let path = out_dir.join("snapshots.csv");
    let rows = field
        .snapshots
        .iter()
        .flat_map(|s| nodes.iter().zip(&s.values).map(move |(&x, &u)| [s.t, x, u]));
    write_csv(&path, &["t", "xi", "u"], rows).map_err(io_err(&path))?;

    let every = run.output.trace_every;
    let tr = &field.trace;
    let path = out_dir.join("error.csv");
    let rows = trace_rows(tr.len(), every).map(|i| [tr.times[i], field.sup_error[i]]);
    write_csv(&path, &["t", "sup_error"], rows).map_err(io_err(&path))?;

    let path = out_dir.join("boundaries.csv");
    let rows = trace_rows(tr.len(), every).map(|i| [tr.times[i], tr.kappa_hat[i], tr.eta_hat[i]]);
    write_csv(&path, &["t", "kappa_hat", "eta_hat"], rows).map_err(io_err(&path))?;

    let meta = SolveMeta {
        params: *run.params.raw(),
        grid: field.grid,
        solver: run.solver,
        matrix: field.matrix,
        extremes: field.extremes,
        report: &out.report,
    };
    let path = out_dir.join("diagnostics.json");
    write_json(&path, &meta).map_err(io_err(&path))?;

    if !out.report.all_passed() {
        return Err(CliError::Invariants(out.report.failures().map(|c| c.name).collect()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub config: McConfig,
    pub xi0: f64,
    pub start_regime: &'static str,
    pub kappa_hat_at_maturity: f64,
    pub eta_hat_at_maturity: f64,
    pub pde_price: f64,
    pub result: McResult,
    pub comparison: McComparison,
}

/// Solves up to the bond maturity, prices by Monte Carlo on the resulting
/// boundaries and writes `mc.json`.
pub fn cmd_mc(cfg: &RunConfig, out_dir: &Path) -> Result<McReport, CliError> {
    let run = cfg.validate()?;
    let grid = run
        .grid_config
        .build_until(run.mc.maturity)
        .map_err(RunConfigError::from)?;
    if (grid.final_time() - run.mc.maturity).abs() > 1e-9 * run.mc.maturity.max(1.0) {
        return Err(RunConfigError::Output(format!(
            "mc maturity {} is not a multiple of dt = {}",
            run.mc.maturity, grid.dt
        ))
        .into());
    }
    prepare_dir(out_dir)?;
    let field = run_solver(&run.params, &grid, &run.solver, &[])?;
    let p = &run.params;
    let xi0 = run.mc.xi0(p);
    let u = field.final_value_at(xi0).ok_or_else(|| {
        RunConfigError::Output(format!("log-moneyness {xi0} of s0 lies outside the grid"))
    })?;
    let pde_price = (-p.r() * run.mc.maturity).exp() * u;
    let result = price_bond_mc(p, &field.trace, &run.mc)?;
    let (kappa, eta) = field.trace.at(run.mc.maturity);
    let report = McReport {
        config: run.mc,
        xi0,
        start_regime: if xi0 > eta { "high" } else { "low" },
        kappa_hat_at_maturity: kappa,
        eta_hat_at_maturity: eta,
        pde_price,
        result,
        comparison: compare_mc_pde(&result, pde_price),
    };
    let path = out_dir.join("mc.json");
    write_json(&path, &report).map_err(io_err(&path))?;
    Ok(report)
}

/// Fresh solve with the invariant table printed; no files are written.
pub fn cmd_check(cfg: &RunConfig) -> Result<DiagnosticsReport, CliError> {
    let run = cfg.validate()?;
    let out = solve(&run)?;
    print!("{}", out.report.table());
    if !out.report.all_passed() {
        return Err(CliError::Invariants(out.report.failures().map(|c| c.name).collect()));
    }
    Ok(out.report)
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Tw(a) => {
            let tw = cmd_tw(&load_config(a)?, &a.out_dir)?;
            println!("kappa* = {:.12}  eta* = {:.12}", tw.kappa_star, tw.eta_star);
        }
        Command::Solve(a) => {
            let out = cmd_solve(&load_config(a)?, &a.out_dir)?;
            let b = out.report.boundaries;
            println!(
                "t = {}  sup error = {:.6e}  kappa_hat = {:.6}  eta_hat = {:.6}",
                b.t_final, out.report.sup_error.last, b.kappa_hat, b.eta_hat
            );
        }
        Command::Mc(a) => {
            let r = cmd_mc(&load_config(a)?, &a.out_dir)?;
            println!(
                "mc = {:.8} +/- {:.2e}  pde = {:.8}  z = {:.3}",
                r.result.price, r.result.std_error, r.pde_price, r.comparison.z_score
            );
        }
        Command::Check(a) => {
            cmd_check(&load_config(a)?)?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> ExitCode {
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
