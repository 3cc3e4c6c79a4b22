//! Command-line front end: strict JSON configs, the five subcommands and
//! the files they write.
//!
//! Exit codes: 0 success, 1 usage/config/IO error (or a feasible sweep point
//! with a positive abscissa), 2 parameters outside the proved decay regimes
//! (`check` only).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::discretization::{assemble, initial_state, Mesh};
use crate::error::{Error, Result};
use crate::functionals::{check_epsilon, epsilon_search, fit_energy_decay, MONOTONE_TOL};
use crate::output::{
    eigenvalue_plot_script, eigenvalues_csv, energy_csv, energy_plot_script, fmt_f64,
    sweep_plot_script,
};
use crate::params::{classify_case, resolve_xi, DomainConstants, StabilityVerdict, SystemParams};
use crate::simulate::{integrate, IntegrateOptions, TimeGrid, Trajectory, DEFAULT_STRIDE};
use crate::spectral::{
    dissipativity_certificate, matrix_spectrum, spectrum, SpectrumReport, DEFAULT_DENSE_CAP,
};
use crate::sweep::{
    alpha_monotonicity_violations, check_feasible_stability, run_sweep, sweep_csv,
    sweep_errors_csv, ParamName, SweepMesh, SweepPlan, SweepRecord, SweepTime,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;

const DEFAULT_OUT: &str = "out";
const CERTIFICATE_SAMPLES: usize = 64;

#[derive(Debug, Parser)]
#[command(
    name = "kvdelay",
    version,
    about = "Kelvin-Voigt wave equation with delayed boundary feedback"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (JSON); the sweep plan for `sweep`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, overriding the config's `outputs`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed for randomized checks, overriding the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for `sweep` (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the parameters and print the admissible xi interval.
    Check,
    /// Integrate the discrete system and write energy histories.
    Simulate,
    /// Eigenvalues of the discrete generator.
    Spectrum {
        /// Read a dense matrix (JSON array of rows) instead of assembling.
        #[arg(long, hide = true)]
        debug_matrix: Option<PathBuf>,
    },
    /// Parameter sweep from a plan file.
    Sweep,
    /// Trace and Poincaré constants with a mesh-doubling table.
    Constants {
        /// Rows in the refinement table.
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
}

/// Initial data `u0 = a·sin(πx/2L)`, `u1 = b·sin(πx/2L)`, constant history
/// `f0 = c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default = "one")]
    pub u0_amplitude: f64,
    #[serde(default)]
    pub u1_amplitude: f64,
    #[serde(default)]
    pub f0_amplitude: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            u0_amplitude: 1.0,
            u1_amplitude: 0.0,
            f0_amplitude: 0.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

fn default_cap() -> usize {
    DEFAULT_DENSE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SystemParams,
    pub mesh: SweepMesh,
    #[serde(default)]
    pub time: Option<SweepTime>,
    /// Lyapunov weight; searched on the run itself when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialData,
    /// Snapshot stride for `states.csv`.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Decay-fit window, default `[t_end/10, t_end]`.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default = "default_cap")]
    pub dense_cap: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.mesh()?;
        if let Some(t) = self.time {
            self.grid_for(&t)?;
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::Config(format!("epsilon must be >= 0, got {eps}")));
            }
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if let Some((a, b)) = self.fit_window {
            if !(a < b) {
                return Err(Error::Config(format!(
                    "fit_window needs start < end, got [{a}, {b}]"
                )));
            }
        }
        let i = self.initial;
        if ![i.u0_amplitude, i.u1_amplitude, i.f0_amplitude]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::Config("initial amplitudes must be finite".into()));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Ok(
            Mesh::new(self.params.length, self.mesh.n_cells, self.mesh.n_rho)?
                .lumped(self.mesh.lumped),
        )
    }

    fn grid_for(&self, t: &SweepTime) -> Result<TimeGrid> {
        let dt =
            t.dt.unwrap_or(self.params.tau / (2.0 * self.mesh.n_rho as f64));
        TimeGrid::new(dt, t.t_end, t.theta)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let t = self
            .time
            .ok_or_else(|| Error::Config("`time` section is required here".into()))?;
        self.grid_for(&t)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Runs a parsed command line; errors are printed and map to exit 1.
pub fn run(cli: &Cli) -> u8 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Check => cmd_check(cli, &load_config(cli)?),
        Command::Simulate => cmd_simulate(cli, &load_config(cli)?),
        Command::Spectrum { debug_matrix } => cmd_spectrum(cli, debug_matrix.as_deref()),
        Command::Sweep => cmd_sweep(cli),
        Command::Constants { levels } => cmd_constants(cli, &load_config(cli)?, *levels),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    RunConfig::load(path)
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.outputs.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn write_manifest(dir: &Path, command: &str, seed: u64, config: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config": config,
    });
    write(
        dir,
        "manifest.json",
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )
}

fn interval_str(v: &StabilityVerdict) -> String {
    let close = if v.high_is_strict { ')' } else { ']' };
    format!("[{}, {}{close}", fmt_f64(v.xi_low), fmt_f64(v.xi_high))
}

/// Classification with the ξ to assemble with filled in.
fn resolved(cfg: &RunConfig) -> Result<(DomainConstants, StabilityVerdict, SystemParams)> {
    let constants = DomainConstants::compute(cfg.params.length, cfg.mesh.n_cells)?;
    let verdict = classify_case(&cfg.params, &constants)?;
    let params = cfg.params.with_xi(resolve_xi(&cfg.params, &verdict));
    Ok((constants, verdict, params))
}

pub fn cmd_check(cli: &Cli, cfg: &RunConfig) -> Result<u8> {
    let constants = DomainConstants::compute(cfg.params.length, cfg.mesh.n_cells)?;
    let verdict = match classify_case(&cfg.params, &constants) {
        Ok(v) => v,
        Err(e @ Error::XiOutsideInterval { .. }) => {
            println!("case: not admissible");
            println!("{e}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e),
    };
    let chosen = crate::params::choose_xi(&verdict, crate::params::XiPolicy::Midpoint).ok();
    let chosen = verdict.chosen_xi.or(chosen);
    println!("case: {}", verdict.case_tag);
    println!("xi interval: {}", interval_str(&verdict));
    match chosen {
        Some(xi) => println!("chosen xi: {}", fmt_f64(xi)),
        None => println!("chosen xi: none"),
    }
    println!("B = {}", fmt_f64(constants.trace_b));
    println!("C(Omega) = {}", fmt_f64(constants.poincare_c));
    let block = json!({
        "case": verdict.case_tag.as_str(),
        "feasible": verdict.case_tag.is_feasible(),
        "xi_low": verdict.xi_low,
        "xi_high": verdict.xi_high,
        "high_is_strict": verdict.high_is_strict,
        "chosen_xi": chosen,
        "trace_b": constants.trace_b,
        "poincare_c": constants.poincare_c,
    });
    println!("{}", serde_json::to_string_pretty(&block)?);
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        write_manifest(
            dir,
            "check",
            cli.seed.unwrap_or(cfg.seed),
            serde_json::to_value(cfg)?,
        )?;
    }
    Ok(if verdict.case_tag.is_feasible() {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

fn states_csv(traj: &Trajectory, mesh: &Mesh) -> String {
    use std::fmt::Write as _;
    let nodes = mesh.nodes();
    let mut out = String::from("t,x,u,v\n");
    for snap in &traj.snapshots {
        let t = fmt_f64(snap.t);
        let _ = writeln!(out, "{t},0,0,0");
        for ((x, u), v) in nodes.iter().skip(1).zip(&snap.state.u).zip(&snap.state.v) {
            let _ = writeln!(out, "{t},{},{},{}", fmt_f64(*x), fmt_f64(*u), fmt_f64(*v));
        }
    }
    out
}

fn delay_csv(traj: &Trajectory, mesh: &Mesh) -> String {
    use std::fmt::Write as _;
    let rho = mesh.rho_nodes();
    let mut out = String::from("t,rho,z\n");
    for snap in &traj.snapshots {
        let t = fmt_f64(snap.t);
        for (r, z) in rho.iter().zip(&snap.state.z) {
            let _ = writeln!(out, "{t},{},{}", fmt_f64(*r), fmt_f64(*z));
        }
    }
    out
}

pub fn cmd_simulate(cli: &Cli, cfg: &RunConfig) -> Result<u8> {
    let grid = cfg.grid()?;
    let (_, verdict, params) = resolved(cfg)?;
    let mesh = cfg.mesh()?;
    let pair = assemble(&params, &mesh)?;
    let l = params.length;
    let shape = move |x: f64| (std::f64::consts::FRAC_PI_2 * x / l).sin();
    let init = cfg.initial;
    let initial = initial_state(
        |x| init.u0_amplitude * shape(x),
        |x| init.u1_amplitude * shape(x),
        |_, _| init.f0_amplitude,
        params.tau,
        &mesh,
    )?;
    let mut traj = integrate(
        &initial,
        &pair,
        &grid,
        IntegrateOptions {
            stride: cfg.stride,
            epsilon: cfg.epsilon.unwrap_or(0.0),
        },
    )?;

    let epsilon = match cfg.epsilon {
        Some(eps) => check_epsilon(&traj.samples, eps)
            .map(|c| (eps, Some(c)))
            .unwrap_or((eps, None)),
        None => match epsilon_search(&pair, &params, &mesh, &traj) {
            Ok(c) => {
                traj.set_epsilon(c.epsilon);
                (c.epsilon, Some(c))
            }
            Err(e) => {
                eprintln!("warning: {e}; L is reported with epsilon = 0");
                (0.0, None)
            }
        },
    };

    let window = cfg.fit_window.unwrap_or((grid.t_end / 10.0, grid.t_end));
    let fit = fit_energy_decay(&traj.samples, window);
    let monotone = traj
        .samples
        .windows(2)
        .all(|w| w[1].energy <= w[0].energy * (1.0 + MONOTONE_TOL));
    let max_residual = traj
        .samples
        .iter()
        .map(|s| s.de_residual)
        .fold(0.0, f64::max);
    let e0 = traj.samples.first().map_or(0.0, |s| s.energy);

    let fit_json = match &fit {
        Ok(f) => json!({
            "gamma_hat": f.gamma_hat,
            "C_hat": f.c_hat,
            "r_squared": f.r_squared,
            "window": [f.window.0, f.window.1],
        }),
        Err(e) => json!({ "error": e.to_string(), "window": [window.0, window.1] }),
    };
    let report = json!({
        "case": verdict.case_tag.as_str(),
        "xi": params.xi,
        "dt": grid.dt,
        "n_steps": grid.n_steps(),
        "fit": fit_json,
        "epsilon": epsilon.0,
        "beta1": epsilon.1.map(|c| c.beta1),
        "beta2": epsilon.1.map(|c| c.beta2),
        "energy_monotone": monotone,
        "max_de_residual": max_residual,
        "initial_energy": e0,
    });

    let dir = out_dir(cli, Some(cfg))?;
    write(&dir, "energy.csv", &energy_csv(&traj.samples))?;
    write(&dir, "states.csv", &states_csv(&traj, &mesh))?;
    write(&dir, "delay.csv", &delay_csv(&traj, &mesh))?;
    write(
        &dir,
        "fit.json",
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    write(&dir, "energy.gp", &energy_plot_script("energy.csv"))?;
    write_manifest(
        &dir,
        "simulate",
        cli.seed.unwrap_or(cfg.seed),
        serde_json::to_value(cfg)?,
    )?;

    println!(
        "case: {}  xi = {}",
        verdict.case_tag,
        fmt_f64(params.xi.unwrap_or(f64::NAN))
    );
    match &fit {
        Ok(f) => println!(
            "gamma_hat = {}  C_hat = {}  r^2 = {}",
            fmt_f64(f.gamma_hat),
            fmt_f64(f.c_hat),
            fmt_f64(f.r_squared)
        ),
        Err(e) => println!("no decay fit: {e}"),
    }
    println!("energy nonincreasing: {monotone}");
    println!("max dE residual = {}", fmt_f64(max_residual));
    println!("wrote {}", dir.display());
    Ok(EXIT_OK)
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!(
            "{}: expected a square matrix",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn emit_spectrum(dir: &Path, report: &SpectrumReport) -> Result<()> {
    write(dir, "eigenvalues.csv", &eigenvalues_csv(report))?;
    write(
        dir,
        "eigenvalues.gp",
        &eigenvalue_plot_script("eigenvalues.csv"),
    )
}

pub fn cmd_spectrum(cli: &Cli, debug_matrix: Option<&Path>) -> Result<u8> {
    if let Some(path) = debug_matrix {
        let a = read_matrix(path)?;
        let report = matrix_spectrum(&a, DEFAULT_DENSE_CAP)?;
        let dir = out_dir(cli, None)?;
        emit_spectrum(&dir, &report)?;
        write_manifest(
            &dir,
            "spectrum",
            cli.seed.unwrap_or(0),
            json!({ "debug_matrix": path }),
        )?;
        println!("abscissa = {}", fmt_f64(report.abscissa));
        return Ok(EXIT_OK);
    }
    let cfg = load_config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let (_, verdict, params) = resolved(&cfg)?;
    let mesh = cfg.mesh()?;
    let pair = assemble(&params, &mesh)?;
    let report = spectrum(&pair, cfg.dense_cap)?;
    let cert = dissipativity_certificate(&pair, CERTIFICATE_SAMPLES, seed)?;
    let dir = out_dir(cli, Some(&cfg))?;
    emit_spectrum(&dir, &report)?;
    write_manifest(&dir, "spectrum", seed, serde_json::to_value(&cfg)?)?;
    println!(
        "case: {}  xi = {}",
        verdict.case_tag,
        fmt_f64(params.xi.unwrap_or(f64::NAN))
    );
    println!("abscissa = {}", fmt_f64(report.abscissa));
    println!("unstable eigenvalues: {}", report.n_unstable);
    println!(
        "max <Av,v>_G/|v|^2: exact {}  sampled {}",
        fmt_f64(cert.exact_max),
        fmt_f64(cert.sampled_max)
    );
    Ok(EXIT_OK)
}

fn sweep_column(name: ParamName) -> Option<usize> {
    match name {
        ParamName::Mu1 => Some(1),
        ParamName::Mu2 => Some(2),
        ParamName::Alpha => Some(3),
        ParamName::Tau => Some(4),
        ParamName::Length => None,
    }
}

fn sweep_plot(plan: &SweepPlan) -> String {
    let cols: Vec<(usize, &str)> = plan
        .axes
        .iter()
        .filter_map(|a| sweep_column(a.name).map(|c| (c, a.name.as_str())))
        .collect();
    let (x, y) = match cols.as_slice() {
        [] => ((3, "alpha"), (7, "abscissa")),
        [x] => (*x, (7, "abscissa")),
        [x, y, ..] => (*x, *y),
    };
    sweep_plot_script("sweep.csv", x.0, y.0, x.1, y.1)
}

fn sweep_summary(records: &[SweepRecord]) {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for r in records {
        let c = r.case_str();
        match counts.iter_mut().find(|(k, _)| *k == c) {
            Some((_, n)) => *n += 1,
            None => counts.push((c, 1)),
        }
    }
    let parts: Vec<String> = counts.iter().map(|(k, n)| format!("{k}: {n}")).collect();
    println!("{} points ({})", records.len(), parts.join(", "));
}

pub fn cmd_sweep(cli: &Cli) -> Result<u8> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <plan> is required".into()))?;
    let plan: SweepPlan = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    plan.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records = pool.install(|| run_sweep(&plan))?;

    let dir = out_dir(cli, None)?;
    write(&dir, "sweep.csv", &sweep_csv(&records))?;
    write(&dir, "sweep_errors.csv", &sweep_errors_csv(&records))?;
    write(&dir, "sweep.gp", &sweep_plot(&plan))?;
    write_manifest(
        &dir,
        "sweep",
        cli.seed.unwrap_or(0),
        serde_json::to_value(&plan)?,
    )?;
    sweep_summary(&records);
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        println!("{failed} points failed; see sweep_errors.csv");
    }
    let rising = alpha_monotonicity_violations(&plan, &records);
    if !rising.is_empty() {
        println!(
            "abscissa increases with alpha at {} grid steps",
            rising.len()
        );
    }
    check_feasible_stability(&records)?;
    Ok(EXIT_OK)
}

/// Mesh sizes for the refinement table, coarsest first, ending at `n_cells`.
fn refinement_levels(n_cells: usize, levels: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = n_cells;
    while out.len() < levels.max(1) && n >= 4 {
        out.push(n);
        n /= 2;
    }
    out.reverse();
    out
}

pub fn cmd_constants(cli: &Cli, cfg: &RunConfig, levels: usize) -> Result<u8> {
    let length = cfg.params.length;
    let mut rows = Vec::new();
    println!("{:>8}  {:>22}  {:>22}", "n_cells", "B", "C(Omega)");
    for n in refinement_levels(cfg.mesh.n_cells, levels) {
        let c = DomainConstants::compute(length, n)?;
        println!(
            "{n:>8}  {:>22}  {:>22}",
            fmt_f64(c.trace_b),
            fmt_f64(c.poincare_c)
        );
        rows.push(json!({ "n_cells": n, "trace_b": c.trace_b, "poincare_c": c.poincare_c }));
    }
    let last = rows.last().cloned().unwrap_or(serde_json::Value::Null);
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "length": length, "table": rows, "finest": last }))?
    );
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        write_manifest(
            dir,
            "constants",
            cli.seed.unwrap_or(cfg.seed),
            serde_json::to_value(cfg)?,
        )?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE1: &str = r#"{
        "params": {"alpha": 0.1, "mu1": 1.0, "mu2": 0.5, "tau": 1.0, "length": 1.0, "xi": 1.0},
        "mesh": {"n_cells": 20, "n_rho": 10},
        "time": {"t_end": 1.0}
    }"#;

    #[test]
    fn config_defaults() {
        let cfg = RunConfig::from_json(CASE1).unwrap();
        assert_eq!(cfg.stride, DEFAULT_STRIDE);
        assert_eq!(cfg.initial, InitialData::default());
        assert_eq!(cfg.grid().unwrap().dt, 0.05);
        assert_eq!(cfg.grid().unwrap().theta, 0.5);
        assert_eq!(cfg.dense_cap, DEFAULT_DENSE_CAP);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = CASE1.replacen("\"time\"", "\"tme\"", 1);
        let err = RunConfig::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("tme"), "{err}");
        let nested = CASE1.replacen("\"n_rho\"", "\"nrho\"", 1);
        assert!(RunConfig::from_json(&nested).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let zero_tau = CASE1.replacen("\"tau\": 1.0", "\"tau\": 0.0", 1);
        assert!(RunConfig::from_json(&zero_tau).is_err());
        let coarse = CASE1.replacen("\"n_cells\": 20", "\"n_cells\": 1", 1);
        assert!(RunConfig::from_json(&coarse).is_err());
        let theta = CASE1.replacen("\"t_end\": 1.0", "\"t_end\": 1.0, \"theta\": 0.2", 1);
        assert!(RunConfig::from_json(&theta).is_err());
    }

    #[test]
    fn refinement_table_sizes() {
        assert_eq!(refinement_levels(200, 5), vec![12, 25, 50, 100, 200]);
        assert_eq!(refinement_levels(8, 5), vec![4, 8]);
        assert_eq!(refinement_levels(200, 1), vec![200]);
    }

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig::from_json(CASE1).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}
