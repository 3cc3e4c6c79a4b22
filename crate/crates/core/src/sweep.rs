//! Parameter sweeps: abscissa and decay-rate maps over grids of
//! `(α, μ₁, μ₂, τ, L)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{assemble, initial_state, Mesh};
use crate::error::{Error, Result};
use crate::functionals::fit_energy_decay;
use crate::output::fmt_f64;
use crate::params::{classify_case, resolve_xi, DomainConstants, StabilityVerdict, SystemParams};
use crate::simulate::{integrate, IntegrateOptions, TimeGrid};
use crate::spectral::{spectrum, DEFAULT_DENSE_CAP};

/// Tolerance on the abscissa of feasible points.
pub const FEASIBLE_ABSCISSA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    Alpha,
    Mu1,
    Mu2,
    Tau,
    Length,
}

impl ParamName {
    fn set(self, p: &mut SystemParams, value: f64) {
        match self {
            ParamName::Alpha => p.alpha = value,
            ParamName::Mu1 => p.mu1 = value,
            ParamName::Mu2 => p.mu2 = value,
            ParamName::Tau => p.tau = value,
            ParamName::Length => p.length = value,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Alpha => "alpha",
            ParamName::Mu1 => "mu1",
            ParamName::Mu2 => "mu2",
            ParamName::Tau => "tau",
            ParamName::Length => "length",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: ParamName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let s = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + s * (self.max - self.min),
                    Scale::Log => (self.min.ln() + s * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    #[default]
    Spectrum,
    Trajectory,
    Both,
}

impl Analysis {
    fn spectrum(self) -> bool {
        matches!(self, Analysis::Spectrum | Analysis::Both)
    }
    fn trajectory(self) -> bool {
        matches!(self, Analysis::Trajectory | Analysis::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMesh {
    pub n_cells: usize,
    pub n_rho: usize,
    #[serde(default)]
    pub lumped: bool,
}

/// Time settings for trajectory analyses; `dt` defaults to `τ/(2·n_rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTime {
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "half")]
    pub theta: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    #[serde(default)]
    pub axes: Vec<Axis>,
    pub fixed: SystemParams,
    #[serde(default)]
    pub per_point: Analysis,
    pub mesh: SweepMesh,
    #[serde(default)]
    pub time: Option<SweepTime>,
    #[serde(default = "default_cap")]
    pub dense_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DENSE_CAP
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > 3 {
            return Err(Error::Plan(format!(
                "at most 3 axes, got {}",
                self.axes.len()
            )));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Plan(format!("axis `{}` repeated", a.name.as_str())));
            }
            if a.count < 2 {
                return Err(Error::Plan(format!(
                    "axis `{}` needs count >= 2",
                    a.name.as_str()
                )));
            }
            if !(a.min.is_finite() && a.max.is_finite() && a.min < a.max) {
                return Err(Error::Plan(format!(
                    "axis `{}` needs finite min < max",
                    a.name.as_str()
                )));
            }
            if a.scale == Scale::Log && a.min <= 0.0 {
                return Err(Error::Plan(format!(
                    "log axis `{}` needs min > 0",
                    a.name.as_str()
                )));
            }
        }
        if self.mesh.n_cells < 4 || self.mesh.n_rho < 2 {
            return Err(Error::Plan("mesh needs n_cells >= 4 and n_rho >= 2".into()));
        }
        if self.per_point.trajectory() && self.time.is_none() {
            return Err(Error::Plan("trajectory analysis needs `time`".into()));
        }
        Ok(())
    }

    pub fn cardinality(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Grid points in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<SystemParams> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let total = self.cardinality();
        (0..total)
            .map(|mut idx| {
                let mut p = self.fixed;
                for (axis, vals) in self.axes.iter().zip(&values).rev() {
                    axis.name.set(&mut p, vals[idx % axis.count]);
                    idx /= axis.count;
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// Parameters with the ξ used at this point.
    pub params: SystemParams,
    pub verdict: Option<StabilityVerdict>,
    pub abscissa: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub feasible: bool,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn case_str(&self) -> &'static str {
        self.verdict.map_or("Error", |v| v.case_tag.as_str())
    }
}

/// Runs every grid point on the current rayon pool. Results are in grid
/// order; per-point failures are recorded, never fatal.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRecord>> {
    plan.validate()?;
    let points = plan.points();
    let mut lengths: Vec<f64> = points.iter().map(|p| p.length).collect();
    lengths.sort_by(f64::total_cmp);
    lengths.dedup();
    let constants: BTreeMap<u64, Result<DomainConstants>> = lengths
        .par_iter()
        .map(|&l| (l.to_bits(), DomainConstants::compute(l, plan.mesh.n_cells)))
        .collect();
    Ok(points
        .par_iter()
        .map(|p| {
            let c = constants
                .get(&p.length.to_bits())
                .expect("constants for every length");
            match c {
                Ok(c) => analyze_point(plan, p, c),
                Err(e) => SweepRecord {
                    params: *p,
                    verdict: None,
                    abscissa: None,
                    gamma_hat: None,
                    feasible: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Full analysis of one parameter point.
pub fn analyze_point(
    plan: &SweepPlan,
    params: &SystemParams,
    constants: &DomainConstants,
) -> SweepRecord {
    let mut record = SweepRecord {
        params: *params,
        verdict: None,
        abscissa: None,
        gamma_hat: None,
        feasible: false,
        error: None,
    };
    let verdict = match classify_case(params, constants) {
        Ok(v) => v,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.verdict = Some(verdict);
    record.feasible = verdict.case_tag.is_feasible();
    let xi = resolve_xi(params, &verdict);
    record.params.xi = Some(xi);

    let run = || -> Result<(Option<f64>, Option<f64>)> {
        let mesh =
            Mesh::new(params.length, plan.mesh.n_cells, plan.mesh.n_rho)?.lumped(plan.mesh.lumped);
        let pair = assemble(&record.params, &mesh)?;
        let abscissa = if plan.per_point.spectrum() {
            Some(spectrum(&pair, plan.dense_cap)?.abscissa)
        } else {
            None
        };
        let gamma = if plan.per_point.trajectory() {
            let t = plan.time.expect("validated");
            let dt = t.dt.unwrap_or(params.tau / (2.0 * mesh.n_rho as f64));
            let grid = TimeGrid::new(dt, t.t_end, t.theta)?;
            let l = params.length;
            let init = initial_state(
                |x| (std::f64::consts::FRAC_PI_2 * x / l).sin(),
                |_| 0.0,
                |_, _| 0.0,
                params.tau,
                &mesh,
            )?;
            let traj = integrate(
                &init,
                &pair,
                &grid,
                IntegrateOptions {
                    stride: usize::MAX,
                    epsilon: 0.0,
                },
            )?;
            Some(fit_energy_decay(&traj.samples, (t.t_end / 10.0, t.t_end))?.gamma_hat)
        } else {
            None
        };
        Ok((abscissa, gamma))
    };
    match run() {
        Ok((a, g)) => {
            record.abscissa = a;
            record.gamma_hat = g;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Fails with a dump of the first feasible point whose abscissa is positive.
pub fn check_feasible_stability(records: &[SweepRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if let (true, Some(a)) = (r.feasible, r.abscissa) {
            if a > FEASIBLE_ABSCISSA_TOL {
                return Err(Error::Plan(format!(
                    "feasible point #{i} has abscissa {a:e} > 0: {:?}",
                    r
                )));
            }
        }
    }
    Ok(())
}

/// Grid index pairs `(i, j)` where `j` is the next α value after `i` with
/// every other parameter equal, and the abscissa went up. Viscous damping
/// never flips the sign of the abscissa, but it is not monotone in α once
/// the slow mode is overdamped, so these are reported rather than rejected.
pub fn alpha_monotonicity_violations(
    plan: &SweepPlan,
    records: &[SweepRecord],
) -> Vec<(usize, usize)> {
    let Some(k) = plan.axes.iter().position(|a| a.name == ParamName::Alpha) else {
        return Vec::new();
    };
    let stride: usize = plan.axes[k + 1..].iter().map(|a| a.count).product();
    let count = plan.axes[k].count;
    (0..records.len())
        .filter(|&i| (i / stride) % count + 1 < count)
        .filter_map(|i| {
            let j = i + stride;
            match (records[i].abscissa, records.get(j)?.abscissa) {
                (Some(a), Some(b)) if b > a + FEASIBLE_ABSCISSA_TOL => Some((i, j)),
                _ => None,
            }
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "mu1,mu2,alpha,tau,xi,case,abscissa,gamma_hat,feasible";

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in records {
        let p = &r.params;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(p.mu1),
            fmt_f64(p.mu2),
            fmt_f64(p.alpha),
            fmt_f64(p.tau),
            opt(p.xi),
            r.case_str(),
            opt(r.abscissa),
            opt(r.gamma_hat),
            r.feasible
        );
    }
    out
}

/// `index,error` lines for the points that failed.
pub fn sweep_errors_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("index,error\n");
    for (i, r) in records.iter().enumerate() {
        if let Some(e) = &r.error {
            let _ = writeln!(out, "{i},\"{}\"", e.replace('"', "'"));
        }
    }
    out
}
