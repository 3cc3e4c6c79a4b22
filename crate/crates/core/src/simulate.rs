//! θ-scheme time integration of `V' = A_h V`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{pack, unpack, DiscreteState, GeneratorPair, WaveOperators};
use crate::error::{Error, Result};
use crate::functionals::{energy_identity_residual, sample, EnergySample};
use crate::linalg::{SymTridiagonal, TridiagonalLu};

pub const DEFAULT_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    0.5
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64, theta: f64) -> Result<Self> {
        let grid = Self { dt, t_end, theta };
        grid.validate()?;
        Ok(grid)
    }

    /// Crank–Nicolson with `dt = τ / (2·n_rho)`, which resolves the delay line.
    pub fn resolving_delay(tau: f64, n_rho: usize, t_end: f64) -> Result<Self> {
        Self::new(tau / (2.0 * n_rho as f64), t_end, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::param(
                "t_end",
                format!("must be >= 0, got {}", self.t_end),
            ));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::param(
                "theta",
                format!("must lie in [0.5, 1], got {}", self.theta),
            ));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end` (rounded to the nearest step).
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Upwind θ-step of the delay line `z' = −c_ρ (z_k − z_{k−1})`, with `z[0]`
/// holding the inflow value.
#[derive(Debug, Clone, Copy)]
pub struct UpwindLine {
    /// Courant number `dt / (τ dρ)`.
    pub courant: f64,
    pub theta: f64,
}

impl UpwindLine {
    pub fn new(dt: f64, tau: f64, d_rho: f64, theta: f64) -> Self {
        Self {
            courant: dt / (tau * d_rho),
            theta,
        }
    }

    /// Advances `z[1..]` in place; `z[0]` is the old inflow on entry and is
    /// replaced by `inflow` on exit.
    pub fn advance(&self, z: &mut [f64], inflow: f64) {
        let c = self.courant;
        let th = self.theta;
        let denom = 1.0 + th * c;
        let mut prev_old = z[0];
        let mut prev_new = inflow;
        z[0] = inflow;
        for zk in z.iter_mut().skip(1) {
            let old = *zk;
            let r = old - (1.0 - th) * c * (old - prev_old);
            let new = (th * c * prev_new + r) / denom;
            prev_old = old;
            prev_new = new;
            *zk = new;
        }
    }
}

/// Drives a free delay line with a prescribed inflow `signal(t)` from the
/// history `z(ρ, 0) = history(ρ)` and returns `z` at `ρ_k`, `k = 0..=n_rho`,
/// after `n_steps` steps.
pub fn drive_delay_line(
    n_rho: usize,
    tau: f64,
    dt: f64,
    theta: f64,
    n_steps: usize,
    signal: impl Fn(f64) -> f64,
    history: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let d_rho = 1.0 / n_rho as f64;
    let line = UpwindLine::new(dt, tau, d_rho, theta);
    let mut z: Vec<f64> = (0..=n_rho).map(|k| history(k as f64 * d_rho)).collect();
    z[0] = signal(0.0);
    for n in 1..=n_steps {
        line.advance(&mut z, signal(n as f64 * dt));
    }
    z
}

#[derive(Debug, Clone)]
enum Scheme {
    /// O(n) step for assembled wave systems: the delay line is solved by
    /// forward substitution and the velocity by a tridiagonal solve.
    Structured {
        n: usize,
        dt: f64,
        theta: f64,
        alpha: f64,
        mu1: f64,
        mu2: f64,
        stiffness: SymTridiagonal,
        boundary_mass: SymTridiagonal,
        line: UpwindLine,
        /// Response of the line to a unit inflow at the new time level.
        unit_response: Vec<f64>,
        solver: TridiagonalLu,
    },
    /// `(G − θ dt GA) V⁺ = (G + (1−θ) dt GA) V` by dense LU.
    Dense {
        lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        right: DMatrix<f64>,
    },
}

/// Cached θ-scheme propagator for one `(pair, dt, θ)`.
#[derive(Debug, Clone)]
pub struct ThetaStepper {
    scheme: Scheme,
    dim: usize,
}

impl ThetaStepper {
    /// Uses the structured path when the pair came from assembly.
    pub fn new(pair: &GeneratorPair, grid: &TimeGrid) -> Result<Self> {
        grid.validate()?;
        match &pair.operators {
            Some(ops) => Self::structured(ops, grid),
            None => Self::dense(pair, grid),
        }
    }

    pub fn dense(pair: &GeneratorPair, grid: &TimeGrid) -> Result<Self> {
        grid.validate()?;
        let (dt, th) = (grid.dt, grid.theta);
        let left = &pair.g - &pair.ga * (th * dt);
        let right = &pair.g + &pair.ga * ((1.0 - th) * dt);
        let lu = left.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("theta-scheme left matrix"));
        }
        Ok(Self {
            scheme: Scheme::Dense { lu, right },
            dim: pair.dim(),
        })
    }

    fn structured(ops: &WaveOperators, grid: &TimeGrid) -> Result<Self> {
        let (dt, th) = (grid.dt, grid.theta);
        let mesh = &ops.mesh;
        let p = &ops.params;
        let n = mesh.n_cells;
        let line = UpwindLine::new(dt, p.tau, mesh.d_rho(), th);
        let mut unit_response = vec![0.0; mesh.n_rho + 1];
        line.advance(&mut unit_response, 1.0);
        let s_end = *unit_response.last().expect("nonempty line");
        let mut system =
            ops.boundary_mass
                .combine(1.0, &ops.stiffness, dt * th * (th * dt + p.alpha));
        system.diag[n - 1] += dt * th * (p.mu1 + p.mu2 * s_end);
        let solver = TridiagonalLu::factor(&system)?;
        Ok(Self {
            scheme: Scheme::Structured {
                n,
                dt,
                theta: th,
                alpha: p.alpha,
                mu1: p.mu1,
                mu2: p.mu2,
                stiffness: ops.stiffness.clone(),
                boundary_mass: ops.boundary_mass.clone(),
                line,
                unit_response,
                solver,
            },
            dim: mesh.packed_dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Advances a packed state by one step in place.
    pub fn advance(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "packed state length");
        match &self.scheme {
            Scheme::Dense { lu, right } => {
                let v = DVector::from_column_slice(x);
                let rhs = right * v;
                let next = lu
                    .solve(&rhs)
                    .expect("factorization checked at construction");
                x.copy_from_slice(next.as_slice());
            }
            Scheme::Structured {
                n,
                dt,
                theta,
                alpha,
                mu1,
                mu2,
                stiffness,
                boundary_mass,
                line,
                unit_response,
                solver,
            } => {
                let (n, dt, th) = (*n, *dt, *theta);
                let (u, rest) = x.split_at_mut(n);
                let (v, zi) = rest.split_at_mut(n);
                let vb = v[n - 1];
                let z_end_old = *zi.last().expect("nonempty line");

                // delay line with zero inflow at the new level
                let mut z = Vec::with_capacity(zi.len() + 1);
                z.push(vb);
                z.extend_from_slice(zi);
                line.advance(&mut z, 0.0);
                let z0_end = *z.last().expect("nonempty line");

                let mut rhs = boundary_mass.mul_vec(v);
                stiffness.mul_add_into(-dt, u, &mut rhs);
                stiffness.mul_add_into(-dt * (th * dt + alpha) * (1.0 - th), v, &mut rhs);
                rhs[n - 1] -=
                    dt * (mu1 * (1.0 - th) * vb + mu2 * (th * z0_end + (1.0 - th) * z_end_old));
                solver.solve_in_place(&mut rhs);
                let v_new = rhs;

                for i in 0..n {
                    u[i] += dt * (th * v_new[i] + (1.0 - th) * v[i]);
                }
                let vb_new = v_new[n - 1];
                v.copy_from_slice(&v_new);
                for (k, zk) in zi.iter_mut().enumerate() {
                    *zk = z[k + 1] + vb_new * unit_response[k + 1];
                }
            }
        }
    }

    pub fn step_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut x = v.as_slice().to_vec();
        self.advance(&mut x);
        DVector::from_vec(x)
    }
}

/// One θ-step of an assembled system. Builds a fresh propagator; use
/// [`ThetaStepper`] directly to reuse the factorization.
pub fn step(state: &DiscreteState, pair: &GeneratorPair, grid: &TimeGrid) -> Result<DiscreteState> {
    let ops = pair
        .operators
        .as_ref()
        .ok_or_else(|| Error::param("pair", "state stepping needs an assembled pair"))?;
    let stepper = ThetaStepper::new(pair, grid)?;
    let mut x = pack(state);
    if x.len() != stepper.dim() {
        return Err(Error::DimensionMismatch {
            expected: stepper.dim(),
            actual: x.len(),
        });
    }
    stepper.advance(&mut x);
    unpack(&x, &ops.mesh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub state: DiscreteState,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    /// One record per time step, including `t = 0`.
    pub samples: Vec<EnergySample>,
    /// States every `stride` steps plus the final state.
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn final_state(&self) -> Option<&DiscreteState> {
        self.snapshots.last().map(|s| &s.state)
    }

    /// Re-evaluates the Lyapunov column for another ε.
    pub fn set_epsilon(&mut self, epsilon: f64) {
        for s in &mut self.samples {
            s.lyap = s.energy + epsilon * s.perturbation;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub stride: usize,
    /// Weight of the Lyapunov perturbation recorded in the samples.
    pub epsilon: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            stride: DEFAULT_STRIDE,
            epsilon: 0.0,
        }
    }
}

/// Integrates from `initial` to `grid.t_end`, sampling the functionals at
/// every step.
pub fn integrate(
    initial: &DiscreteState,
    pair: &GeneratorPair,
    grid: &TimeGrid,
    options: IntegrateOptions,
) -> Result<Trajectory> {
    let ops = pair
        .operators
        .as_ref()
        .ok_or_else(|| Error::param("pair", "integration needs an assembled pair"))?;
    let stride = options.stride.max(1);
    let stepper = ThetaStepper::new(pair, grid)?;
    let mesh = &ops.mesh;
    let params = {
        let mut p = ops.params;
        p.xi = Some(ops.xi);
        p
    };
    let mut x = pack(initial);
    if x.len() != stepper.dim() {
        return Err(Error::DimensionMismatch {
            expected: stepper.dim(),
            actual: x.len(),
        });
    }
    let n_steps = grid.n_steps();
    let mut traj = Trajectory {
        samples: Vec::with_capacity(n_steps + 1),
        snapshots: Vec::with_capacity(n_steps / stride + 2),
    };
    for n in 0..=n_steps {
        if n > 0 {
            stepper.advance(&mut x);
        }
        let t = n as f64 * grid.dt;
        let state = unpack(&x, mesh)?;
        traj.samples
            .push(sample(t, &state, &params, mesh, options.epsilon));
        if n % stride == 0 || n == n_steps {
            traj.snapshots.push(Snapshot { step: n, t, state });
        }
    }
    if traj.samples.len() >= 3 {
        let residuals = energy_identity_residual(&traj.samples)?;
        for (s, r) in traj.samples.iter_mut().zip(residuals) {
            s.de_residual = r;
        }
    }
    Ok(traj)
}
