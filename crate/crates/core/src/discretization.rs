//! P1 finite elements on `(0, L)` with the Dirichlet node at `x = 0`
//! eliminated, a point mass at `x = L` for the dynamic boundary condition,
//! and a first-order upwind delay line for `τ z_t + z_ρ = 0`.
//!
//! Packed state layout (length `2·n_cells + n_rho`):
//!
//! ```text
//! [ u_1 .. u_N | v_1 .. v_N | z_1 .. z_R ]
//! ```
//!
//! `u_N`, `v_N` are the values at `x = L`; the boundary velocity `w` and the
//! delay-line inflow `z_0` are both `v_N` and are not stored.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymTridiagonal;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub length: f64,
    pub n_cells: usize,
    pub n_rho: usize,
    /// Row-sum lumped mass instead of the consistent P1 mass.
    #[serde(default)]
    pub lumped: bool,
}

impl Mesh {
    pub fn new(length: f64, n_cells: usize, n_rho: usize) -> Result<Self> {
        let mesh = Self {
            length,
            n_cells,
            n_rho,
            lumped: false,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn lumped(mut self, lumped: bool) -> Self {
        self.lumped = lumped;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::param(
                "length",
                format!("must be > 0, got {}", self.length),
            ));
        }
        if self.n_cells < 2 {
            return Err(Error::MeshTooCoarse(format!(
                "n_cells must be >= 2, got {}",
                self.n_cells
            )));
        }
        if self.n_rho < 2 {
            return Err(Error::MeshTooCoarse(format!(
                "n_rho must be >= 2, got {}",
                self.n_rho
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn d_rho(&self) -> f64 {
        1.0 / self.n_rho as f64
    }

    /// Coordinates of the unknown nodes `x_1 .. x_N`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n_cells).map(|j| j as f64 * h).collect()
    }

    /// Delay-line nodes `ρ_k = k·dρ`, `k = 0..=n_rho`.
    pub fn rho_nodes(&self) -> Vec<f64> {
        let d = self.d_rho();
        (0..=self.n_rho).map(|k| k as f64 * d).collect()
    }

    pub fn packed_dim(&self) -> usize {
        2 * self.n_cells + self.n_rho
    }
}

/// Stiffness and interior mass matrices on the reduced P1 space
/// (Dirichlet node eliminated).
pub fn p1_matrices(length: f64, n_cells: usize, lumped: bool) -> (SymTridiagonal, SymTridiagonal) {
    let h = length / n_cells as f64;
    let n = n_cells;
    let mut kd = vec![2.0 / h; n];
    kd[n - 1] = 1.0 / h;
    let ko = vec![-1.0 / h; n - 1];
    let (md, mo) = if lumped {
        let mut md = vec![h; n];
        md[n - 1] = h / 2.0;
        (md, vec![0.0; n - 1])
    } else {
        let mut md = vec![2.0 * h / 3.0; n];
        md[n - 1] = h / 3.0;
        (md, vec![h / 6.0; n - 1])
    };
    (SymTridiagonal::new(kd, ko), SymTridiagonal::new(md, mo))
}

/// Semigroup state `(u, u_t, u_t|Γ₁, z)` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Boundary velocity; always equal to the last entry of `v`.
    pub w: f64,
    /// Delay line at `ρ_k`, `k = 0..=n_rho`; `z[0] == w`.
    pub z: Vec<f64>,
}

impl DiscreteState {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            u: vec![0.0; mesh.n_cells],
            v: vec![0.0; mesh.n_cells],
            w: 0.0,
            z: vec![0.0; mesh.n_rho + 1],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u: self.u.iter().map(|x| c * x).collect(),
            v: self.v.iter().map(|x| c * x).collect(),
            w: c * self.w,
            z: self.z.iter().map(|x| c * x).collect(),
        }
    }

    pub fn boundary_displacement(&self) -> f64 {
        *self.u.last().expect("nonempty grid")
    }
}

pub fn pack(state: &DiscreteState) -> Vec<f64> {
    let mut out = Vec::with_capacity(state.u.len() + state.v.len() + state.z.len() - 1);
    out.extend_from_slice(&state.u);
    out.extend_from_slice(&state.v);
    out.extend_from_slice(&state.z[1..]);
    out
}

pub fn unpack(flat: &[f64], mesh: &Mesh) -> Result<DiscreteState> {
    let n = mesh.n_cells;
    if flat.len() != mesh.packed_dim() {
        return Err(Error::DimensionMismatch {
            expected: mesh.packed_dim(),
            actual: flat.len(),
        });
    }
    let u = flat[..n].to_vec();
    let v = flat[n..2 * n].to_vec();
    let w = v[n - 1];
    let mut z = Vec::with_capacity(mesh.n_rho + 1);
    z.push(w);
    z.extend_from_slice(&flat[2 * n..]);
    Ok(DiscreteState { u, v, w, z })
}

/// Samples initial data: `u0`, `u1` at the nodes, and the delay history
/// `z(ρ_k) = f0(L, −τρ_k)` for `k ≥ 1`. `z(0)` is the boundary velocity.
pub fn initial_state(
    u0: impl Fn(f64) -> f64,
    u1: impl Fn(f64) -> f64,
    f0: impl Fn(f64, f64) -> f64,
    tau: f64,
    mesh: &Mesh,
) -> Result<DiscreteState> {
    mesh.validate()?;
    if !(tau > 0.0) {
        return Err(Error::param("tau", format!("must be > 0, got {tau}")));
    }
    let at_origin = u0(0.0);
    if at_origin.abs() > 1e-10 {
        return Err(Error::DirichletIncompatible(at_origin));
    }
    let nodes = mesh.nodes();
    let u: Vec<f64> = nodes.iter().map(|&x| u0(x)).collect();
    let v: Vec<f64> = nodes.iter().map(|&x| u1(x)).collect();
    let w = *v.last().expect("nonempty grid");
    let l = mesh.length;
    let z = mesh
        .rho_nodes()
        .iter()
        .enumerate()
        .map(|(k, &rho)| if k == 0 { w } else { f0(l, -tau * rho) })
        .collect();
    Ok(DiscreteState { u, v, w, z })
}

/// Sparse description of the assembled model, kept alongside the dense
/// matrices so the stepper and functionals can work in O(n).
#[derive(Debug, Clone)]
pub struct WaveOperators {
    pub stiffness: SymTridiagonal,
    pub mass: SymTridiagonal,
    /// Interior mass plus the unit point mass at `x = L`.
    pub boundary_mass: SymTridiagonal,
    pub params: SystemParams,
    pub xi: f64,
    pub mesh: Mesh,
}

impl WaveOperators {
    pub fn new(params: &SystemParams, mesh: &Mesh) -> Result<Self> {
        params.validate()?;
        mesh.validate()?;
        let xi = params
            .xi
            .ok_or_else(|| Error::param("xi", "must be chosen before assembly"))?;
        let (stiffness, mass) = p1_matrices(mesh.length, mesh.n_cells, mesh.lumped);
        let mut boundary_mass = mass.clone();
        *boundary_mass.diag.last_mut().expect("nonempty") += 1.0;
        Ok(Self {
            stiffness,
            mass,
            boundary_mass,
            params: *params,
            xi,
            mesh: *mesh,
        })
    }

    /// Transport speed of the delay line in grid units, `1 / (τ dρ)`.
    pub fn transport_rate(&self) -> f64 {
        1.0 / (self.params.tau * self.mesh.d_rho())
    }
}

/// Discrete generator `A` with the Gram matrix `G` of the ξ-weighted energy
/// inner product. `ga = G·A` is stored as assembled (it is sparse and exact).
#[derive(Debug, Clone)]
pub struct GeneratorPair {
    pub a: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub ga: DMatrix<f64>,
    pub operators: Option<WaveOperators>,
}

impl GeneratorPair {
    /// Pair from explicit matrices; `g` must be symmetric positive definite.
    pub fn new(a: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        if g.shape() != a.shape() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                actual: g.nrows(),
            });
        }
        let ga = &g * &a;
        Ok(Self {
            a,
            g,
            ga,
            operators: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `⟨A V, V⟩_G`
    pub fn dissipation(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.ga * v))
    }

    pub fn norm_sq(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.g * v))
    }
}

/// Assembles `A_h` and `G_h` for the delayed Kelvin–Voigt system.
pub fn assemble(params: &SystemParams, mesh: &Mesh) -> Result<GeneratorPair> {
    let ops = WaveOperators::new(params, mesh)?;
    let n = mesh.n_cells;
    let r = mesh.n_rho;
    let dim = mesh.packed_dim();
    let (iu, iv, iz) = (0, n, 2 * n);
    let b = iv + n - 1;
    let SystemParams {
        alpha,
        mu1,
        mu2,
        tau,
        ..
    } = *params;
    let xi = ops.xi;
    let k = ops.stiffness.to_dense();
    let mb = ops.boundary_mass.to_dense();

    let mut g = DMatrix::zeros(dim, dim);
    g.view_mut((iu, iu), (n, n)).copy_from(&k);
    g.view_mut((iv, iv), (n, n)).copy_from(&mb);
    let zw = xi * mesh.d_rho();
    for j in 0..r {
        g[(iz + j, iz + j)] = zw;
    }

    let mut ga = DMatrix::zeros(dim, dim);
    ga.view_mut((iu, iv), (n, n)).copy_from(&k);
    ga.view_mut((iv, iu), (n, n)).copy_from(&(-&k));
    ga.view_mut((iv, iv), (n, n)).copy_from(&(-alpha * &k));
    ga[(b, b)] -= mu1;
    ga[(b, iz + r - 1)] -= mu2;
    let zc = xi / tau;
    for j in 0..r {
        ga[(iz + j, iz + j)] = -zc;
        let upstream = if j == 0 { b } else { iz + j - 1 };
        ga[(iz + j, upstream)] += zc;
    }

    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..n {
        a[(iu + i, iv + i)] = 1.0;
    }
    let v_rows = ga.rows(iv, n).clone_owned();
    let v_block = mb
        .lu()
        .solve(&v_rows)
        .ok_or(Error::Singular("boundary mass matrix"))?;
    a.view_mut((iv, 0), (n, dim)).copy_from(&v_block);
    let rate = ops.transport_rate();
    for j in 0..r {
        a[(iz + j, iz + j)] = -rate;
        let upstream = if j == 0 { b } else { iz + j - 1 };
        a[(iz + j, upstream)] += rate;
    }

    Ok(GeneratorPair {
        a,
        g,
        ga,
        operators: Some(ops),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn packed_dimension() {
        for (nc, nr) in [(2, 2), (7, 3), (100, 50)] {
            let mesh = Mesh::new(1.3, nc, nr).unwrap();
            let p = SystemParams::new(0.1, 1.0, 0.5, 1.0, 1.3).with_xi(1.0);
            let pair = assemble(&p, &mesh).unwrap();
            assert_eq!(pair.dim(), 2 * nc + nr);
            assert_eq!(pair.g.shape(), pair.a.shape());
        }
    }

    #[test]
    fn coarse_mesh_rejected() {
        assert!(matches!(Mesh::new(1.0, 1, 4), Err(Error::MeshTooCoarse(_))));
        assert!(Mesh::new(1.0, 4, 1).is_err());
    }

    #[test]
    fn assembly_requires_xi() {
        let mesh = Mesh::new(1.0, 4, 4).unwrap();
        assert!(assemble(&SystemParams::new(0.1, 1.0, 0.5, 1.0, 1.0), &mesh).is_err());
    }

    #[test]
    fn conservative_limit_has_zero_quadratic_form() {
        let mesh = Mesh::new(1.0, 30, 10).unwrap();
        let p = SystemParams::new(0.0, 0.0, 0.0, 1.0, 1.0).with_xi(1.0);
        let pair = assemble(&p, &mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut v = random_vec(&mut rng, pair.dim());
            for j in 2 * mesh.n_cells..pair.dim() {
                v[j] = 0.0;
            }
            let q = pair.dissipation(&v);
            assert!(q.abs() <= 1e-12 * pair.norm_sq(&v), "{q}");
        }
    }

    /// `⟨AV,V⟩_G` written out term by term: boundary damping, delayed
    /// feedback, viscous dissipation and the upwind transport balance.
    fn dissipation_by_terms(state: &DiscreteState, p: &SystemParams, mesh: &Mesh) -> f64 {
        let (k, _) = p1_matrices(mesh.length, mesh.n_cells, mesh.lumped);
        let xi = p.xi.unwrap();
        let r = mesh.n_rho;
        let transport: f64 = (1..=r)
            .map(|j| state.z[j] * (state.z[j] - state.z[j - 1]))
            .sum();
        -p.mu1 * state.w * state.w
            - p.mu2 * state.z[r] * state.w
            - p.alpha * k.bilinear(&state.v, &state.v)
            - xi / p.tau * transport
    }

    #[test]
    fn case1_generator_is_dissipative_on_random_states() {
        let mesh = Mesh::new(1.0, 40, 20).unwrap();
        let p = SystemParams::new(0.1, 1.0, 0.5, 1.0, 1.0).with_xi(1.0);
        let pair = assemble(&p, &mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let v = random_vec(&mut rng, pair.dim());
            let q = pair.dissipation(&v);
            let state = unpack(v.as_slice(), &mesh).unwrap();
            let by_terms = dissipation_by_terms(&state, &p, &mesh);
            assert!((q - by_terms).abs() <= 1e-10 * q.abs().max(1.0));
            worst = worst.max(q / pair.norm_sq(&v));
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn velocity_block_is_negative_semidefinite_without_delay() {
        let mesh = Mesh::new(1.0, 25, 8).unwrap();
        let p = SystemParams::new(0.3, 0.8, 0.0, 1.0, 1.0).with_xi(0.5);
        let pair = assemble(&p, &mesh).unwrap();
        let n = mesh.n_cells;
        let block = pair.ga.view((n, n), (n, n)).clone_owned();
        assert_eq!(block, block.transpose());
        let ev = block.symmetric_eigenvalues();
        assert!(ev.iter().all(|&e| e <= 1e-12));
    }

    #[test]
    fn generator_matches_gram_weighted_form() {
        let mesh = Mesh::new(2.0, 12, 6).unwrap();
        let p = SystemParams::new(0.4, 0.5, 1.0, 0.7, 2.0).with_xi(1.0);
        let pair = assemble(&p, &mesh).unwrap();
        let diff = &pair.g * &pair.a - &pair.ga;
        assert!(diff.amax() < 1e-10 * pair.ga.amax());
        let g_sym = &pair.g - pair.g.transpose();
        assert_eq!(g_sym.amax(), 0.0);
        assert!(pair.g.clone().cholesky().is_some());
    }

    #[test]
    fn matrix_sums() {
        let (l, n) = (1.5, 30);
        let h = l / n as f64;
        let (k, m) = p1_matrices(l, n, false);
        let kd = k.to_dense();
        for i in 1..n - 1 {
            assert!(kd.row(i).sum().abs() < 1e-12);
        }
        assert!((kd.row(0).sum() - 1.0 / h).abs() < 1e-9);
        assert!((kd.row(n - 1).sum()).abs() < 1e-12);
        // the first cell only carries the x/h half of its hat function
        let md = m.to_dense();
        assert!((md.sum() - (l - 2.0 * h / 3.0)).abs() < 1e-12);
        let (_, ml) = p1_matrices(l, n, true);
        assert!((ml.to_dense().sum() - (l - h / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn pack_zero_roundtrip() {
        let mesh = Mesh::new(1.0, 5, 3).unwrap();
        let zero = DiscreteState::zeros(&mesh);
        let flat = pack(&zero);
        assert!(flat.iter().all(|&x| x == 0.0));
        assert_eq!(unpack(&flat, &mesh).unwrap(), zero);
    }

    #[test]
    fn unpack_rejects_wrong_length() {
        let mesh = Mesh::new(1.0, 5, 3).unwrap();
        assert!(matches!(
            unpack(&[0.0; 12], &mesh),
            Err(Error::DimensionMismatch {
                expected: 13,
                actual: 12
            })
        ));
    }

    #[test]
    fn inconsistent_boundary_velocity_is_not_representable() {
        let mesh = Mesh::new(1.0, 4, 3).unwrap();
        let mut s = DiscreteState::zeros(&mesh);
        s.v[3] = 2.0;
        s.w = -5.0;
        s.z[0] = 7.0;
        let back = unpack(&pack(&s), &mesh).unwrap();
        assert_eq!(back.w, 2.0);
        assert_eq!(back.z[0], 2.0);
    }

    proptest! {
        #[test]
        fn pack_unpack_roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 2 * 6 + 4)) {
            let mesh = Mesh::new(1.0, 6, 4).unwrap();
            let s = unpack(&values, &mesh).unwrap();
            prop_assert_eq!(s.w, s.v[5]);
            prop_assert_eq!(s.z[0], s.w);
            prop_assert_eq!(pack(&s), values);
        }
    }

    #[test]
    fn initial_state_sampling() {
        let mesh = Mesh::new(1.0, 10, 8).unwrap();
        let s = initial_state(
            |x| (std::f64::consts::FRAC_PI_2 * x).sin(),
            |_| 0.0,
            |_, _| 0.0,
            1.0,
            &mesh,
        )
        .unwrap();
        assert!(s.z.iter().all(|&z| z == 0.0));
        assert_eq!(s.u[9], 1.0);

        let tau = 0.7;
        let s = initial_state(|_| 0.0, |_| 0.0, |_, t| t.sin(), tau, &mesh).unwrap();
        for (k, rho) in mesh.rho_nodes().into_iter().enumerate().skip(1) {
            assert_eq!(s.z[k], (-tau * rho).sin());
        }
        assert_eq!(s.z[0], 0.0);
    }

    #[test]
    fn initial_state_rejects_dirichlet_violation() {
        let mesh = Mesh::new(1.0, 10, 8).unwrap();
        let r = initial_state(|x| x + 0.5, |_| 0.0, |_, _| 0.0, 1.0, &mesh);
        assert!(matches!(r, Err(Error::DirichletIncompatible(_))));
    }
}
