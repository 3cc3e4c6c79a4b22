//! Eigen-analysis of the discrete generator: spectral abscissa,
//! dissipativity certificate and the resolvent check.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::GeneratorPair;
use crate::error::{Error, Result};
use crate::linalg::{sym_pencil_eigenvalues, symmetric_part};

pub const DEFAULT_DENSE_CAP: usize = 1200;

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Sorted by real part, descending.
    pub eigenvalues: Vec<Complex<f64>>,
    pub abscissa: f64,
    /// Eigenvalues with real part above `unstable_tol`.
    pub n_unstable: usize,
    /// Rounding floor used when counting unstable modes.
    pub unstable_tol: f64,
    /// `|−2·abscissa − γ̂|` once a trajectory fit is attached.
    pub gap_to_fit: Option<f64>,
}

impl SpectrumReport {
    fn from_eigenvalues(mut eigenvalues: Vec<Complex<f64>>) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let abscissa = eigenvalues.first().map_or(f64::NEG_INFINITY, |l| l.re);
        let radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let unstable_tol = 1e-12 * radius.max(1.0);
        let n_unstable = eigenvalues.iter().filter(|l| l.re > unstable_tol).count();
        Self {
            eigenvalues,
            abscissa,
            n_unstable,
            unstable_tol,
            gap_to_fit: None,
        }
    }

    /// Attaches a trajectory decay rate; energy is quadratic in the state,
    /// so it decays at twice the modal rate.
    pub fn with_fit(mut self, gamma_hat: f64) -> Self {
        self.gap_to_fit = Some((-2.0 * self.abscissa - gamma_hat).abs());
        self
    }
}

/// All eigenvalues of `A_h` by a dense real Schur decomposition.
pub fn spectrum(pair: &GeneratorPair, dense_cap: usize) -> Result<SpectrumReport> {
    matrix_spectrum(&pair.a, dense_cap)
}

pub fn matrix_spectrum(a: &DMatrix<f64>, dense_cap: usize) -> Result<SpectrumReport> {
    let dim = a.nrows();
    if dim > dense_cap {
        return Err(Error::OverDenseCap {
            dim,
            cap: dense_cap,
        });
    }
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: a.ncols(),
        });
    }
    if dim == 0 {
        return Ok(SpectrumReport::from_eigenvalues(Vec::new()));
    }
    let ev = a.clone().complex_eigenvalues();
    Ok(SpectrumReport::from_eigenvalues(
        ev.iter().copied().collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipativityCertificate {
    /// Largest `⟨AV,V⟩_G / ⟨V,V⟩_G` over the random samples.
    pub sampled_max: f64,
    /// Largest eigenvalue of the pencil `(½(GA + (GA)ᵀ), G)`.
    pub exact_max: f64,
}

/// Largest value of `⟨AV,V⟩_G` on the G-unit sphere.
///
/// Rows and columns of the symmetrized form that vanish identically (the
/// displacement block of the wave generator) are deflated exactly: they
/// contribute the eigenvalue 0, and the rest of the pencil is reduced with
/// the Schur complement of `G`.
pub fn max_symmetrized_rayleigh(pair: &GeneratorPair) -> Result<f64> {
    let s = symmetric_part(&pair.ga);
    let n = s.nrows();
    let zero: Vec<bool> = (0..n).map(|i| s.row(i).iter().all(|&x| x == 0.0)).collect();
    let keep: Vec<usize> = (0..n).filter(|&i| !zero[i]).collect();
    let drop: Vec<usize> = (0..n).filter(|&i| zero[i]).collect();
    if keep.is_empty() {
        return Ok(0.0);
    }
    let pick = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
    };
    let s_kk = pick(&s, &keep, &keep);
    let mut g_kk = pick(&pair.g, &keep, &keep);
    if !drop.is_empty() {
        let g_kd = pick(&pair.g, &keep, &drop);
        if g_kd.amax() > 0.0 {
            let g_dd = pick(&pair.g, &drop, &drop);
            let chol = g_dd
                .cholesky()
                .ok_or(Error::Singular("Gram matrix block"))?;
            g_kk -= &g_kd * chol.solve(&g_kd.transpose());
        }
    }
    let ev = sym_pencil_eigenvalues(&s_kk, &g_kk)?;
    let top = *ev.last().expect("nonempty");
    Ok(if drop.is_empty() { top } else { top.max(0.0) })
}

pub fn dissipativity_certificate(
    pair: &GeneratorPair,
    n_samples: usize,
    seed: u64,
) -> Result<DissipativityCertificate> {
    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = pair.dim();
    let mut sampled_max = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let norm = pair.norm_sq(&v);
        if norm > 0.0 {
            sampled_max = sampled_max.max(pair.dissipation(&v) / norm);
        }
    }
    Ok(DissipativityCertificate {
        sampled_max,
        exact_max: max_symmetrized_rayleigh(pair)?,
    })
}

/// Solves `(λG − GA) V = G F`, i.e. `(λI − A) V = F`.
pub fn solve_resolvent(
    pair: &GeneratorPair,
    lambda: f64,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    if f.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            actual: f.len(),
        });
    }
    let lhs = &pair.g * lambda - &pair.ga;
    let lu = lhs.lu();
    lu.solve(&(&pair.g * f))
        .ok_or(Error::Singular("resolvent at positive lambda"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub lambda: f64,
    /// Max over trials of `‖(λI − A)V − F‖_G / ‖F‖_G` for random `F`.
    pub max_residual: f64,
    /// Max over trials of `‖V − V*‖_G / ‖V*‖_G` for `F = (λI − A)V*`.
    pub manufactured_error: f64,
}

pub fn resolvent_test(
    pair: &GeneratorPair,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<ResolventReport> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    let dim = pair.dim();
    let lhs = &pair.g * lambda - &pair.ga;
    let lu = lhs.lu();
    if !lu.is_invertible() {
        return Err(Error::Singular("resolvent at positive lambda"));
    }
    let g_norm = |v: &DVector<f64>| pair.norm_sq(v).max(0.0).sqrt();
    let shifted = |v: &DVector<f64>| v * lambda - &pair.a * v;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    let mut manufactured_error: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let f = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let v = lu
            .solve(&(&pair.g * &f))
            .ok_or(Error::Singular("resolvent at positive lambda"))?;
        max_residual = max_residual.max(g_norm(&(shifted(&v) - &f)) / g_norm(&f));

        let v_star = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let f_star = shifted(&v_star);
        let v_back = lu
            .solve(&(&pair.g * &f_star))
            .ok_or(Error::Singular("resolvent at positive lambda"))?;
        manufactured_error = manufactured_error.max(g_norm(&(v_back - &v_star)) / g_norm(&v_star));
    }
    Ok(ResolventReport {
        lambda,
        max_residual,
        manufactured_error,
    })
}
