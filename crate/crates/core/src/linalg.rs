//! Small dense and tridiagonal helpers shared by the discretization,
//! the time stepper and the spectral checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and first
/// off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &o) in self.off.iter().enumerate() {
            m[(i, i + 1)] = o;
            m[(i + 1, i)] = o;
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        self.mul_add_into(1.0, x, &mut y);
        y
    }

    /// `y += scale * self * x`
    pub fn mul_add_into(&self, scale: f64, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] += scale * acc;
        }
    }

    /// `xᵀ self y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            acc += x[i] * self.diag[i] * y[i];
        }
        for i in 0..n.saturating_sub(1) {
            acc += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
        }
        acc
    }

    /// Linear combination `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SymTridiagonal, b: f64) -> SymTridiagonal {
        assert_eq!(self.dim(), other.dim());
        SymTridiagonal {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }
}

/// Thomas-algorithm factorization of a tridiagonal matrix (no pivoting;
/// intended for the symmetric positive definite systems of the stepper).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn factor(m: &SymTridiagonal) -> Result<Self> {
        let n = m.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        let scale = m.diag.iter().fold(0.0f64, |s, d| s.max(d.abs()));
        for i in 0..n {
            let mut p = m.diag[i];
            if i > 0 {
                let l = m.off[i - 1] / pivots[i - 1];
                p -= l * m.off[i - 1];
                lower.push(l);
            }
            if p.abs() <= f64::EPSILON * scale || !p.is_finite() {
                return Err(Error::Singular("tridiagonal factorization"));
            }
            pivots.push(p);
        }
        Ok(Self {
            lower,
            pivots,
            upper: m.off.clone(),
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.pivots.len();
        for i in 1..n {
            x[i] -= self.lower[i - 1] * x[i - 1];
        }
        x[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.upper[i] * x[i + 1]) / self.pivots[i];
        }
    }
}

/// Eigenvalues of the symmetric-definite pencil `(a, b)`, ascending.
/// `b` must be symmetric positive definite.
pub fn sym_pencil_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or(Error::Singular("cholesky of the pencil metric"))?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let y = l
        .solve_lower_triangular(a)
        .ok_or(Error::Singular("pencil reduction"))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or(Error::Singular("pencil reduction"))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Symmetric part `½(m + mᵀ)`.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `xᵀ m y`
pub fn bilinear(m: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    x.dot(&(m * y))
}
