//! Model parameters, stability-case classification and the domain
//! constants (trace norm `B`, Poincaré constant `C(Ω)`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discretization::p1_matrices;
use crate::error::{Error, Result};
use crate::linalg::sym_pencil_eigenvalues;

/// Relative margin keeping a chosen ξ strictly inside its interval.
pub const XI_MARGIN: f64 = 1e-6;

/// Physical and delay parameters of the damped wave system on `(0, length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Kelvin–Voigt coefficient.
    pub alpha: f64,
    /// Weight of the undelayed boundary damping.
    pub mu1: f64,
    /// Weight of the delayed boundary feedback.
    pub mu2: f64,
    /// Delay.
    pub tau: f64,
    /// Length of the interval; `x = 0` is clamped, `x = length` carries the tip mass.
    pub length: f64,
    /// Weight of the delay-line energy. Chosen automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

impl SystemParams {
    pub fn new(alpha: f64, mu1: f64, mu2: f64, tau: f64, length: f64) -> Self {
        Self {
            alpha,
            mu1,
            mu2,
            tau,
            length,
            xi: None,
        }
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn finite(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite, got {v}")))
            }
        }
        finite("alpha", self.alpha)?;
        finite("mu1", self.mu1)?;
        finite("mu2", self.mu2)?;
        finite("tau", self.tau)?;
        finite("length", self.length)?;
        if self.tau <= 0.0 {
            return Err(Error::param(
                "tau",
                format!("must be > 0, got {}", self.tau),
            ));
        }
        if self.length <= 0.0 {
            return Err(Error::param(
                "length",
                format!("must be > 0, got {}", self.length),
            ));
        }
        if self.alpha < 0.0 {
            return Err(Error::param(
                "alpha",
                format!("must be >= 0, got {}", self.alpha),
            ));
        }
        if self.mu1 < 0.0 {
            return Err(Error::param(
                "mu1",
                format!("must be >= 0, got {}", self.mu1),
            ));
        }
        if self.mu2 < 0.0 {
            return Err(Error::param(
                "mu2",
                format!("must be >= 0, got {}", self.mu2),
            ));
        }
        if let Some(xi) = self.xi {
            if !(xi.is_finite() && xi > 0.0) {
                return Err(Error::param(
                    "xi",
                    format!("must be finite and > 0, got {xi}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    /// `μ₂ < μ₁` (with `α > 0`).
    Case1,
    /// `μ₂ ≥ μ₁` and `α > (μ₂ − μ₁)B²`.
    Case2,
    /// `μ₂ ≥ μ₁` and `α ≤ (μ₂ − μ₁)B²`.
    Infeasible,
    /// `μ₂ < μ₁` without Kelvin–Voigt damping: dissipative, but outside
    /// the proved decay regime.
    Exploratory,
}

impl CaseTag {
    pub fn is_feasible(self) -> bool {
        matches!(self, CaseTag::Case1 | CaseTag::Case2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Case1 => "Case1",
            CaseTag::Case2 => "Case2",
            CaseTag::Infeasible => "Infeasible",
            CaseTag::Exploratory => "Exploratory",
        }
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub case_tag: CaseTag,
    pub xi_low: f64,
    pub xi_high: f64,
    /// Case2 excludes the upper end.
    pub high_is_strict: bool,
    pub chosen_xi: Option<f64>,
    center: f64,
}

impl StabilityVerdict {
    /// True when no ξ satisfies the interval constraints.
    pub fn interval_is_empty(&self) -> bool {
        if self.high_is_strict {
            self.xi_high <= self.xi_low
        } else {
            self.xi_high < self.xi_low
        }
    }

    pub fn contains(&self, xi: f64) -> bool {
        let below = if self.high_is_strict {
            xi < self.xi_high
        } else {
            xi <= self.xi_high
        };
        xi >= self.xi_low && below
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiPolicy {
    Midpoint,
    /// `τμ₂·(1 + margin)`, clipped into the interval interior.
    LowerEdgePlusMargin(f64),
}

/// Classifies the parameter set and returns the admissible ξ interval.
/// A user-supplied `params.xi` is checked against the interval of a
/// feasible case and reported as `chosen_xi`.
pub fn classify_case(
    params: &SystemParams,
    constants: &DomainConstants,
) -> Result<StabilityVerdict> {
    params.validate()?;
    let SystemParams {
        alpha,
        mu1,
        mu2,
        tau,
        ..
    } = *params;
    let b2 = constants.trace_b * constants.trace_b;

    let verdict = if mu2 < mu1 {
        StabilityVerdict {
            case_tag: if alpha > 0.0 {
                CaseTag::Case1
            } else {
                CaseTag::Exploratory
            },
            xi_low: tau * mu2,
            xi_high: tau * (2.0 * mu1 - mu2),
            high_is_strict: false,
            chosen_xi: None,
            center: tau * mu1,
        }
    } else {
        let low = tau * mu2;
        let high = 2.0 * tau * (alpha / b2 + mu1 - mu2 / 2.0);
        StabilityVerdict {
            case_tag: if alpha > (mu2 - mu1) * b2 {
                CaseTag::Case2
            } else {
                CaseTag::Infeasible
            },
            xi_low: low,
            xi_high: high,
            high_is_strict: true,
            chosen_xi: None,
            center: 0.5 * (low + high),
        }
    };

    match params.xi {
        Some(xi) if verdict.case_tag.is_feasible() => {
            if verdict.contains(xi) {
                Ok(StabilityVerdict {
                    chosen_xi: Some(xi),
                    ..verdict
                })
            } else {
                Err(Error::XiOutsideInterval {
                    xi,
                    low: verdict.xi_low,
                    high: verdict.xi_high,
                })
            }
        }
        _ => Ok(verdict),
    }
}

/// Picks a ξ strictly inside the feasible interval.
pub fn choose_xi(verdict: &StabilityVerdict, policy: XiPolicy) -> Result<f64> {
    match verdict.case_tag {
        CaseTag::Case1 | CaseTag::Case2 => {}
        CaseTag::Infeasible => {
            return Err(Error::NoAdmissibleXi(format!(
                "alpha too small: interval [{}, {}) is empty",
                verdict.xi_low, verdict.xi_high
            )))
        }
        CaseTag::Exploratory => {
            return Err(Error::NoAdmissibleXi(
                "parameters are outside the proved decay regimes".into(),
            ))
        }
    }
    let (low, high) = (verdict.xi_low, verdict.xi_high);
    let width = high - low;
    if !(width > 0.0) {
        return Err(Error::NoAdmissibleXi(format!(
            "degenerate interval [{low}, {high}]"
        )));
    }
    let pad = XI_MARGIN * width;
    let xi = match policy {
        XiPolicy::Midpoint => verdict.center,
        XiPolicy::LowerEdgePlusMargin(margin) => {
            (low * (1.0 + margin)).clamp(low + pad, high - pad)
        }
    };
    Ok(xi)
}

/// ξ used for delay-line bookkeeping when no admissible value exists.
pub fn fallback_xi(params: &SystemParams) -> f64 {
    if params.mu2 > 0.0 {
        1.01 * params.tau * params.mu2
    } else {
        params.tau
    }
}

/// Resolves the ξ to assemble with: the user's value, else the midpoint of
/// a feasible interval, else [`fallback_xi`].
pub fn resolve_xi(params: &SystemParams, verdict: &StabilityVerdict) -> f64 {
    if let Some(xi) = params.xi {
        return xi;
    }
    choose_xi(verdict, XiPolicy::Midpoint).unwrap_or_else(|_| fallback_xi(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainConstants {
    /// Norm of the trace `H¹_{Γ₀} → L²(Γ₁)`.
    pub trace_b: f64,
    /// Poincaré constant on `H¹_{Γ₀}`.
    pub poincare_c: f64,
}

impl DomainConstants {
    pub fn compute(length: f64, n_cells: usize) -> Result<Self> {
        Ok(Self {
            trace_b: trace_constant(length, n_cells)?,
            poincare_c: poincare_constant(length, n_cells)?,
        })
    }
}

fn check_constant_inputs(length: f64, n_cells: usize) -> Result<()> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::param("length", format!("must be > 0, got {length}")));
    }
    if n_cells < 4 {
        return Err(Error::MeshTooCoarse(format!(
            "constants need n_cells >= 4, got {n_cells}"
        )));
    }
    Ok(())
}

/// Discrete trace norm: `sup |u(L)| / ‖u'‖₂` over P1 functions with
/// `u(0) = 0`, from the largest eigenvalue of the pencil
/// (boundary Gram, stiffness).
pub fn trace_constant(length: f64, n_cells: usize) -> Result<f64> {
    check_constant_inputs(length, n_cells)?;
    let (k, _) = p1_matrices(length, n_cells, false);
    let mut boundary = DMatrix::zeros(n_cells, n_cells);
    boundary[(n_cells - 1, n_cells - 1)] = 1.0;
    let ev = sym_pencil_eigenvalues(&boundary, &k.to_dense())
        .map_err(|_| Error::Singular("stiffness matrix"))?;
    let top = *ev.last().expect("nonempty spectrum");
    Ok(top.max(0.0).sqrt())
}

/// Discrete Poincaré constant: `sup ‖u‖₂ / ‖u'‖₂` over P1 functions with
/// `u(0) = 0`, from the smallest eigenvalue of (stiffness, interior mass).
pub fn poincare_constant(length: f64, n_cells: usize) -> Result<f64> {
    check_constant_inputs(length, n_cells)?;
    let (k, m) = p1_matrices(length, n_cells, false);
    let ev = sym_pencil_eigenvalues(&k.to_dense(), &m.to_dense())?;
    let smallest = ev[0];
    if !(smallest > 0.0) {
        return Err(Error::Singular("stiffness matrix"));
    }
    Ok(1.0 / smallest.sqrt())
}
