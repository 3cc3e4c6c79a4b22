//! Numerical laboratory for the wave equation with Kelvin–Voigt damping,
//! a dynamic (tip-mass) boundary condition and a delayed boundary feedback.
//!
//! The delayed term is handled through the transport reformulation
//! `z(ρ, t) = u_t(L, t − τρ)`, which turns the problem into the autonomous
//! linear system `V' = A V` on the state `V = (u, u_t, u_t|Γ₁, z)`.
//! The crate discretizes that system on `Ω = (0, L)` with P1 finite
//! elements and an upwind delay line, integrates it with a θ-scheme, and
//! checks the stability theory numerically: weighted energy, Lyapunov
//! functional, dissipativity of the generator, spectra and parameter sweeps.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod discretization;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod output;
pub mod params;
pub mod simulate;
pub mod spectral;
pub mod sweep;

pub use discretization::{assemble, initial_state, DiscreteState, GeneratorPair, Mesh};
pub use error::{Error, Result};
pub use functionals::{energy, fit_decay, lyapunov, DecayFit, EnergySample};
pub use params::{
    choose_xi, classify_case, poincare_constant, trace_constant, CaseTag, DomainConstants,
    StabilityVerdict, SystemParams, XiPolicy,
};
pub use simulate::{integrate, step, TimeGrid, Trajectory};
pub use spectral::{dissipativity_certificate, resolvent_test, spectrum, SpectrumReport};
pub use sweep::{run_sweep, SweepPlan, SweepRecord};
