//! Supersymmetric partner equations for nonlinear Schrödinger-type
//! eigenproblems `-ψ'' - N(ψ)ψ = Eψ`.
//!
//! The superpotential solves the eigenstate-dependent Riccati equation
//! `W² + W' = -N(ψ) - E₀`; `Â = d/dx + W` then maps `ψ` to its partner `φ`
//! and back. Everything is sampled on a uniform grid and checked by pointwise
//! residuals ([`ResidualReport`]).

// `!(x > 0.0)` also rejects NaN; index loops mirror the stencil algebra
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod catalog;
pub mod diff;
pub mod error;
pub mod grid;
pub mod ode;
pub mod residuals;
pub mod riccati;
pub mod susy;
pub mod vacuum;

pub use catalog::{energy_of, eval_catalog, AnalyticSolutionFamily, CatalogMember};
pub use diff::{Boundary, DerivativeScheme, SchemeKind};
pub use error::{Error, Result};
pub use grid::{Field, Grid1D, Mask, ResidualReport};
pub use residuals::{
    duality_defect, invert_field, nlse_residual, partner_residual_phi, partner_residual_u, PartnerForm,
    ResidualOptions,
};
pub use riccati::{
    riccati_residual, solve_riccati_linearized, solve_riccati_shooting, NonlinearitySpec, Provenance,
    RiccatiSolver, Superpotential,
};
pub use susy::{
    apply_a, apply_a_dagger, factorization_check, partner_from_psi, psi_from_partner, superpotential_from_pair,
    vacuum_state_from_w, PotentialField, PotentialRole, SusyPair,
};
pub use vacuum::{
    evolve_vacuum, lax_residual, modulus_drift, scale_invariance_check, vacuum_residual, EvolutionState, LaxPair,
    LaxReport, VacuumEvolver,
};

pub use num_complex::Complex64;
