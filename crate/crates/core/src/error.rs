use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (grid, field, parameters).
    #[error("invalid input: {0}")]
    Input(String),

    /// Every grid point was excluded by a mask.
    #[error("degenerate field: all {0} grid points are masked")]
    FullyMasked(usize),

    /// A denominator vanishes at a point the mask does not exclude.
    #[error("unmasked singularity at x = {x:.6} (|value| = {magnitude:.3e})")]
    Singular { x: f64, magnitude: f64 },

    /// E_n <= E_0: the factorization energy is not below the level.
    #[error("broken SUSY: e_n = {e_n} must exceed e0 = {e0}")]
    BrokenSusy { e_n: f64, e0: f64 },

    /// The linearizing variable v of W = v'/v has a zero.
    #[error("nodeful linearization: v changes sign near x = {x:.6}; adjust w0 or e0")]
    Nodeful { x: f64 },

    /// Shooting bracket does not straddle the bounded trajectory.
    #[error("bad shooting bracket: {0}")]
    Bracket(String),

    /// No bounded Riccati trajectory exists for the given parameters.
    #[error("no bounded Riccati trajectory: {0}")]
    Unbounded(String),

    /// Step-size control, linear solve, or other numerical failure.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The caller violated a documented contract of the construction.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Vacuum evolution hit a zero of u (blow-up of the vacuum field).
    #[error("evolution halted at step {step} (t = {t:.6}): {reason}")]
    EvolutionHalted { step: usize, t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
