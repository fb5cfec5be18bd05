//! Error taxonomy shared by every module.

use thiserror::Error;

/// Everything that can go wrong in the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated (off-grid point, bad range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested interval leaves the sampled grid.
    #[error("range error: {0}")]
    Range(String),

    /// Oscillation not resolved by the grid: |x|·dk exceeds the cap.
    #[error("resolution error: |x|·dk = {product:.3} > 1 (x = {x}, dk = {dk})")]
    Resolution { x: f64, dk: f64, product: f64 },

    /// Grid construction failed an invariant.
    #[error("grid error: {0}")]
    Grid(String),

    /// A fixed-point iteration failed to reach its tolerance.
    #[error("iteration did not converge after {iterations} sweeps (last update {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },

    /// The Jost function nearly vanishes at a real k ≠ 0, so S(k) is ill-defined.
    #[error("near-zero Jost function at k = {k}: |f(k)| = {magnitude:.3e}")]
    NearZeroJost { k: f64, magnitude: f64 },

    /// A bound-state zero with vanishing derivative (violates simplicity).
    #[error("degenerate zero of the Jost function at κ = {kappa}: |g'| = {slope:.3e}")]
    DegenerateZero { kappa: f64, slope: f64 },

    /// Data fails an internal consistency requirement (e.g. s_j ≤ 0).
    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    /// The discretized Fredholm operator is singular to working precision.
    #[error("singular system at x = {x} (reciprocal condition estimate {rcond:.3e})")]
    Singular { x: f64, rcond: f64 },

    /// A contraction-mapping iteration saw its updates grow.
    #[error("contraction violated at x = {x}: update norms increased")]
    ContractionViolation { x: f64 },

    /// A safeguard iteration cap was reached.
    #[error("iteration cap reached: {0}")]
    IterationCap(String),

    /// Exponential-sum fit residual above the acceptance threshold.
    #[error("exponential fit failed: residual {residual:.3e} > threshold {threshold:.3e}")]
    Fit { residual: f64, threshold: f64 },

    /// Input potential outside the admissible class.
    #[error("class violation: {0}")]
    ClassViolation(String),

    /// Synthesis produced a non-negligible imaginary part where a real value is required.
    #[error("synthesis error: {0}")]
    Synthesis(String),

    /// Scattering-data validation failed (condition A / condition B).
    #[error("validation failed: {0}")]
    Validation(String),
}
