//! Numerical half-line inverse scattering for the Schrödinger operator
//! `-u'' + q(x) u = k^2 u` with a Dirichlet condition at the origin.
//!
//! The crate covers the full pipeline in both directions:
//!
//! * forward map: potential `q` → transformation kernel `A(x,y)` (Volterra
//!   equation) → Jost function `f(k)`, S-matrix `S(k) = f(-k)/f(k)`, bound
//!   states `k_j` and norming constants `s_j`;
//! * data side: scattering data → `F`-function synthesis, and the reverse
//!   extraction of `{S, k_j, s_j}` from the asymptotics of `F`;
//! * inversion core: Marchenko equation `A + ∫ A F = -F` solved per row by a
//!   Nyström discretization, potential recovery `q = -2 dA(x,x)/dx`, and the
//!   inverse step `A → F`;
//! * diagnostics: σ-profile envelopes, the two-sided kernel/data inequalities,
//!   unitarity and index (Levinson) checks, compact-support and
//!   square-integrability tests.
//!
//! All state is immutable after construction and every operation is pure, so
//! values can be shared freely across threads.

pub mod error;
pub mod estimates;
pub mod forward;
pub mod marchenko;
pub mod numerics;
pub mod potential;
pub mod report;
pub mod scattering;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
