//! Branching Brownian motion driven by Kato-class branching-rate measures.
//!
//! The crate is organised around the pieces needed to study how fast such a
//! particle system spreads:
//!
//! - [`measures`]: branching-rate measures, offspring laws, additive
//!   functionals along Brownian paths and exact local-time samplers.
//! - [`spectral`]: principal eigenvalues of `½Δ + ν` for the supported
//!   measures, resolvent kernels and the rate functions built from them.
//! - [`bbm`]: the particle simulator, exact event-driven samplers for a
//!   single point catalyst, trajectory statistics and rate fitting.
//! - [`feynman_kac`]: Monte Carlo and quadrature estimators of
//!   `E_x[exp(A_t); B_t ∈ E]` and the many-to-one comparison.
//! - [`fkpp`]: the semilinear heat equation whose solution is the law of the
//!   maximal displacement.

pub mod bbm;
pub mod error;
pub mod feynman_kac;
pub mod fkpp;
pub mod measures;
pub mod point;
pub mod quadrature;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use point::Point;
