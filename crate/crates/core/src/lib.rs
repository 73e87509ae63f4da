//! Radial numerics for the four-dimensional nonlinear Schrödinger equation
//!
//! ```text
//! i ∂_t u + Δu = -|u|²u + |u|^{4/3}u,   x ∈ R⁴
//! ```
//!
//! with a focusing energy-critical cubic term and a defocusing lower-order
//! term. The crate provides the variational functionals and the sub-threshold
//! classification, the ground state and threshold, a conservative
//! split-step integrator, and virial / interaction-Morawetz diagnostics.

// `!(x > 0.0)` is how NaN gets rejected; `is_multiple_of` postdates the MSRV.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod cutoff;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod functionals;
pub mod ground_state;
pub mod radial;
pub mod snapshot;
pub mod tridiag;
pub mod variational;

pub use error::{LabError, Result};
pub use functionals::{FunctionalReport, Norms, RegionLabel, ScalingPair, Threshold};
pub use radial::{Field, RadialGrid};
