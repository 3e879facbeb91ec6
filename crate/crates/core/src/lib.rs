//! Kernels of hyperbolic Brownian motion with drift on the half-space
//! `D = {x ∈ H^n : x₁ > 0}`.
//!
//! The crate evaluates the transition density, potential kernel, Green
//! function and Poisson kernels of the process generated by `½Δ_μ`, the
//! special functions they are built from, and a Monte Carlo engine that
//! cross-checks them by simulation. The [`verify`] module bundles the
//! numerical checks into reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod estimates;
pub mod geometry;
pub mod hartman_watson;
pub mod kernels;
pub mod montecarlo;
pub mod quad;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{BoundaryPoint, CoshDistance, DomainPoint, HyperPoint, ModelParams, Wall};
pub use quad::{QuadResult, QuadSpec};
