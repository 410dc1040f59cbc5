//! Early-stopped ensemble Kalman-Bucy inversion for the 1-D stationary
//! Schrodinger inverse problem −½u″ + f·u = 0 on (0, 2π).
//!
//! The problem is linearised by reparametrising to v = −Δu, which turns the
//! observations into a diagonal sequence-space model Ỹᵢ = κᵢvᵢ + n^{-1/2}ξᵢ
//! in the Dirichlet-Laplacian eigenbasis. The crate provides:
//!
//! - [`spectral`]: the eigenbasis, grids, and coefficient↔function transforms;
//! - [`model`]: prior spectrum, ground truth, observations, residuals,
//!   effective dimension, and the discrepancy threshold;
//! - [`posterior`]: the closed-form Gaussian posterior homotopy (the analytic
//!   oracle for the filter) and the theoretical contraction exponent;
//! - [`filter`]: the deterministic ensemble Kalman-Bucy filter with empirical
//!   moments, Kalman gain, and discrepancy-principle early stopping;
//! - [`pullback`]: the nonlinear solution map f = s·v/(2(𝒦v+g̃)), an
//!   independent finite-difference PDE oracle, and round-trip validation;
//! - [`rng`]: seeded, splittable random streams for reproducible replicates.

use std::fmt;

pub use nalgebra;

pub mod filter;
pub mod model;
pub mod posterior;
pub mod pullback;
pub mod rng;
pub mod spectral;

/// Coefficient vector in the eigenbasis.
pub type SeqVector = Vec<f64>;

/// Library error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// Projection dimension too large for the quadrature grid (aliasing guard).
    IllConditionedProjection { dim: usize, grid_points: usize },
    /// The filter produced non-finite values (step size too large).
    Divergence { step: usize },
    /// Every sampled pair hit the essinf guard; the probe has no data.
    ProbeUndefined,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::IllConditionedProjection { dim, grid_points } => write!(
                f,
                "projection dimension {dim} exceeds aliasing guard for {grid_points}-point grid"
            ),
            Error::Divergence { step } => {
                write!(f, "filter diverged at step {step} (reduce dt)")
            }
            Error::ProbeUndefined => write!(f, "all probe samples hit the essinf guard"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
