//! Closed-form Gaussian posterior for the linear sequence model.
//!
//! With diagonal forward operator, diagonal prior covariance Λ and noise
//! covariance (1/n)·I, every interpolating measure π_τ of the homotopy from
//! prior (τ = 0) to posterior (τ = 1) is Gaussian with per-coordinate
//!
//!   mean_i     = τ·λᵢ·κᵢ·Ỹᵢ / (τ·λᵢ·κᵢ² + 1/n)
//!   variance_i = λᵢ − τ·λᵢ²·κᵢ² / (τ·λᵢ·κᵢ² + 1/n)
//!
//! This is the analytic oracle the ensemble filter is verified against.

use crate::model::{ObservationSet, PriorSpec};
use crate::spectral::SpectralBasis;
use crate::{Error, Result, SeqVector};

/// Diagonal Gaussian π_τ.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: SeqVector,
    pub variance: Vec<f64>,
    pub tau: f64,
}

/// Exact moments of π_τ.
pub fn posterior_moments(
    basis: &SpectralBasis,
    prior: &PriorSpec,
    obs: &ObservationSet,
    tau: f64,
) -> Result<GaussianPosterior> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument("tau must be finite and ≥ 0".into()));
    }
    prior.validate()?;
    let d = obs.dim();
    if d > prior.dim || d > basis.dim {
        return Err(Error::InvalidArgument(format!(
            "observation dim {} exceeds prior dim {} or basis dim {}",
            d, prior.dim, basis.dim
        )));
    }
    let inv_n = 1.0 / obs.n as f64;
    let mut mean = Vec::with_capacity(d);
    let mut variance = Vec::with_capacity(d);
    for i in 1..=d {
        let lam = prior.eigenvalue(i);
        let kap = basis.kappa(i);
        let denom = tau * lam * kap * kap + inv_n;
        mean.push(tau * lam * kap * obs.ytilde[i - 1] / denom);
        variance.push(lam - tau * lam * lam * kap * kap / denom);
    }
    Ok(GaussianPosterior {
        mean,
        variance,
        tau,
    })
}

/// Gaussian mode = mean; equals the penalised least-squares minimiser
/// v ↦ τ‖Ỹ − 𝒦v‖²·n + ‖Λ^{-1/2}v‖² up to the shared normalisation.
pub fn map_estimate(posterior: &GaussianPosterior) -> SeqVector {
    posterior.mean.clone()
}

/// Minimax contraction exponent β/(β + p + α + 1) for truth smoothness β,
/// forward smoothing p, prior smoothness α.
pub fn theoretical_rate(beta: f64, p: f64, alpha: f64) -> Result<f64> {
    // α = 0 (no extra prior regularity) is a meaningful boundary case.
    if !(beta > 0.0 && p > 0.0 && alpha >= 0.0) {
        return Err(Error::InvalidArgument(
            "rate exponents must be positive (alpha may be 0)".into(),
        ));
    }
    Ok(beta / (beta + p + alpha + 1.0))
}

/// Whether (β, p, α) sits inside the regime the rate statement assumes;
/// callers should surface a warning — not an error — when this is false.
pub fn rate_assumption_ok(beta: f64, p: f64, alpha: f64) -> bool {
    beta <= 1.0 + 2.0 * alpha + 2.0 * p
}
