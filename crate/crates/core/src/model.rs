//! Linearised sequence-space observation model.
//!
//! Working model: Ỹᵢ = κᵢ·v₀ᵢ + n^{-1/2}·ξᵢ for i ≤ D, with ξᵢ i.i.d.
//! standard normal. The prior on v is a centred Gaussian with diagonal
//! covariance λᵢ = scale·i^{-1-2α}; the truth v₀ᵢ = i^{-decay} sits at one
//! prior standard deviation in every coordinate when decay = (1+2α)/2.

use crate::rng::stream;
use crate::spectral::SpectralBasis;
use crate::{Error, Result, SeqVector};
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;

/// Exponent family for the prior spectrum.
///
/// `Standard` is λᵢ = scale·i^{-1-2α}, the form every rate statement uses.
/// `Alternate` is λᵢ = scale·i^{-1/2-α}, a rougher variant kept reachable
/// for reproducing simulation-section figures that quote it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorForm {
    Standard,
    Alternate,
}

/// Diagonal Gaussian prior spectrum.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    pub alpha: f64,
    /// Overall variance factor τ²; 0 collapses the prior to a point mass.
    pub scale: f64,
    pub dim: usize,
    pub form: PriorForm,
}

impl PriorSpec {
    pub fn new(alpha: f64, scale: f64, dim: usize) -> Result<Self> {
        let spec = PriorSpec {
            alpha,
            scale,
            dim,
            form: PriorForm::Standard,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument("prior alpha must be > 0".into()));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidArgument("prior scale must be ≥ 0".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidArgument("prior dim must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Prior variance of coordinate `i` (1-based).
    pub fn eigenvalue(&self, i: usize) -> f64 {
        let exponent = match self.form {
            PriorForm::Standard => -(1.0 + 2.0 * self.alpha),
            PriorForm::Alternate => -(0.5 + self.alpha),
        };
        self.scale * (i as f64).powf(exponent)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.dim).map(|i| self.eigenvalue(i)).collect()
    }
}

/// One realisation of the truncated data vector.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub ytilde: SeqVector,
    /// Sample size; per-coordinate noise variance is 1/n.
    pub n: u64,
    pub seed: u64,
    /// Retained for evaluation only — estimators never read it.
    pub truth: SeqVector,
}

impl ObservationSet {
    pub fn dim(&self) -> usize {
        self.ytilde.len()
    }

    /// Debug/cross-check export: one row per coordinate.
    pub fn write_csv<W: Write>(&self, basis: &SpectralBasis, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "i,kappa_i,ytilde_i,truth_i")?;
        for (idx, (y, t)) in self.ytilde.iter().zip(&self.truth).enumerate() {
            writeln!(out, "{},{},{},{}", idx + 1, basis.kappa(idx + 1), y, t)?;
        }
        Ok(())
    }
}

/// Run-level configuration shared by the filter and the studies.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub alpha: f64,
    /// Forward smoothing order; κᵢ ≍ i^{-p}.
    pub p: f64,
    pub n: u64,
    /// Fixed model dimension; `None` uses `effective_dimension`.
    pub d_override: Option<usize>,
    /// Constant c in D(n) = max(1, round(c·n^{1/(2p+1)})).
    pub dim_constant: f64,
    /// Constant C in the stopping threshold κ = C·D/n.
    pub kappa_constant: f64,
    pub dt: f64,
    /// Ensemble size J.
    pub particles: usize,
    pub seed: u64,
    pub k_max: usize,
    pub quantile_level: f64,
    pub prior_form: PriorForm,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            alpha: 2.0,
            p: 2.0,
            n: 10_000,
            d_override: None,
            dim_constant: 1.0,
            kappa_constant: 1.0,
            dt: 0.01,
            particles: 512,
            seed: 42,
            k_max: 20_000,
            quantile_level: 0.95,
            prior_form: PriorForm::Standard,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument("alpha must be > 0".into()));
        }
        if !(self.p > 0.0) {
            return Err(Error::InvalidArgument("p must be > 0".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be ≥ 1".into()));
        }
        if self.d_override == Some(0) {
            return Err(Error::InvalidArgument("dimension override must be ≥ 1".into()));
        }
        if !(self.dim_constant > 0.0) {
            return Err(Error::InvalidArgument("dim constant must be > 0".into()));
        }
        if !(self.kappa_constant > 0.0 && self.kappa_constant <= 1.0) {
            return Err(Error::InvalidArgument(
                "threshold constant must lie in (0, 1]".into(),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        if self.particles < 2 {
            return Err(Error::InvalidArgument("need at least 2 particles".into()));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be ≥ 1".into()));
        }
        if !(self.quantile_level > 0.0 && self.quantile_level < 1.0) {
            return Err(Error::InvalidArgument(
                "quantile level must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Model dimension in force: the override, or D(n).
    pub fn dim(&self) -> usize {
        self.d_override
            .unwrap_or_else(|| effective_dimension(self.n, self.p, self.dim_constant))
    }

    /// Unit-scale prior at this configuration's smoothness, `dim` coordinates.
    pub fn prior(&self, dim: usize) -> PriorSpec {
        PriorSpec {
            alpha: self.alpha,
            scale: 1.0,
            dim,
            form: self.prior_form,
        }
    }
}

/// D(n) = max(1, round(c·n^{1/(2p+1)})).
pub fn effective_dimension(n: u64, p: f64, c: f64) -> usize {
    let d = c * (n as f64).powf(1.0 / (2.0 * p + 1.0));
    (d.round() as usize).max(1)
}

/// Truth coefficients v₀ᵢ = i^{-decay}.
pub fn ground_truth(dim: usize, decay: f64) -> Result<SeqVector> {
    if dim == 0 {
        return Err(Error::InvalidArgument("truth dimension must be ≥ 1".into()));
    }
    if !(decay > 0.5) {
        return Err(Error::InvalidArgument(
            "truth decay must exceed 1/2 for square-summability".into(),
        ));
    }
    Ok((1..=dim).map(|i| (i as f64).powf(-decay)).collect())
}

/// Diagonal forward action (𝒦v)ᵢ = κᵢ·vᵢ.
pub fn apply_forward(basis: &SpectralBasis, v: &[f64]) -> Result<SeqVector> {
    if v.len() > basis.dim {
        return Err(Error::InvalidArgument(format!(
            "{} coordinates exceed basis dimension {}",
            v.len(),
            basis.dim
        )));
    }
    Ok(v.iter()
        .zip(&basis.forward_singular_values)
        .map(|(vi, k)| k * vi)
        .collect())
}

/// Draw Ỹᵢ = κᵢ·v₀ᵢ + n^{-1/2}·ξᵢ for i ≤ dim.
///
/// Noise comes from a dedicated stream keyed by `seed`, so the output is
/// identical no matter what else the process has sampled. `noise_free`
/// yields the exact image κ·v₀ for solver round-trip oracles.
pub fn generate_observations(
    basis: &SpectralBasis,
    v0: &[f64],
    n: u64,
    dim: usize,
    seed: u64,
    noise_free: bool,
) -> Result<ObservationSet> {
    if dim > v0.len() || v0.len() > basis.dim {
        return Err(Error::InvalidArgument(format!(
            "need dim ≤ len(v0) ≤ basis dim, got {} / {} / {}",
            dim,
            v0.len(),
            basis.dim
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be ≥ 1".into()));
    }
    let sigma = if noise_free { 0.0 } else { 1.0 / (n as f64).sqrt() };
    let mut rng = stream(seed, "observations", 0);
    let ytilde: SeqVector = (0..dim)
        .map(|i| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            basis.kappa(i + 1) * v0[i] + sigma * xi
        })
        .collect();
    Ok(ObservationSet {
        ytilde,
        n,
        seed,
        truth: v0[..dim].to_vec(),
    })
}

/// Full residual R(v) = Σ_{i≤D} (Ỹᵢ − κᵢ·vᵢ)²; coordinates of v beyond its
/// length count as zero.
pub fn residual(basis: &SpectralBasis, obs: &ObservationSet, v: &[f64]) -> f64 {
    residual_projected(basis, obs, v, obs.dim())
}

/// Residual restricted to the first `dim` coordinates.
///
/// Stopping uses this with `dim` = D(n): the statistically informative block.
/// At full model dimension the noise term alone contributes a χ²_D/n floor
/// whose fluctuations can exceed any C·D/n threshold with C ≤ 1.
pub fn residual_projected(
    basis: &SpectralBasis,
    obs: &ObservationSet,
    v: &[f64],
    dim: usize,
) -> f64 {
    let d = dim.min(obs.dim());
    (0..d)
        .map(|i| {
            let vi = v.get(i).copied().unwrap_or(0.0);
            let r = obs.ytilde[i] - basis.kappa(i + 1) * vi;
            r * r
        })
        .sum()
}

/// Discrepancy threshold κ = C·D/n.
pub fn discrepancy_threshold(config: &ModelConfig, dim: usize, n: u64) -> f64 {
    config.kappa_constant * dim as f64 / n as f64
}
