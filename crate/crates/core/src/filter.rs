//! Deterministic discrete-time ensemble Kalman–Bucy filter with
//! discrepancy-principle early stopping.
//!
//! Per step, with empirical moments of the current ensemble,
//!
//!   K_k = Δt·𝒞ᴶ(Δt·Sᴶ + I)^{-1},
//!   v^{(j)} ← v^{(j)} − ½·K_k·(𝒦v^{(j)} + m^J_𝒦 − 2Ỹ),
//!
//! where Δt is the effective step n·dt: the observation covariance is
//! (1/n)·I, and absorbing n into the step keeps the update formulas in
//! unit-covariance form while k·dt remains the homotopy time that the
//! closed-form posterior family is indexed by.

use crate::model::{residual_projected, ObservationSet, PriorSpec};
use crate::rng::stream;
use crate::spectral::SpectralBasis;
use crate::{Error, Result, SeqVector};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;

/// Particle system; row j is particle v^{(j)}.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub particles: DMatrix<f64>,
    /// Completed update count k; the homotopy time is τ = k·dt.
    pub time_index: usize,
    pub dt: f64,
}

impl Ensemble {
    pub fn size(&self) -> usize {
        self.particles.nrows()
    }

    pub fn dim(&self) -> usize {
        self.particles.ncols()
    }

    pub fn tau(&self) -> f64 {
        self.time_index as f64 * self.dt
    }

    /// Ensemble mean m^J.
    pub fn mean(&self) -> SeqVector {
        self.particles.row_mean().iter().copied().collect()
    }

    /// Unbiased per-coordinate sample variances.
    pub fn coordinate_variances(&self) -> SeqVector {
        let j = self.size();
        let means = self.particles.row_mean();
        (0..self.dim())
            .map(|c| {
                self.particles
                    .column(c)
                    .iter()
                    .map(|&x| (x - means[c]) * (x - means[c]))
                    .sum::<f64>()
                    / (j as f64 - 1.0)
            })
            .collect()
    }
}

/// First and second empirical moments, (J−1)-normalised.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub mean: SeqVector,
    pub forward_mean: SeqVector,
    pub cov: DMatrix<f64>,
    pub cross_cov: DMatrix<f64>,
    pub forward_cov: DMatrix<f64>,
}

/// Outcome of a discrepancy-stopped run.
#[derive(Debug, Clone)]
pub struct StopReport {
    pub k_dp: usize,
    pub tau_dp: f64,
    /// R_0 ..= R_{k_dp}, evaluated at the ensemble mean.
    pub residual_path: Vec<f64>,
    pub hit_cap: bool,
}

impl StopReport {
    /// Residual-path export, one row per iterate.
    pub fn write_csv<W: Write>(&self, dt: f64, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "k,tau,residual")?;
        for (k, r) in self.residual_path.iter().enumerate() {
            writeln!(out, "{},{},{}", k, k as f64 * dt, r)?;
        }
        Ok(())
    }
}

/// J i.i.d. draws from N(0, Λ), coordinate variances Λᵢᵢ = λᵢ.
pub fn init_ensemble(j: usize, prior: &PriorSpec, seed: u64, dt: f64) -> Result<Ensemble> {
    if j < 2 {
        return Err(Error::InvalidArgument(
            "empirical covariances need at least 2 particles".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    prior.validate()?;
    let sd: Vec<f64> = (1..=prior.dim).map(|i| prior.eigenvalue(i).sqrt()).collect();
    let mut rng = stream(seed, "ensemble-init", 0);
    let mut particles = DMatrix::zeros(j, prior.dim);
    for r in 0..j {
        for c in 0..prior.dim {
            let xi: f64 = StandardNormal.sample(&mut rng);
            particles[(r, c)] = sd[c] * xi;
        }
    }
    Ok(Ensemble {
        particles,
        time_index: 0,
        dt,
    })
}

fn moments_of(basis: &SpectralBasis, particles: &DMatrix<f64>) -> Result<EmpiricalMoments> {
    let j = particles.nrows();
    let d = particles.ncols();
    if j < 2 {
        return Err(Error::InvalidArgument(
            "empirical covariances need at least 2 particles".into(),
        ));
    }
    if d > basis.dim {
        return Err(Error::InvalidArgument(format!(
            "ensemble dimension {} exceeds basis dimension {}",
            d, basis.dim
        )));
    }
    let jm1 = j as f64 - 1.0;
    let forward = DMatrix::from_fn(j, d, |r, c| particles[(r, c)] * basis.kappa(c + 1));
    let mean_row = particles.row_mean();
    let fmean_row = forward.row_mean();
    let ones = DVector::from_element(j, 1.0);
    let xdev = particles - &ones * &mean_row;
    let fdev = &forward - &ones * &fmean_row;
    Ok(EmpiricalMoments {
        mean: mean_row.iter().copied().collect(),
        forward_mean: fmean_row.iter().copied().collect(),
        cov: xdev.transpose() * &xdev / jm1,
        cross_cov: xdev.transpose() * &fdev / jm1,
        forward_cov: fdev.transpose() * &fdev / jm1,
    })
}

/// Mean, forward mean, and the three (J−1)-normalised covariances.
pub fn empirical_moments(basis: &SpectralBasis, ens: &Ensemble) -> Result<EmpiricalMoments> {
    moments_of(basis, &ens.particles)
}

fn gain_from(cross_cov: &DMatrix<f64>, forward_cov: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument("gain step must be ≥ 0".into()));
    }
    let d = forward_cov.nrows();
    if dt == 0.0 {
        return Ok(DMatrix::zeros(cross_cov.nrows(), d));
    }
    // (dt·S + I) ⪰ I, so the Cholesky factorisation exists unless the
    // moments already contain non-finite entries.
    let mut m = forward_cov * dt;
    for i in 0..d {
        m[(i, i)] += 1.0;
    }
    let chol = nalgebra::linalg::Cholesky::new(m).ok_or_else(|| {
        Error::InvalidArgument("gain solve failed: non-finite empirical moments".into())
    })?;
    let kt = chol.solve(&(cross_cov.transpose() * dt));
    Ok(kt.transpose())
}

/// K = dt·𝒞ᴶ(dt·Sᴶ + I)^{-1}, computed by a Cholesky solve.
pub fn kalman_gain(moments: &EmpiricalMoments, dt: f64) -> Result<DMatrix<f64>> {
    gain_from(&moments.cross_cov, &moments.forward_cov, dt)
}

/// One deterministic update. Only the leading obs.dim() coordinates move;
/// trailing coordinates carry no data and stay untouched bit-for-bit.
pub fn enkbf_step(basis: &SpectralBasis, ens: &mut Ensemble, obs: &ObservationSet) -> Result<()> {
    let d = obs.dim();
    let j = ens.size();
    if d > ens.dim() {
        return Err(Error::InvalidArgument(format!(
            "observation dimension {} exceeds ensemble dimension {}",
            d,
            ens.dim()
        )));
    }
    let truncated;
    let state: &DMatrix<f64> = if d == ens.dim() {
        &ens.particles
    } else {
        truncated = ens.particles.columns(0, d).into_owned();
        &truncated
    };
    let moments = moments_of(basis, state)?;
    let dt_eff = ens.dt * obs.n as f64;
    // The solve only fails when the state already went non-finite.
    let gain = gain_from(&moments.cross_cov, &moments.forward_cov, dt_eff).map_err(|_| {
        Error::Divergence {
            step: ens.time_index + 1,
        }
    })?;
    // Innovation rows: 𝒦v^{(j)} + m^J_𝒦 − 2Ỹ.
    let innovations = DMatrix::from_fn(j, d, |r, c| {
        state[(r, c)] * basis.kappa(c + 1) + moments.forward_mean[c] - 2.0 * obs.ytilde[c]
    });
    let delta = innovations * gain.transpose() * 0.5;
    let mut block = ens.particles.columns_mut(0, d);
    block -= delta;
    ens.time_index += 1;
    if !ens.particles.iter().all(|x| x.is_finite()) {
        return Err(Error::Divergence {
            step: ens.time_index,
        });
    }
    Ok(())
}

/// Iterate until the residual of the ensemble mean over the first
/// `stop_dim` coordinates drops to `kappa`, or `k_max` is reached.
///
/// The ensemble is left at the stopping iterate. `stop_dim` is normally the
/// effective dimension D(n): the residual restricted to the informative
/// block has expectation ≈ D(n)/n at the truth, so a threshold C·D(n)/n
/// with C ≤ 1 is reachable; the full-dimension residual would stall on its
/// noise floor whenever the χ² fluctuation exceeds the threshold margin.
pub fn run_until_discrepancy(
    basis: &SpectralBasis,
    ens: &mut Ensemble,
    obs: &ObservationSet,
    kappa: f64,
    k0: usize,
    k_max: usize,
    stop_dim: usize,
) -> Result<StopReport> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument("kappa must be finite and ≥ 0".into()));
    }
    if k_max <= k0 {
        return Err(Error::InvalidArgument("need k_max > k0".into()));
    }
    if stop_dim == 0 {
        return Err(Error::InvalidArgument("stop_dim must be ≥ 1".into()));
    }
    if ens.time_index != 0 {
        return Err(Error::InvalidArgument(
            "discrepancy run expects a fresh ensemble at k = 0".into(),
        ));
    }
    let mut residual_path = vec![residual_projected(basis, obs, &ens.mean(), stop_dim)];
    if k0 == 0 && residual_path[0] <= kappa {
        return Ok(StopReport {
            k_dp: 0,
            tau_dp: 0.0,
            residual_path,
            hit_cap: false,
        });
    }
    for k in 1..=k_max {
        enkbf_step(basis, ens, obs)?;
        let r = residual_projected(basis, obs, &ens.mean(), stop_dim);
        residual_path.push(r);
        if k >= k0 && r <= kappa {
            return Ok(StopReport {
                k_dp: k,
                tau_dp: k as f64 * ens.dt,
                residual_path,
                hit_cap: false,
            });
        }
    }
    Ok(StopReport {
        k_dp: k_max,
        tau_dp: k_max as f64 * ens.dt,
        residual_path,
        hit_cap: true,
    })
}

/// Per-coordinate central band at `level`: empirical quantiles at
/// (1±level)/2 with linear interpolation between order statistics.
pub fn ensemble_quantiles(ens: &Ensemble, level: f64) -> Result<Vec<(f64, f64)>> {
    if ens.size() < 2 {
        return Err(Error::InvalidArgument(
            "quantile bands need at least 2 particles".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument("level must lie in (0, 1)".into()));
    }
    let p_lo = (1.0 - level) / 2.0;
    let p_hi = (1.0 + level) / 2.0;
    let j = ens.size();
    let mut out = Vec::with_capacity(ens.dim());
    let mut col = vec![0.0; j];
    for c in 0..ens.dim() {
        for (r, slot) in col.iter_mut().enumerate() {
            *slot = ens.particles[(r, c)];
        }
        col.sort_unstable_by(f64::total_cmp);
        out.push((interp_quantile(&col, p_lo), interp_quantile(&col, p_hi)));
    }
    Ok(out)
}

fn interp_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
