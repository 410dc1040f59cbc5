//! Dirichlet-Laplacian eigenbasis on (0, 2π) and coefficient↔function
//! transforms.
//!
//! Mode i (1-based) has eigenvalue λᵢ = (i/2)² and eigenfunction
//! φᵢ(x) = π^{-1/2}·sin(i·x/2), normalised in L²(0, 2π). The forward
//! operator of the linearised problem acts diagonally with singular values
//! κᵢ = 1/λᵢ, i.e. polynomial decay i^{-2} (p = 2 in one dimension).

use crate::{Error, Result, SeqVector};
use nalgebra::DMatrix;

/// Eigenpairs of −d²/dx² on (0, 2π) with homogeneous Dirichlet conditions.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// Number of retained modes D.
    pub dim: usize,
    /// λ₁..λ_D, strictly increasing.
    pub eigenvalues: Vec<f64>,
    /// κ₁..κ_D with κᵢ = 1/λᵢ (correctly rounded); strictly decreasing.
    pub forward_singular_values: Vec<f64>,
}

impl SpectralBasis {
    /// Eigenvalue of mode `i` (1-based).
    pub fn lambda(&self, i: usize) -> f64 {
        self.eigenvalues[i - 1]
    }

    /// Forward singular value of mode `i` (1-based).
    pub fn kappa(&self, i: usize) -> f64 {
        self.forward_singular_values[i - 1]
    }
}

/// Analytic eigenpairs, sorted ascending in λ.
pub fn eigenpairs(dim: usize) -> Result<SpectralBasis> {
    if dim == 0 {
        return Err(Error::InvalidArgument("basis dimension must be ≥ 1".into()));
    }
    let eigenvalues: Vec<f64> = (1..=dim).map(|i| (i as f64 / 2.0).powi(2)).collect();
    let forward_singular_values: Vec<f64> = eigenvalues.iter().map(|l| 1.0 / l).collect();
    Ok(SpectralBasis {
        dim,
        eigenvalues,
        forward_singular_values,
    })
}

/// Eigenfunction φᵢ(x) = π^{-1/2}·sin(i·x/2), mode `i` 1-based.
pub fn phi(i: usize, x: f64) -> f64 {
    (i as f64 * x / 2.0).sin() / std::f64::consts::PI.sqrt()
}

/// Uniform grid on (0, 2π), endpoints excluded: xⱼ = j·h, h = 2π/(m+1).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    pub h: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Interior grid with `m` points.
pub fn uniform_grid(m: usize) -> Result<Grid> {
    if m < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    let h = 2.0 * std::f64::consts::PI / (m as f64 + 1.0);
    Ok(Grid {
        points: (1..=m).map(|j| j as f64 * h).collect(),
        h,
    })
}

/// Function values on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    /// One row per node, for plotting and cross-language comparison.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x,value")?;
        for (x, v) in self.grid.points.iter().zip(&self.values) {
            writeln!(out, "{},{}", x, v)?;
        }
        Ok(())
    }

    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} points but {} values supplied",
                grid.len(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite function values".into()));
        }
        Ok(GridFunction { grid, values })
    }
}

/// Matrix Φ with Φ[j, i] = φ_{i+1}(xⱼ); one gemm synthesizes many vectors.
pub fn synthesis_matrix(grid: &Grid, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), dim, |j, i| phi(i + 1, grid.points[j]))
}

/// Pointwise evaluation of Σᵢ vᵢ·φᵢ(xⱼ).
pub fn synthesize(basis: &SpectralBasis, v: &[f64], grid: &Grid) -> Result<GridFunction> {
    if v.len() > basis.dim {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients exceed basis dimension {}",
            v.len(),
            basis.dim
        )));
    }
    let values: Vec<f64> = grid
        .points
        .iter()
        .map(|&x| v.iter().enumerate().map(|(i, c)| c * phi(i + 1, x)).sum())
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// Coefficients cᵢ ≈ ∫ u·φᵢ dx by composite trapezoid, i ≤ `dim`.
///
/// The grid excludes the endpoints, where Dirichlet data makes both u−g̃ and
/// φᵢ vanish, so the trapezoid rule reduces to h·Σⱼ uⱼ·φᵢ(xⱼ). On this grid
/// the discrete sine family is orthonormal exactly, but modes above m/4 are
/// rejected to keep clear of aliasing for non-band-limited inputs.
pub fn analyze(basis: &SpectralBasis, u: &GridFunction, dim: usize) -> Result<SeqVector> {
    let m = u.grid.len();
    if dim > m / 4 {
        return Err(Error::IllConditionedProjection {
            dim,
            grid_points: m,
        });
    }
    if dim > basis.dim {
        return Err(Error::InvalidArgument(format!(
            "projection dimension {dim} exceeds basis dimension {}",
            basis.dim
        )));
    }
    let h = u.grid.h;
    Ok((1..=dim)
        .map(|i| {
            h * u
                .grid
                .points
                .iter()
                .zip(&u.values)
                .map(|(&x, &uj)| uj * phi(i, x))
                .sum::<f64>()
        })
        .collect())
}
