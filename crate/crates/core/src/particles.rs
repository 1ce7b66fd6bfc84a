//! Weighted particle ensembles shared by the hydrodynamic and aggregation solvers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use rayon::prelude::*;

use crate::potentials::{convolve_grad_unchecked, ConfinementSpec, InteractionKernel, KernelForm, PointMasses};
use crate::schedule::Clocked;
use crate::transport::{Density1D, Measure1D};

pub const ENSEMBLE_MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble needs at least {min} particles, got {got}")]
    TooFewParticles { got: usize, min: usize },
    #[error("ensemble mass {0} is not 1 within {ENSEMBLE_MASS_TOLERANCE}")]
    MassNotNormalized(f64),
    #[error("ensemble arrays have inconsistent lengths")]
    LengthMismatch,
    #[error("non-finite or non-positive entry in ensemble")]
    InvalidEntry,
    #[error("quantile of the initial density failed at q = {0}")]
    QuantileFailure(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Empirical measure `sum_i m_i delta_{X_i}`, optionally carrying velocities.
///
/// With `cells` set the particles are the nodes of Lagrangian cells: the
/// measure puts `cells[k]` uniformly between nodes `k` and `k + 1`, and the
/// particle masses (used for forces) are the trapezoidal node weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub velocities: Option<Vec<f64>>,
    pub masses: Vec<f64>,
    pub cells: Option<Vec<f64>>,
    pub t: f64,
}

impl ParticleEnsemble {
    pub fn new(
        positions: Vec<f64>,
        velocities: Option<Vec<f64>>,
        masses: Vec<f64>,
        t: f64,
    ) -> Result<Self, EnsembleError> {
        let ens = Self { positions, velocities, masses, cells: None, t };
        ens.validate()?;
        Ok(ens)
    }

    /// Lagrangian cells with nodes `nodes` and cell masses `cell_masses`.
    pub fn from_cells(nodes: Vec<f64>, cell_masses: Vec<f64>, velocities: Option<Vec<f64>>) -> Result<Self, EnsembleError> {
        let n = nodes.len();
        if n < 2 {
            return Err(EnsembleError::TooFewParticles { got: n, min: 2 });
        }
        if cell_masses.len() + 1 != n {
            return Err(EnsembleError::LengthMismatch);
        }
        let masses = (0..n)
            .map(|k| 0.5 * (if k > 0 { cell_masses[k - 1] } else { 0.0 } + cell_masses.get(k).copied().unwrap_or(0.0)))
            .collect();
        let ens = Self { positions: nodes, velocities, masses, cells: Some(cell_masses), t: 0.0 };
        ens.validate()?;
        Ok(ens)
    }

    /// Splits each cell of a grid density into `refine` equal Lagrangian
    /// cells; empty cells at either end are dropped. Node velocities are `u0(x)`.
    pub fn from_grid_cells(x_min: f64, dx: f64, cell_masses: &[f64], refine: usize, u0: impl Fn(f64) -> f64) -> Result<Self, EnsembleError> {
        let first = cell_masses.iter().position(|&m| m > 0.0).ok_or(EnsembleError::InvalidEntry)?;
        let last = cell_masses.iter().rposition(|&m| m > 0.0).unwrap_or(first);
        let refine = refine.max(1);
        let h = dx / refine as f64;
        let start = x_min + first as f64 * dx;
        let count = (last + 1 - first) * refine;
        let nodes: Vec<f64> = (0..=count).map(|k| start + k as f64 * h).collect();
        let cells: Vec<f64> = cell_masses[first..=last].iter().flat_map(|&m| std::iter::repeat_n(m / refine as f64, refine)).collect();
        let velocities = nodes.iter().map(|&x| u0(x)).collect();
        Self::from_cells(nodes, cells, Some(velocities))
    }

    /// Equal-mass particles at the given positions.
    pub fn uniform(positions: Vec<f64>, velocities: Option<Vec<f64>>) -> Result<Self, EnsembleError> {
        let n = positions.len();
        if n == 0 {
            return Err(EnsembleError::TooFewParticles { got: 0, min: 1 });
        }
        Self::new(positions, velocities, vec![1.0 / n as f64; n], 0.0)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let n = self.positions.len();
        if n == 0 {
            return Err(EnsembleError::TooFewParticles { got: 0, min: 1 });
        }
        if self.masses.len() != n || self.velocities.as_ref().is_some_and(|v| v.len() != n) {
            return Err(EnsembleError::LengthMismatch);
        }
        if self.positions.iter().any(|x| !x.is_finite())
            || self.masses.iter().any(|m| !(*m > 0.0) || !m.is_finite())
            || self.velocities.as_ref().is_some_and(|v| v.iter().any(|u| !u.is_finite()))
        {
            return Err(EnsembleError::InvalidEntry);
        }
        let mass: f64 = self.masses.iter().sum();
        if (mass - 1.0).abs() > ENSEMBLE_MASS_TOLERANCE {
            return Err(EnsembleError::MassNotNormalized(mass));
        }
        if let Some(cells) = &self.cells {
            if cells.len() + 1 != n {
                return Err(EnsembleError::LengthMismatch);
            }
            if cells.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
                return Err(EnsembleError::InvalidEntry);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Velocities, or zeros for an aggregation ensemble.
    pub fn velocities_or_zero(&self) -> Vec<f64> {
        self.velocities.clone().unwrap_or_else(|| vec![0.0; self.len()])
    }

    pub fn center_of_mass(&self) -> f64 {
        self.positions.iter().zip(&self.masses).map(|(x, m)| x * m).sum()
    }

    pub fn mean_velocity(&self) -> f64 {
        match &self.velocities {
            Some(v) => v.iter().zip(&self.masses).map(|(u, m)| u * m).sum(),
            None => 0.0,
        }
    }

    pub fn measure(&self) -> Measure1D<'_> {
        match &self.cells {
            Some(cells) => Measure1D::Cells { nodes: &self.positions, masses: cells },
            None => Measure1D::Atoms { positions: &self.positions, masses: &self.masses },
        }
    }

    /// Smallest gap between neighbours in sorted order.
    pub fn min_gap(&self) -> f64 {
        let mut xs = self.positions.clone();
        xs.sort_by(f64::total_cmp);
        xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Permutation sorting the particles by position.
    pub fn sorted_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.positions[a].total_cmp(&self.positions[b]));
        idx
    }

    /// Writes `mass,position,velocity` rows plus a JSON sidecar with `extra` metadata.
    pub fn dump<M: Serialize>(&self, csv_path: &Path, extra: &M) -> Result<(), EnsembleError> {
        let mut body = String::from("mass,position,velocity\n");
        let vel = self.velocities_or_zero();
        for k in 0..self.len() {
            body.push_str(&format!("{:e},{:e},{:e}\n", self.masses[k], self.positions[k], vel[k]));
        }
        fs::write(csv_path, body)?;
        #[derive(Serialize)]
        struct Sidecar<'a, M> {
            t: f64,
            n: usize,
            has_velocities: bool,
            lagrangian_cells: bool,
            params: &'a M,
        }
        let sidecar = Sidecar {
            t: self.t,
            n: self.len(),
            has_velocities: self.velocities.is_some(),
            lagrangian_cells: self.cells.is_some(),
            params: extra,
        };
        let mut f = fs::File::create(csv_path.with_extension("json"))?;
        f.write_all(serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
        Ok(())
    }
}

impl PointMasses for ParticleEnsemble {
    fn atom_count(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    fn atom(&self, k: usize) -> (f64, f64) {
        (self.positions[k], self.masses[k])
    }
}

impl Clocked for ParticleEnsemble {
    fn time(&self) -> f64 {
        self.t
    }
    fn set_time(&mut self, t: f64) {
        self.t = t;
    }
}

struct Atoms<'a> {
    positions: &'a [f64],
    masses: &'a [f64],
}

impl PointMasses for Atoms<'_> {
    fn atom_count(&self) -> usize {
        self.positions.len()
    }
    fn atom(&self, k: usize) -> (f64, f64) {
        (self.positions[k], self.masses[k])
    }
}

/// `V'(y_q) + sum_j m_j W'(y_q - x_j)` at each query point `y_q`.
///
/// Quadratic kernels use the exact `O(n)` closed form; other kernels sum
/// directly, in parallel over query points with a fixed per-point order.
pub fn potential_gradient(
    positions: &[f64],
    masses: &[f64],
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    query: &[f64],
) -> Vec<f64> {
    let atoms = Atoms { positions, masses };
    let conv = match kernel.form() {
        KernelForm::Quadratic { .. } => convolve_grad_unchecked(kernel, &atoms, query),
        _ if kernel.is_zero() => vec![0.0; query.len()],
        _ => query
            .par_iter()
            .map(|&y| positions.iter().zip(masses).map(|(x, m)| m * kernel.grad(y - x)).sum())
            .collect(),
    };
    query.iter().zip(conv).map(|(y, w)| spec.grad(*y) + w).collect()
}

/// Deterministic midpoint-quantile discretization: `X_i = F^{-1}((i - 1/2) / n)`,
/// equal masses, velocities `u0(X_i)`.
pub fn sample_from_density<D, U>(rho0: &D, u0: U, n: usize) -> Result<ParticleEnsemble, EnsembleError>
where
    D: Density1D + ?Sized,
    U: Fn(f64) -> f64,
{
    if n < 2 {
        return Err(EnsembleError::TooFewParticles { got: n, min: 2 });
    }
    let mut positions = Vec::with_capacity(n);
    let mut prev = f64::NEG_INFINITY;
    for i in 0..n {
        let q = (i as f64 + 0.5) / n as f64;
        let x = rho0.quantile(q);
        if !x.is_finite() || x < prev {
            return Err(EnsembleError::QuantileFailure(q));
        }
        prev = x;
        positions.push(x);
    }
    let velocities = positions.iter().map(|&x| u0(x)).collect();
    ParticleEnsemble::new(positions, Some(velocities), vec![1.0 / n as f64; n], 0.0)
}
