use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::potentials::PointMasses;

use super::TransportError;

/// Unit-mass tolerance for grid densities.
pub const DENSITY_MASS_TOLERANCE: f64 = 1e-10;

/// A cell-averaged density on an equispaced grid `x_min + (i + 1/2) dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    x_min: f64,
    dx: f64,
    rho: Vec<f64>,
}

impl DensityProfile {
    /// Wraps cell values; fails unless `rho >= 0` and `sum rho dx = 1`.
    pub fn new(x_min: f64, dx: f64, rho: Vec<f64>) -> Result<Self, TransportError> {
        let p = Self::new_unchecked(x_min, dx, rho);
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn new_unchecked(x_min: f64, dx: f64, rho: Vec<f64>) -> Self {
        Self { x_min, dx, rho }
    }

    /// Rescales nonnegative cell values to unit mass.
    pub fn normalized(x_min: f64, dx: f64, mut rho: Vec<f64>) -> Result<Self, TransportError> {
        let mass: f64 = rho.iter().sum::<f64>() * dx;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(TransportError::InvalidDensity(format!("total mass {mass}")));
        }
        rho.iter_mut().for_each(|r| *r /= mass);
        Self::new(x_min, dx, rho)
    }

    fn validate(&self) -> Result<(), TransportError> {
        if !(self.dx > 0.0) || self.rho.is_empty() {
            return Err(TransportError::InvalidDensity("empty grid or non-positive dx".into()));
        }
        if self.rho.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(TransportError::InvalidDensity("negative or non-finite cell value".into()));
        }
        let mass = self.mass();
        if (mass - 1.0).abs() > DENSITY_MASS_TOLERANCE {
            return Err(TransportError::InvalidDensity(format!("mass {mass} differs from 1")));
        }
        Ok(())
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.dx * self.rho.len() as f64
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.rho.len()).map(|i| self.center(i)).collect()
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.dx
    }

    pub fn mean(&self) -> f64 {
        self.rho.iter().enumerate().map(|(i, r)| r * self.center(i)).sum::<f64>() * self.dx
    }

    /// Cumulative masses at the `len + 1` cell edges.
    pub(crate) fn edge_cdf(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.rho.len() + 1);
        let mut acc = 0.0;
        c.push(0.0);
        for r in &self.rho {
            acc += r * self.dx;
            c.push(acc);
        }
        c
    }
}

impl PointMasses for DensityProfile {
    fn atom_count(&self) -> usize {
        self.rho.len()
    }

    #[inline]
    fn atom(&self, k: usize) -> (f64, f64) {
        (self.center(k), self.rho[k] * self.dx)
    }
}

/// A one-dimensional probability distribution with a quantile function.
pub trait Density1D {
    fn cdf(&self, x: f64) -> f64;
    /// Generalized inverse `inf { x : F(x) >= q }`.
    fn quantile(&self, q: f64) -> f64;
}

impl Density1D for DensityProfile {
    fn cdf(&self, x: f64) -> f64 {
        let s = (x - self.x_min) / self.dx;
        if s <= 0.0 {
            return 0.0;
        }
        let n = self.rho.len();
        if s >= n as f64 {
            return self.mass();
        }
        let i = s.floor() as usize;
        let below: f64 = self.rho[..i].iter().sum::<f64>() * self.dx;
        below + self.rho[i] * (s - i as f64) * self.dx
    }

    fn quantile(&self, q: f64) -> f64 {
        let c = self.edge_cdf();
        grid_quantile(self, &c, q)
    }
}

/// Quantile of a grid density with precomputed edge CDF `c`.
pub(crate) fn grid_quantile(p: &DensityProfile, c: &[f64], q: f64) -> f64 {
    // first edge k >= 1 with c[k] >= q
    let k = c[1..].partition_point(|&ck| ck < q) + 1;
    if k > p.rho.len() {
        return p.x_max();
    }
    let cell = k - 1;
    let r = p.rho[cell];
    let lo = p.x_min + cell as f64 * p.dx;
    if r > 0.0 {
        (lo + (q - c[cell]) / r).min(lo + p.dx)
    } else {
        lo
    }
}

/// Closed-form initial densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// Normal density restricted to `[lo, hi]` and renormalized.
    Gaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Profile {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        Profile::Gaussian { mean, sd, lo: mean - 12.0 * sd, hi: mean + 12.0 * sd }
    }

    pub fn truncated_gaussian(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        Profile::Gaussian { mean, sd, lo, hi }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Profile::Uniform { lo, hi }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Profile::Gaussian { lo, hi, .. } | Profile::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Profile::Gaussian { mean, sd, lo, hi } => {
                if x < lo || x > hi {
                    return 0.0;
                }
                let n = normal(mean, sd);
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()) / (n.cdf(hi) - n.cdf(lo))
            }
            Profile::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    /// Cell averages on `nx` cells covering `[x_min, x_max]`, renormalized to unit mass.
    pub fn to_grid(&self, x_min: f64, x_max: f64, nx: usize) -> Result<DensityProfile, TransportError> {
        let dx = (x_max - x_min) / nx as f64;
        let rho: Vec<f64> = (0..nx)
            .map(|i| {
                let a = x_min + i as f64 * dx;
                (self.cdf(a + dx) - self.cdf(a)).max(0.0) / dx
            })
            .collect();
        DensityProfile::normalized(x_min, dx, rho)
    }
}

fn normal(mean: f64, sd: f64) -> Normal {
    Normal::new(mean, sd).expect("gaussian profile needs sd > 0")
}

impl Density1D for Profile {
    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Profile::Gaussian { mean, sd, lo, hi } => {
                if x <= lo {
                    return 0.0;
                }
                if x >= hi {
                    return 1.0;
                }
                let n = normal(mean, sd);
                let (a, b) = (n.cdf(lo), n.cdf(hi));
                ((n.cdf(x) - a) / (b - a)).clamp(0.0, 1.0)
            }
            Profile::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    fn quantile(&self, q: f64) -> f64 {
        match *self {
            Profile::Gaussian { mean, sd, lo, hi } => {
                let n = normal(mean, sd);
                let (a, b) = (n.cdf(lo), n.cdf(hi));
                n.inverse_cdf(a + q * (b - a)).clamp(lo, hi)
            }
            Profile::Uniform { lo, hi } => lo + q * (hi - lo),
        }
    }
}

/// A unit-mass measure on the line: a grid density, a set of atoms, or
/// Lagrangian cells.
#[derive(Debug, Clone, Copy)]
pub enum Measure1D<'a> {
    Density(&'a DensityProfile),
    Atoms { positions: &'a [f64], masses: &'a [f64] },
    /// `masses[k]` spread uniformly between `nodes[k]` and `nodes[k + 1]`
    /// (in either order); a cell of zero length is an atom.
    Cells { nodes: &'a [f64], masses: &'a [f64] },
}

impl<'a> From<&'a DensityProfile> for Measure1D<'a> {
    fn from(p: &'a DensityProfile) -> Self {
        Measure1D::Density(p)
    }
}

impl Measure1D<'_> {
    pub fn mass(&self) -> f64 {
        match self {
            Measure1D::Density(p) => p.mass(),
            Measure1D::Atoms { masses, .. } | Measure1D::Cells { masses, .. } => masses.iter().sum(),
        }
    }
}
