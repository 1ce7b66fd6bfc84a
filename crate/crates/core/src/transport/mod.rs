//! Wasserstein distances between one-dimensional measures, plus an exact
//! discrete solver in any dimension used as a reference.

mod exact;
mod measure;
mod wasserstein;

use thiserror::Error;

pub use exact::{optimal_plan, w2_discrete_exact, DiscreteMeasure, MAX_SUPPORT};
pub use measure::{Density1D, DensityProfile, Measure1D, Profile, DENSITY_MASS_TOLERANCE};
pub use wasserstein::{quantile, w2_squared_1d, wasserstein_1d, QuantileFunction, MIN_QUADRATURE_NODES};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("support of size {size} exceeds the exact-solver limit {max}")]
    SupportTooLarge { size: usize, max: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}
