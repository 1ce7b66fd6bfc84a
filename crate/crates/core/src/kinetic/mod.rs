//! Finite-volume solver for the kinetic swarming equation on a 1D x 1D
//! phase grid.
//!
//! Free transport in `x` uses conservative limited upwind fluxes. The
//! velocity part (friction, confinement and interaction forces, and local
//! alignment with the regularized velocity `u_delta`) is affine in `v` on
//! each column and is integrated exactly in time, then remapped
//! conservatively onto the grid.

mod grid;
mod run;
mod state;
mod step;

use thiserror::Error;

pub use grid::{PhaseGrid, ScalingParams};
pub use run::{run_kinetic, KineticRunOptions, KineticRunSummary};
pub use state::{cutoff, init_kinetic, moments, KineticState, MomentSet, INIT_LEAKAGE_TOLERANCE};
pub use step::{step_kinetic, StepReport, BOUNDARY_MASS_TOLERANCE, BOUNDARY_WIDTH, CFL_LIMIT, RENORMALIZATION_TOLERANCE};

#[derive(Debug, Error)]
pub enum KineticError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("state has {got} cells, grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("thermal width {theta} is below two velocity cells (dv = {dv})")]
    UnresolvedThermalWidth { theta: f64, dv: f64 },
    #[error("initial data loses mass {0:e} outside the grid")]
    MassLeakage(f64),
    #[error("Courant number {courant} exceeds {limit}")]
    CflViolation { courant: f64, limit: f64 },
    #[error("boundary mass {mass:e} exceeds tolerance at t = {t}")]
    BoundaryMassLeak { mass: f64, t: f64 },
    #[error("renormalization factor {0} drifted from 1")]
    RenormalizationDrift(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
