//! Experiment orchestration: configuration, the epsilon and gamma sweeps, the
//! energy audit, rate fitting and CSV/JSON output.

mod audit;
mod config;
mod output;
mod rate;
mod sweep;

use thiserror::Error;

pub use audit::{audit_leg, emit_audit, run_energy_audit, AuditLeg, AuditReport};
pub use config::{
    apply_override, AuditConfig, ExperimentConfig, GridConfig, KernelSpec, ParticleConfig, PotentialsConfig, RegularizationConfig,
    ThetaPolicy,
};
pub use output::{emit, parse_rows, rows_to_csv, write_atomic, RowRecord, RunManifest, SweepRow, ROWS_HEADER, SCHEMA_VERSION};
pub use rate::{fit_log_log, fit_rate, RateFit};
pub use sweep::{
    epsilon_row, gamma_row, kinetic_leg, kinetic_setup, overdamped_cw, run_epsilon_sweep, run_gamma_sweep, trapezoid, Benchmark,
    EpsilonOutcome, EpsilonSample, GammaOutcome, GammaSample, HydroLeg, KineticSetup, KineticTrace,
};

use crate::aggregation::AggregationError;
use crate::functionals::FunctionalError;
use crate::hydro::HydroError;
use crate::kinetic::KineticError;
use crate::particles::EnsembleError;
use crate::potentials::PotentialError;
use crate::transport::TransportError;

/// Process exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for invalid configuration or I/O failures.
pub const EXIT_USAGE: i32 = 1;
/// Exit status when the interaction hypothesis or a bound precondition fails.
pub const EXIT_HYPOTHESIS: i32 = 2;
/// Exit status when a solver fails.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("rate fit: {0}")]
    NonPositiveData(String),
    #[error("sweep rows failed: {0}")]
    RowsFailed(String),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::HypothesisViolated(_) | HarnessError::Functional(FunctionalError::DenominatorNotPositive(_)) => EXIT_HYPOTHESIS,
            HarnessError::Kinetic(_)
            | HarnessError::Hydro(_)
            | HarnessError::Aggregation(_)
            | HarnessError::Ensemble(_)
            | HarnessError::Functional(_)
            | HarnessError::Transport(_)
            | HarnessError::RowsFailed(_) => EXIT_SOLVER,
            HarnessError::Config(_)
            | HarnessError::NonPositiveData(_)
            | HarnessError::Potential(_)
            | HarnessError::Io(_)
            | HarnessError::Csv(_)
            | HarnessError::Json(_) => EXIT_USAGE,
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (`0` keeps the global pool).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
