use serde::{Deserialize, Serialize};

use super::state::{moments, KineticState, MomentSet};
use super::step::{step_kinetic, CFL_LIMIT};
use super::{KineticError, ScalingParams};
use crate::functionals::{free_energy, EnergyReport};
use crate::potentials::{ConfinementSpec, InteractionKernel};
use crate::schedule::drive;

/// Time-step policy and observation schedule of a kinetic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticRunOptions {
    pub dt_max: f64,
    /// Courant number used to choose `dt`; at most [`CFL_LIMIT`].
    pub cfl: f64,
    pub sample_times: Vec<f64>,
}

impl Default for KineticRunOptions {
    fn default() -> Self {
        Self { dt_max: 1e-3, cfl: 0.8, sample_times: Vec::new() }
    }
}

/// Aggregated step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KineticRunSummary {
    pub steps: usize,
    pub max_boundary_mass: f64,
    pub total_velocity_overflow: f64,
    pub total_clamped_mass: f64,
    pub max_renormalization_deviation: f64,
}

/// Steps `state` to `t_end`, calling `observer` at each sample time with the
/// state, its moments and its energy report.
pub fn run_kinetic<E, O>(
    state: &mut KineticState,
    params: &ScalingParams,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    t_end: f64,
    options: &KineticRunOptions,
    mut observer: O,
) -> Result<KineticRunSummary, E>
where
    E: From<KineticError>,
    O: FnMut(&KineticState, &MomentSet, &EnergyReport) -> Result<(), E>,
{
    if !(options.dt_max > 0.0) || !(options.cfl > 0.0 && options.cfl <= CFL_LIMIT) {
        return Err(KineticError::InvalidParams(format!("dt_max {} and cfl {} out of range", options.dt_max, options.cfl)).into());
    }
    if t_end < state.t {
        return Err(KineticError::InvalidParams(format!("t_end {t_end} precedes state time {}", state.t)).into());
    }
    let mut summary = KineticRunSummary::default();
    let dt_cfl = state.grid.cfl_dt(options.cfl);
    drive(
        state,
        t_end,
        &options.sample_times,
        |_| options.dt_max.min(dt_cfl),
        |s, dt| {
            let rep = step_kinetic(s, params, spec, kernel, dt)?;
            summary.steps += 1;
            summary.max_boundary_mass = summary.max_boundary_mass.max(rep.boundary_mass);
            summary.total_velocity_overflow += rep.velocity_overflow;
            summary.total_clamped_mass += rep.clamped_mass;
            summary.max_renormalization_deviation = summary.max_renormalization_deviation.max((rep.renormalization - 1.0).abs());
            Ok::<(), E>(())
        },
        |s| {
            let mo = moments(s, params);
            let energy = free_energy(s, params.lambda, spec, kernel);
            observer(s, &mo, &energy)
        },
    )?;
    if summary.total_velocity_overflow > 0.0 {
        log::warn!("velocity images left the grid: {:e} mass kept in edge cells", summary.total_velocity_overflow);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::{init_kinetic, PhaseGrid};
    use crate::transport::Profile;

    #[test]
    fn zero_length_run_is_identity() {
        let grid = PhaseGrid::new(-4.0, 4.0, -2.0, 2.0, 32, 32).unwrap();
        let mut s = init_kinetic(&Profile::gaussian(0.0, 0.5), |_| 0.0, 0.3, &grid).unwrap();
        let before = s.clone();
        let params = ScalingParams::from_epsilon(0.1, 0.05, 1e-8, 10.0).unwrap();
        let opts = KineticRunOptions { sample_times: vec![0.0], ..Default::default() };
        let mut calls = 0;
        run_kinetic::<KineticError, _>(&mut s, &params, &ConfinementSpec::new(1.0), &InteractionKernel::quadratic(1.0), 0.0, &opts, |_, _, _| {
            calls += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(s, before);
        assert_eq!(calls, 1);
    }
}
