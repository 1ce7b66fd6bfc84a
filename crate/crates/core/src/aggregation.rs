//! Aggregation equation `rho_t + (rho u)_x = 0` with
//! `u = -kappa (V' + W' * rho)`, solved by pushing particles along its flow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydro::ParticleRunOptions;
use crate::particles::{potential_gradient, ParticleEnsemble};
use crate::potentials::{ConfinementSpec, InteractionKernel};
use crate::schedule::drive;

/// Largest `dt kappa (c_V + sup |W''|)` accepted by [`step_aggregation`].
pub const AGGREGATION_STEP_LIMIT: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("dt kappa (c_V + sup|W''|) = {value} exceeds {limit}")]
    StepTooLarge { value: f64, limit: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// `u(y) = -kappa (c_V y + sum_j m_j W'(y - X_j))` at each query point.
pub fn aggregation_velocity(
    ens: &ParticleEnsemble,
    kappa: f64,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    query_points: &[f64],
) -> Vec<f64> {
    potential_gradient(&ens.positions, &ens.masses, spec, kernel, query_points)
        .into_iter()
        .map(|g| -kappa * g)
        .collect()
}

fn field(x: &[f64], masses: &[f64], kappa: f64, spec: &ConfinementSpec, kernel: &InteractionKernel) -> Vec<f64> {
    potential_gradient(x, masses, spec, kernel, x).into_iter().map(|g| -kappa * g).collect()
}

/// Stiffness of the flow, `kappa (c_V + sup |W''|)`.
pub fn flow_rate_bound(kappa: f64, spec: &ConfinementSpec, kernel: &InteractionKernel) -> f64 {
    kappa * (spec.c_v.abs() + kernel.lipschitz_grad_bound())
}

/// One classical Runge-Kutta step of `X_i' = u(X_i)`.
pub fn step_aggregation(
    ens: &mut ParticleEnsemble,
    kappa: f64,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    dt: f64,
) -> Result<(), AggregationError> {
    if !(dt > 0.0) || !(kappa >= 0.0) {
        return Err(AggregationError::InvalidParams(format!("dt {dt}, kappa {kappa}")));
    }
    let value = dt * flow_rate_bound(kappa, spec, kernel);
    if value > AGGREGATION_STEP_LIMIT {
        return Err(AggregationError::StepTooLarge { value, limit: AGGREGATION_STEP_LIMIT });
    }
    let m = &ens.masses;
    let x0 = &ens.positions;
    let stage = |k: &[f64], h: f64| -> Vec<f64> { x0.iter().zip(k).map(|(x, k)| x + h * k).collect() };
    let k1 = field(x0, m, kappa, spec, kernel);
    let k2 = field(&stage(&k1, 0.5 * dt), m, kappa, spec, kernel);
    let k3 = field(&stage(&k2, 0.5 * dt), m, kappa, spec, kernel);
    let k4 = field(&stage(&k3, dt), m, kappa, spec, kernel);
    ens.positions = (0..x0.len()).map(|i| x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    ens.t += dt;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregationRunSummary {
    pub steps: usize,
}

/// Steps `ens` to `t_end`, calling `observer` at each sample time.
/// The integrator field of `options` is ignored.
pub fn run_aggregation<E, O>(
    ens: &mut ParticleEnsemble,
    kappa: f64,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    t_end: f64,
    options: &ParticleRunOptions,
    mut observer: O,
) -> Result<AggregationRunSummary, E>
where
    E: From<AggregationError>,
    O: FnMut(&ParticleEnsemble) -> Result<(), E>,
{
    if !(options.dt_max > 0.0) || t_end < ens.t {
        return Err(AggregationError::InvalidParams(format!("dt_max {} or t_end {t_end} invalid", options.dt_max)).into());
    }
    let rate = flow_rate_bound(kappa, spec, kernel);
    let dt_limit = if rate > 0.0 { options.dt_max.min(AGGREGATION_STEP_LIMIT / rate * (1.0 - 1e-9)) } else { options.dt_max };
    let mut summary = AggregationRunSummary::default();
    drive(
        ens,
        t_end,
        &options.sample_times,
        |_| dt_limit,
        |e, dt| {
            step_aggregation(e, kappa, spec, kernel, dt)?;
            summary.steps += 1;
            Ok::<(), E>(())
        },
        |e| observer(e),
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_cases() {
        let dirac = ParticleEnsemble::new(vec![0.0], None, vec![1.0], 0.0).unwrap();
        let u = aggregation_velocity(&dirac, 0.7, &ConfinementSpec::new(2.0), &InteractionKernel::gaussian(1.0, 0.3), &[0.0]);
        assert_eq!(u, vec![0.0]);
        let e = ParticleEnsemble::uniform(vec![-1.0, 0.5, 2.0], None).unwrap();
        let u = aggregation_velocity(&e, 1.0, &ConfinementSpec::new(1.0), &InteractionKernel::zero(), &[0.3, -2.0]);
        assert_eq!(u, vec![-0.3, 2.0]);
        let mu = e.center_of_mass();
        let kappa = 0.4;
        let q = [-1.5, 0.2, 3.0];
        let u = aggregation_velocity(&e, kappa, &ConfinementSpec::new(1.0), &InteractionKernel::quadratic(1.0), &q);
        for (x, v) in q.iter().zip(u) {
            let direct: f64 = e.positions.iter().zip(&e.masses).map(|(y, m)| m * (x - y)).sum();
            assert!((v + kappa * (x + (x - mu))).abs() < 1e-14);
            assert!((v + kappa * (x + direct)).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_contraction() {
        let mut e = ParticleEnsemble::uniform(vec![-1.0, 0.5, 2.0], None).unwrap();
        let (kappa, dt) = (0.8, 0.05);
        for _ in 0..20 {
            step_aggregation(&mut e, kappa, &ConfinementSpec::new(1.0), &InteractionKernel::zero(), dt).unwrap();
        }
        let decay = (-kappa * 1.0f64).exp();
        for (x, x0) in e.positions.iter().zip([-1.0, 0.5, 2.0]) {
            assert!((x - x0 * decay).abs() < 1e-7);
        }
    }

    #[test]
    fn step_guard() {
        let mut e = ParticleEnsemble::uniform(vec![0.0, 1.0], None).unwrap();
        let r = step_aggregation(&mut e, 1.0, &ConfinementSpec::new(1.0), &InteractionKernel::quadratic(1.0), 0.3);
        assert!(matches!(r, Err(AggregationError::StepTooLarge { .. })));
    }
}
