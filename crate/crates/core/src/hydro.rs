//! Pressureless Euler with damping and nonlocal forces, solved along
//! particle characteristics
//! `X' = U`, `U' = -gamma (U + kappa (V'(X) + W' * rho (X)))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::particles::{potential_gradient, EnsembleError, ParticleEnsemble};
use crate::potentials::{ConfinementSpec, InteractionKernel, KernelForm};
use crate::schedule::drive;

/// Gap below which two particles are considered to have collided.
pub const COLLISION_GAP: f64 = 1e-10;
/// Largest `dt * gamma` accepted by the Runge-Kutta integrator.
pub const RK4_STIFFNESS_LIMIT: f64 = 0.5;
/// Largest `dt * gamma` accepted by the exponential integrator.
pub const EXP_EULER_STIFFNESS_LIMIT: f64 = 20.0;

#[derive(Debug, Error)]
pub enum HydroError {
    #[error("dt * gamma = {value} exceeds the stiffness limit {limit}")]
    StiffnessGuard { value: f64, limit: f64 },
    #[error("hydrodynamic ensemble needs velocities")]
    MissingVelocities,
    #[error("need at least {min} particles, got {got}")]
    TooFewParticles { got: usize, min: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HydroIntegrator {
    /// Classical fourth-order Runge-Kutta.
    #[default]
    Rk4,
    /// Exact damping with forces frozen over the step.
    ExpEuler,
}

impl HydroIntegrator {
    pub fn stiffness_limit(self) -> f64 {
        match self {
            HydroIntegrator::Rk4 => RK4_STIFFNESS_LIMIT,
            HydroIntegrator::ExpEuler => EXP_EULER_STIFFNESS_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroStepReport {
    pub min_gap: f64,
    /// Two particles came closer than [`COLLISION_GAP`]; a delta shock is forming.
    pub collision: bool,
}

fn acceleration(x: &[f64], u: &[f64], masses: &[f64], gamma: f64, kappa: f64, spec: &ConfinementSpec, kernel: &InteractionKernel) -> Vec<f64> {
    let grad = potential_gradient(x, masses, spec, kernel, x);
    u.iter().zip(grad).map(|(ui, g)| -gamma * (ui + kappa * g)).collect()
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(y, k)| y + a * k).collect()
}

/// `(1 - e^{-c t}) / c`, equal to `t` at `c = 0`.
fn phi1(c: f64, t: f64) -> f64 {
    if c * t == 0.0 {
        t
    } else {
        -(-c * t).exp_m1() / c
    }
}

pub fn step_hydro(
    ens: &mut ParticleEnsemble,
    gamma: f64,
    kappa: f64,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    dt: f64,
    integrator: HydroIntegrator,
) -> Result<HydroStepReport, HydroError> {
    if !(dt > 0.0) || !(gamma >= 0.0) || !(kappa >= 0.0) {
        return Err(HydroError::InvalidParams(format!("dt {dt}, gamma {gamma}, kappa {kappa}")));
    }
    let limit = integrator.stiffness_limit();
    if dt * gamma > limit {
        return Err(HydroError::StiffnessGuard { value: dt * gamma, limit });
    }
    let masses = &ens.masses;
    let x0 = &ens.positions;
    let u0 = ens.velocities.as_ref().ok_or(HydroError::MissingVelocities)?;
    let (x1, u1) = match integrator {
        HydroIntegrator::Rk4 => {
            let acc = |x: &[f64], u: &[f64]| acceleration(x, u, masses, gamma, kappa, spec, kernel);
            let (kx1, ku1) = (u0.clone(), acc(x0, u0));
            let (x2, u2) = (axpy(x0, 0.5 * dt, &kx1), axpy(u0, 0.5 * dt, &ku1));
            let (kx2, ku2) = (u2.clone(), acc(&x2, &u2));
            let (x3, u3) = (axpy(x0, 0.5 * dt, &kx2), axpy(u0, 0.5 * dt, &ku2));
            let (kx3, ku3) = (u3.clone(), acc(&x3, &u3));
            let (x4, u4) = (axpy(x0, dt, &kx3), axpy(u0, dt, &ku3));
            let (kx4, ku4) = (u4.clone(), acc(&x4, &u4));
            let combine = |y: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
                (0..y.len()).map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
            };
            (combine(x0, &kx1, &kx2, &kx3, &kx4), combine(u0, &ku1, &ku2, &ku3, &ku4))
        }
        HydroIntegrator::ExpEuler => {
            let grad = potential_gradient(x0, masses, spec, kernel, x0);
            let decay = (-gamma * dt).exp();
            let p = phi1(gamma, dt);
            let mut x1 = Vec::with_capacity(x0.len());
            let mut u1 = Vec::with_capacity(x0.len());
            for i in 0..x0.len() {
                // U relaxes to the frozen target velocity -kappa grad
                let target = -kappa * grad[i];
                u1.push(target + (u0[i] - target) * decay);
                x1.push(x0[i] + target * dt + (u0[i] - target) * p);
            }
            (x1, u1)
        }
    };
    ens.positions = x1;
    ens.velocities = Some(u1);
    ens.t += dt;
    let min_gap = ens.min_gap();
    Ok(HydroStepReport { min_gap, collision: min_gap < COLLISION_GAP })
}

/// Largest slope `|U_(i+1) - U_(i)| / |X_(i+1) - X_(i)|` between neighbours in
/// sorted order, skipping pairs closer than [`COLLISION_GAP`].
pub fn lipschitz_estimate(ens: &ParticleEnsemble) -> Result<f64, HydroError> {
    if ens.len() < 3 {
        return Err(HydroError::TooFewParticles { got: ens.len(), min: 3 });
    }
    let u = ens.velocities.as_ref().ok_or(HydroError::MissingVelocities)?;
    let order = ens.sorted_order();
    Ok(order
        .windows(2)
        .filter_map(|w| {
            let gap = ens.positions[w[1]] - ens.positions[w[0]];
            (gap >= COLLISION_GAP).then(|| (u[w[1]] - u[w[0]]).abs() / gap)
        })
        .fold(0.0, f64::max))
}

/// One evaluation of the velocity-gradient monitor against `||u0'|| + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRecord {
    pub t: f64,
    pub grad_u_sup_estimate: f64,
    pub bound_value: f64,
    pub within_bound: bool,
}

impl LipschitzRecord {
    pub fn new(t: f64, grad_u_sup_estimate: f64, initial_gradient: f64) -> Self {
        let bound_value = initial_gradient + 1.0;
        Self { t, grad_u_sup_estimate, bound_value, within_bound: grad_u_sup_estimate <= bound_value }
    }
}

/// `E1 = sum m_i V(X_i) + (1/2) sum sum m_i m_j W(X_i - X_j)` and
/// `E2 = sum m_i U_i^2`; missing velocities count as zero.
pub fn hydro_energies(ens: &ParticleEnsemble, spec: &ConfinementSpec, kernel: &InteractionKernel) -> (f64, f64) {
    let (x, m) = (&ens.positions, &ens.masses);
    let conf: f64 = x.iter().zip(m).map(|(x, m)| m * spec.value(*x)).sum();
    let inter = match kernel.form() {
        KernelForm::Quadratic { a } => {
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for (x, m) in x.iter().zip(m) {
                m0 += m;
                m1 += m * x;
                m2 += m * x * x;
            }
            0.5 * a * (m0 * m2 - m1 * m1)
        }
        _ if kernel.is_zero() => 0.0,
        _ => {
            let mut total = 0.0;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    total += m[i] * m[j] * kernel.value(x[i] - x[j]);
                }
            }
            0.5 * total
        }
    };
    let e2 = match &ens.velocities {
        Some(u) => u.iter().zip(m).map(|(u, m)| m * u * u).sum(),
        None => 0.0,
    };
    (conf + inter, e2)
}

/// Time-step policy and observation schedule of a particle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRunOptions {
    pub dt_max: f64,
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub integrator: HydroIntegrator,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HydroRunSummary {
    pub steps: usize,
    pub min_gap: f64,
    pub collision: bool,
    pub first_collision_time: Option<f64>,
}

/// Steps `ens` to `t_end` with `dt` bounded by `dt_max` and the stiffness
/// limit, calling `observer` at each sample time.
#[allow(clippy::too_many_arguments)]
pub fn run_hydro<E, O>(
    ens: &mut ParticleEnsemble,
    gamma: f64,
    kappa: f64,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    t_end: f64,
    options: &ParticleRunOptions,
    mut observer: O,
) -> Result<HydroRunSummary, E>
where
    E: From<HydroError>,
    O: FnMut(&ParticleEnsemble) -> Result<(), E>,
{
    if !(options.dt_max > 0.0) || t_end < ens.t {
        return Err(HydroError::InvalidParams(format!("dt_max {} or t_end {t_end} invalid", options.dt_max)).into());
    }
    // slack so that splitting an interval into equal steps stays under the guard
    let stiff = if gamma > 0.0 { options.integrator.stiffness_limit() / gamma * (1.0 - 1e-9) } else { f64::INFINITY };
    let dt_limit = options.dt_max.min(stiff);
    let mut summary = HydroRunSummary { min_gap: ens.min_gap(), ..Default::default() };
    drive(
        ens,
        t_end,
        &options.sample_times,
        |_| dt_limit,
        |e, dt| {
            let rep = step_hydro(e, gamma, kappa, spec, kernel, dt, options.integrator)?;
            summary.steps += 1;
            summary.min_gap = summary.min_gap.min(rep.min_gap);
            if rep.collision && !summary.collision {
                summary.collision = true;
                summary.first_collision_time = Some(e.t);
                log::warn!("particle collision at t = {}", e.t);
            }
            Ok::<(), E>(())
        },
        |e| observer(e),
    )?;
    Ok(summary)
}
