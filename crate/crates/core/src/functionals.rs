//! Free energy, dissipation, relative entropy and the stability bounds
//! relating the kinetic, hydrodynamic and aggregation models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetic::{KineticState, MomentSet};
use crate::particles::ParticleEnsemble;
use crate::potentials::{ConfinementSpec, InteractionKernel, KernelForm};

/// Cells with `rho` at or below this are vacuum and contribute nothing to
/// local-velocity functionals.
pub const VACUUM_FLOOR: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("kinetic density and particle hull do not overlap")]
    EmptyOverlap,
    #[error("bound denominator {0} is not positive")]
    DenominatorNotPositive(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Free energy `F = K + lambda int V rho + (lambda / 2) int int W rho rho` and
/// the two dissipation rates at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub f_total: f64,
    /// `(1/2) int int |v|^2 f`.
    pub kinetic: f64,
    pub potential_conf: f64,
    pub potential_int: f64,
    /// Alignment dissipation `int int f |u - v|^2`.
    pub d1: f64,
    /// Friction dissipation `int int |v|^2 f`.
    pub d2: f64,
}

/// `(1/2) int int W(x - y) rho(x) rho(y)` for cell values `rho` on a uniform grid.
pub fn interaction_energy(kernel: &InteractionKernel, x_min: f64, dx: f64, rho: &[f64]) -> f64 {
    let n = rho.len();
    match kernel.form() {
        KernelForm::Quadratic { a } => {
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for (i, r) in rho.iter().enumerate() {
                let x = x_min + (i as f64 + 0.5) * dx;
                m0 += r * dx;
                m1 += r * x * dx;
                m2 += r * x * x * dx;
            }
            // W(z) = a z^2 / 2
            0.5 * a * (m0 * m2 - m1 * m1)
        }
        _ if kernel.is_zero() => 0.0,
        _ => {
            // W(x_i - x_k) depends only on i - k
            let table: Vec<f64> = (0..n).map(|d| kernel.value(d as f64 * dx)).collect();
            let mut total = 0.0;
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += rho[k] * table[i.abs_diff(k)];
                }
                total += rho[i] * acc;
            }
            0.5 * total * dx * dx
        }
    }
}

pub fn free_energy(state: &KineticState, lambda: f64, spec: &ConfinementSpec, kernel: &InteractionKernel) -> EnergyReport {
    let g = &state.grid;
    let (dx, dv) = (g.dx(), g.dv());
    let vs = g.vs();
    let mut rho = Vec::with_capacity(g.nx);
    let (mut kinetic2, mut conf, mut d1) = (0.0, 0.0, 0.0);
    for i in 0..g.nx {
        let col = state.column(i);
        let (mut r, mut m, mut e) = (0.0, 0.0, 0.0);
        for (c, v) in col.iter().zip(&vs) {
            r += c;
            m += c * v;
            e += c * v * v;
        }
        let r_cell = r * dv;
        rho.push(r_cell);
        kinetic2 += e * dv;
        conf += spec.value(g.x(i)) * r_cell;
        if r_cell > VACUUM_FLOOR {
            let u = m / r;
            d1 += col.iter().zip(&vs).map(|(c, v)| c * (v - u) * (v - u)).sum::<f64>() * dv;
        }
    }
    let d2 = kinetic2 * dx;
    let kinetic = 0.5 * d2;
    let potential_conf = lambda * conf * dx;
    let potential_int = if lambda == 0.0 { 0.0 } else { lambda * interaction_energy(kernel, g.x_min, dx, &rho) };
    EnergyReport {
        t: state.t,
        f_total: kinetic + potential_conf + potential_int,
        kinetic,
        potential_conf,
        potential_int,
        d1: d1 * dx,
        d2,
    }
}

/// `r(t_k) = dF/dt + beta D1 + gamma D2` at interior samples, with the time
/// derivative taken by central differences.
pub fn energy_identity_residual(reports: &[EnergyReport], beta: f64, gamma: f64) -> Result<Vec<(f64, f64)>, FunctionalError> {
    if reports.len() < 3 {
        return Err(FunctionalError::TooFewSamples { got: reports.len(), min: 3 });
    }
    Ok(reports
        .windows(3)
        .map(|w| {
            let slope = (w[2].f_total - w[0].f_total) / (w[2].t - w[0].t);
            (w[1].t, slope + beta * w[1].d1 + gamma * w[1].d2)
        })
        .collect())
}

/// Integrated relative entropy `int (rho / 2) |u - u_bar|^2` and relative flux
/// `int rho |u - u_bar|^2` between kinetic moments and a hydrodynamic ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelEntropyReport {
    pub t: f64,
    pub h_integral: f64,
    pub relflux_integral: f64,
}

/// Piecewise-linear interpolant through sorted particle velocities, constant
/// outside the particle hull.
#[derive(Debug, Clone)]
pub struct ParticleVelocityField {
    xs: Vec<f64>,
    us: Vec<f64>,
}

impl ParticleVelocityField {
    pub fn new(ens: &ParticleEnsemble) -> Self {
        let vel = ens.velocities_or_zero();
        let order = ens.sorted_order();
        let mut xs: Vec<f64> = Vec::with_capacity(order.len());
        let mut us: Vec<f64> = Vec::with_capacity(order.len());
        for k in order {
            let (x, u) = (ens.positions[k], vel[k]);
            // coincident particles are merged into their mean velocity
            if let Some(&last) = xs.last() {
                if x - last <= 0.0 {
                    let n = us.len();
                    us[n - 1] = 0.5 * (us[n - 1] + u);
                    continue;
                }
            }
            xs.push(x);
            us.push(u);
        }
        Self { xs, us }
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.us[0];
        }
        if x >= self.xs[n - 1] {
            return self.us[n - 1];
        }
        let k = self.xs.partition_point(|&p| p <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let w = (x - x0) / (x1 - x0);
        self.us[k - 1] * (1.0 - w) + self.us[k] * w
    }
}

pub fn relative_entropy(moments: &MomentSet, hydro: &ParticleEnsemble) -> Result<RelEntropyReport, FunctionalError> {
    relative_entropy_at(moments, hydro, hydro.t)
}

fn relative_entropy_at(moments: &MomentSet, hydro: &ParticleEnsemble, t: f64) -> Result<RelEntropyReport, FunctionalError> {
    if hydro.is_empty() || moments.is_empty() {
        return Err(FunctionalError::EmptyOverlap);
    }
    let field = ParticleVelocityField::new(hydro);
    let (lo, hi) = field.hull();
    let half = 0.5 * moments.dx;
    let occupied = |i: usize| moments.rho[i] > VACUUM_FLOOR;
    let first = (0..moments.len()).find(|&i| occupied(i));
    let last = (0..moments.len()).rev().find(|&i| occupied(i));
    match (first, last) {
        (Some(a), Some(b)) if moments.x(a) - half <= hi && moments.x(b) + half >= lo => {}
        _ => return Err(FunctionalError::EmptyOverlap),
    }
    let (mut h, mut flux) = (0.0, 0.0);
    for i in 0..moments.len() {
        if !occupied(i) {
            continue;
        }
        let diff = moments.u_delta[i] - field.eval(moments.x(i));
        h += 0.5 * moments.rho[i] * diff * diff;
        flux += moments.rho[i] * diff * diff;
    }
    Ok(RelEntropyReport { t, h_integral: h * moments.dx, relflux_integral: flux * moments.dx })
}

/// `I = int rho0 |u0 - u_bar0|^2 + int (int f0 |v|^2 dv - rho_bar0 |u_bar0|^2)`.
///
/// The second term compares the kinetic second moment with the particle
/// kinetic energy `sum_i m_i U_i^2`.
pub fn initial_discrepancy(kin0: &KineticState, hydro0: &ParticleEnsemble, delta: f64) -> Result<f64, FunctionalError> {
    let params = crate::kinetic::ScalingParams::custom(0.0, 0.0, 0.0, delta, f64::MAX)
        .map_err(|e| FunctionalError::InvalidInput(e.to_string()))?;
    let mo = crate::kinetic::moments(kin0, &params);
    let rel = relative_entropy_at(&mo, hydro0, kin0.t)?;
    let second: f64 = mo.e.iter().sum::<f64>() * mo.dx;
    let vel = hydro0.velocities_or_zero();
    let hydro_energy: f64 = hydro0.masses.iter().zip(&vel).map(|(m, u)| m * u * u).sum();
    Ok(rel.relflux_integral + second - hydro_energy)
}

/// A bound `lhs <= rhs` with its right-hand side broken into named terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub components: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(lhs: f64, rhs: f64, components: BTreeMap<String, f64>) -> Self {
        Self { lhs, rhs, satisfied: lhs <= rhs, components }
    }
}

/// Inputs of the kinetic-to-hydrodynamic stability bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropMainInputs {
    /// `W_2^2` between the initial kinetic and hydrodynamic densities.
    pub w2sq_0: f64,
    /// Initial discrepancy `I`.
    pub i_0: f64,
    /// Lipschitz constant `C_u` of the limiting velocity field.
    pub c_u: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Stand-in for the unspecified absolute constant.
    pub c_cal: f64,
}

/// `rhs = e^{C_u} (W2^2 + [I + C_u max(1, lambda) eps + e^{C_u} lambda W2^2] / (gamma - C lambda - e^{C_u} (1 + lambda)))`.
pub fn bound_prop_main(inputs: &PropMainInputs, lhs: f64) -> Result<BoundReport, FunctionalError> {
    let PropMainInputs { w2sq_0, i_0, c_u, gamma, lambda, epsilon, c_cal } = *inputs;
    let growth = c_u.exp();
    let denominator = gamma - c_cal * lambda - growth * (1.0 + lambda);
    if !(denominator > 0.0) {
        return Err(FunctionalError::DenominatorNotPositive(denominator));
    }
    let eps_term = c_u * lambda.max(1.0) * epsilon;
    let coupling = growth * lambda * w2sq_0;
    let numerator = i_0 + eps_term + coupling;
    let rhs = growth * (w2sq_0 + numerator / denominator);
    let components = BTreeMap::from([
        ("growth".to_string(), growth),
        ("w2sq_0".to_string(), w2sq_0),
        ("initial_discrepancy".to_string(), i_0),
        ("epsilon_term".to_string(), eps_term),
        ("coupling_term".to_string(), coupling),
        ("denominator".to_string(), denominator),
    ]);
    Ok(BoundReport::new(lhs, rhs, components))
}

/// Initial-data functionals entering the hydrodynamic-to-aggregation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverdampedInputs {
    /// `E1` of the aggregation data.
    pub e1_0_limit: f64,
    /// `E1` of the hydrodynamic data.
    pub e1_0_gamma: f64,
    /// `E2` of the aggregation data.
    pub e2_0_limit: f64,
    /// `E2` of the hydrodynamic data.
    pub e2_0_gamma: f64,
    /// `W_2^2` between the two initial densities.
    pub w2sq_0: f64,
    /// `int |u0 - u0^gamma|^2 rho0^gamma`.
    pub u_mismatch_0: f64,
    pub gamma: f64,
    pub c_w: f64,
}

/// `rhs = M_gamma / (2 c_W gamma - 1)` with
/// `M_gamma = 4 (E1 + E1^gamma) + (1 + gamma) W2^2 + (2 / gamma)(E2 + E2^gamma) + int |u0 - u0^gamma|^2 rho0^gamma`.
pub fn bound_overdamped(inputs: &OverdampedInputs, lhs: f64) -> Result<BoundReport, FunctionalError> {
    let OverdampedInputs { e1_0_limit, e1_0_gamma, e2_0_limit, e2_0_gamma, w2sq_0, u_mismatch_0, gamma, c_w } = *inputs;
    let denominator = 2.0 * c_w * gamma - 1.0;
    if !(denominator > 0.0) {
        return Err(FunctionalError::DenominatorNotPositive(denominator));
    }
    let potential = 4.0 * (e1_0_limit + e1_0_gamma);
    let transport = (1.0 + gamma) * w2sq_0;
    let kinetic = 2.0 / gamma * (e2_0_limit + e2_0_gamma);
    let m_gamma = potential + transport + kinetic + u_mismatch_0;
    let components = BTreeMap::from([
        ("M_gamma".to_string(), m_gamma),
        ("denominator".to_string(), denominator),
        ("potential_term".to_string(), potential),
        ("transport_term".to_string(), transport),
        ("kinetic_term".to_string(), kinetic),
        ("velocity_mismatch".to_string(), u_mismatch_0),
    ]);
    Ok(BoundReport::new(lhs, m_gamma / denominator, components))
}
