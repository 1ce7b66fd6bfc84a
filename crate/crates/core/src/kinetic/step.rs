use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::{cutoff, KineticState};
use super::{KineticError, PhaseGrid, ScalingParams};
use crate::potentials::{convolve_grad_unchecked, ConfinementSpec, InteractionKernel};
use crate::transport::DensityProfile;

/// Largest admissible Courant number `max |v| dt / dx`.
pub const CFL_LIMIT: f64 = 0.9;
/// Number of cells along each edge that are monitored for leakage.
pub const BOUNDARY_WIDTH: usize = 3;
/// Mass allowed in the monitored boundary strips.
pub const BOUNDARY_MASS_TOLERANCE: f64 = 1e-6;
/// Allowed deviation of the post-step renormalization factor from 1.
pub const RENORMALIZATION_TOLERANCE: f64 = 1e-8;

/// Diagnostics of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub dt: f64,
    /// Factor applied to restore unit mass after the positivity clamp.
    pub renormalization: f64,
    /// Mass removed by the positivity clamp.
    pub clamped_mass: f64,
    /// Mass whose velocity image left the grid and was kept in the edge cells.
    pub velocity_overflow: f64,
    /// Largest mass in any monitored boundary strip.
    pub boundary_mass: f64,
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Monotonized-central slope.
fn mc_slope(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else {
        a.signum() * (2.0 * a.abs()).min(2.0 * b.abs()).min(0.5 * (a + b).abs())
    }
}

/// `(1 - e^{-c t}) / c`, equal to `t` at `c = 0`.
#[inline]
pub(crate) fn phi1(c: f64, t: f64) -> f64 {
    if c * t == 0.0 {
        t
    } else {
        -(-c * t).exp_m1() / c
    }
}

/// Conservative transport `f_t + v f_x = 0` over `dt` with closed walls.
///
/// Second-order upwind fluxes (minmod-limited Lax-Wendroff correction), which
/// preserve positivity for Courant numbers up to one.
fn transport_x(grid: &PhaseGrid, f: &mut [f64], dt: f64, slopes: &mut [f64], flux: &mut [f64]) {
    let (nx, nv) = (grid.nx, grid.nv);
    let courant: Vec<f64> = grid.vs().iter().map(|v| v * dt / grid.dx()).collect();
    for i in 0..nx {
        let row = &mut slopes[i * nv..(i + 1) * nv];
        if i == 0 || i == nx - 1 {
            row.iter_mut().for_each(|s| *s = 0.0);
            continue;
        }
        for j in 0..nv {
            let (l, c, r) = (f[(i - 1) * nv + j], f[i * nv + j], f[(i + 1) * nv + j]);
            row[j] = minmod(c - l, r - c);
        }
    }
    // flux[k] is the flux through the interface between cells k and k + 1
    for k in 0..nx - 1 {
        for j in 0..nv {
            let c = courant[j];
            flux[k * nv + j] = if c >= 0.0 {
                let (fl, sl) = (f[k * nv + j], slopes[k * nv + j]);
                c * (fl + 0.5 * (1.0 - c) * sl)
            } else {
                let (fr, sr) = (f[(k + 1) * nv + j], slopes[(k + 1) * nv + j]);
                c * (fr - 0.5 * (1.0 + c) * sr)
            };
        }
    }
    for i in 0..nx {
        for j in 0..nv {
            let out = if i + 1 < nx { flux[i * nv + j] } else { 0.0 };
            let inn = if i > 0 { flux[(i - 1) * nv + j] } else { 0.0 };
            f[i * nv + j] -= out - inn;
        }
    }
}

/// Affine velocity map `v -> a_map v + b_map` of one column over the v-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ColumnMap {
    pub a_map: f64,
    pub b_map: f64,
}

/// Exact solution of the velocity relaxation in one column over time `t`.
///
/// Along characteristics `v' = -(gamma + beta) v + beta u_delta(t) - g`, where
/// the column momentum obeys `m' = -(gamma + beta (1 - r)) m - rho g` with
/// `r = rho / (delta + rho)`. Columns whose initial `u_delta` exceeds the
/// cutoff carry no alignment.
pub(crate) fn column_map(params: &ScalingParams, rho: f64, m: f64, g: f64, t: f64) -> ColumnMap {
    let (gamma, beta) = (params.gamma, params.beta);
    let a = gamma + beta;
    let a_map = (-a * t).exp();
    let u_delta = m / (params.delta + rho);
    let drift = g * phi1(a, t);
    if beta == 0.0 || cutoff(u_delta, params.zeta) != u_delta || a == 0.0 {
        return ColumnMap { a_map, b_map: -drift };
    }
    let r = if rho > 0.0 { rho / (params.delta + rho) } else { 0.0 };
    let c = gamma + beta * (1.0 - r);
    let e = (-c * t).exp() * phi1(beta * r, t);
    let q = (phi1(c, t) - e) / a;
    ColumnMap { a_map, b_map: beta * u_delta * e - beta * r * g * q - drift }
}

/// Pushes the cell masses of one velocity column through `v -> A v + B`.
///
/// The column is reconstructed as MC-limited linear pieces; each piece is
/// integrated exactly over the preimages of the target cells. Images beyond
/// the grid are kept in the edge cells and their mass is returned.
fn remap_column(grid: &PhaseGrid, col: &mut [f64], map: ColumnMap, scratch: &mut Vec<f64>) -> f64 {
    let nv = grid.nv;
    let dv = grid.dv();
    let ColumnMap { a_map, b_map } = map;
    scratch.clear();
    scratch.resize(nv, 0.0);
    let target = |w: f64| ((w - grid.v_min) / dv).floor();
    let mut overflow = 0.0;
    let point_image = a_map * (grid.v_max - grid.v_min) <= 1e-12 * dv;
    for j in 0..nv {
        let fj = col[j];
        if fj == 0.0 {
            continue;
        }
        let cell_mass = fj * dv;
        let slope = if j == 0 || j == nv - 1 { 0.0 } else { mc_slope(fj - col[j - 1], col[j + 1] - fj) };
        let (lo, hi) = (grid.v_min + j as f64 * dv, grid.v_min + (j + 1) as f64 * dv);
        let vc = grid.v(j);
        let (k_lo, k_hi) = if point_image {
            let k = target(a_map * vc + b_map);
            (k, k)
        } else {
            (target(a_map * lo + b_map), target(a_map * hi + b_map))
        };
        let clamp = |k: f64| -> usize { k.max(0.0).min((nv - 1) as f64) as usize };
        if k_lo < 0.0 || k_hi > (nv - 1) as f64 {
            // portion of the image outside the grid, measured in source coordinates
            let out_lo = if k_lo < 0.0 { ((grid.v_min - b_map) / a_map).clamp(lo, hi) - lo } else { 0.0 };
            let out_hi = if k_hi > (nv - 1) as f64 { hi - ((grid.v_max - b_map) / a_map).clamp(lo, hi) } else { 0.0 };
            overflow += if point_image { cell_mass } else { cell_mass * (out_lo + out_hi) / dv };
        }
        if k_lo == k_hi || point_image {
            scratch[clamp(k_lo)] += cell_mass;
            continue;
        }
        let mut deposited = 0.0;
        let mut s_prev = lo;
        let k_first = k_lo as i64;
        let k_last = k_hi as i64;
        for k in k_first..k_last {
            let edge = grid.v_min + (k + 1) as f64 * dv;
            let s_next = ((edge - b_map) / a_map).clamp(s_prev, hi);
            let mid = 0.5 * (s_prev + s_next);
            let piece = ((s_next - s_prev) * (fj + slope * (mid - vc) / dv)).max(0.0);
            scratch[clamp(k as f64)] += piece;
            deposited += piece;
            s_prev = s_next;
        }
        scratch[clamp(k_hi)] += (cell_mass - deposited).max(0.0);
    }
    for (c, m) in col.iter_mut().zip(scratch.iter()) {
        *c = m / dv;
    }
    overflow
}

/// Moves mass between neighbouring cells next to the column mean until the
/// midpoint momentum equals `target`. Binning the remapped column onto the
/// fixed velocity cells otherwise biases the mean velocity by up to `dv / 2`.
fn restore_momentum(grid: &PhaseGrid, col: &mut [f64], target: f64) {
    let nv = grid.nv;
    let dv = grid.dv();
    let mass: f64 = col.iter().sum::<f64>() * dv;
    if !(mass > 0.0) {
        return;
    }
    let momentum: f64 = col.iter().enumerate().map(|(j, c)| c * grid.v(j)).sum::<f64>() * dv;
    // mass (in units of f) that has to move by one cell
    let need = (target - momentum) / (dv * dv);
    let mean = ((target / mass - grid.v_min) / dv - 0.5).clamp(0.0, (nv - 1) as f64);
    let up = need > 0.0;
    let mut need = need.abs();
    // sweep outward from the mean; later passes move mass on by further cells
    for _ in 0..nv {
        let before = need;
        let mut j = if up { (mean.floor() as usize).min(nv - 2) } else { (mean.ceil() as usize).max(1) };
        loop {
            let dest = if up { j + 1 } else { j - 1 };
            let moved = col[j].min(need);
            col[j] -= moved;
            col[dest] += moved;
            need -= moved;
            if need <= 0.0 || (up && j == 0) || (!up && j == nv - 1) {
                break;
            }
            j = if up { j - 1 } else { j + 1 };
        }
        if need <= 0.0 || need == before {
            break;
        }
    }
}

/// Spatial force field `lambda (V'(x_i) + (W' * rho)(x_i))`.
fn force_field(state: &KineticState, params: &ScalingParams, spec: &ConfinementSpec, kernel: &InteractionKernel) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let g = &state.grid;
    let dv = g.dv();
    let vs = g.vs();
    let mut rho = Vec::with_capacity(g.nx);
    let mut m = Vec::with_capacity(g.nx);
    for i in 0..g.nx {
        let col = state.column(i);
        rho.push(col.iter().sum::<f64>() * dv);
        m.push(col.iter().zip(&vs).map(|(c, v)| c * v).sum::<f64>() * dv);
    }
    let xs = g.xs();
    let force = if params.lambda == 0.0 {
        vec![0.0; g.nx]
    } else {
        let profile = DensityProfile::new_unchecked(g.x_min, g.dx(), rho.clone());
        let conv = if kernel.is_zero() { vec![0.0; g.nx] } else { convolve_grad_unchecked(kernel, &profile, &xs) };
        xs.iter().zip(&conv).map(|(x, w)| params.lambda * (spec.grad(*x) + w)).collect()
    };
    (rho, m, force)
}

fn velocity_step(state: &mut KineticState, params: &ScalingParams, spec: &ConfinementSpec, kernel: &InteractionKernel, dt: f64) -> f64 {
    let (rho, m, force) = force_field(state, params, spec, kernel);
    let grid = state.grid;
    let vs = grid.vs();
    state
        .f
        .par_chunks_mut(grid.nv)
        .enumerate()
        .map_init(Vec::new, |scratch, (i, col)| {
            let map = column_map(params, rho[i], m[i], force[i], dt);
            if map.a_map == 1.0 && map.b_map == 0.0 {
                return 0.0;
            }
            let momentum: f64 = col.iter().zip(&vs).map(|(c, v)| c * v).sum::<f64>() * grid.dv();
            let overflow = remap_column(&grid, col, map, scratch);
            restore_momentum(&grid, col, map.a_map * momentum + map.b_map * rho[i]);
            overflow
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Advances `state` by `dt` with Strang splitting: half transport in `x`,
/// exact velocity relaxation, half transport in `x`.
pub fn step_kinetic(
    state: &mut KineticState,
    params: &ScalingParams,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    dt: f64,
) -> Result<StepReport, KineticError> {
    let grid = state.grid;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(KineticError::InvalidParams(format!("time step {dt} must be positive")));
    }
    let courant = grid.max_speed() * dt / grid.dx();
    if courant > CFL_LIMIT {
        return Err(KineticError::CflViolation { courant, limit: CFL_LIMIT });
    }
    let mut slopes = vec![0.0; grid.cells()];
    let mut flux = vec![0.0; grid.cells()];
    transport_x(&grid, &mut state.f, 0.5 * dt, &mut slopes, &mut flux);
    let velocity_overflow = velocity_step(state, params, spec, kernel, dt);
    transport_x(&grid, &mut state.f, 0.5 * dt, &mut slopes, &mut flux);

    let mut clamped_mass = 0.0;
    for c in state.f.iter_mut() {
        if *c < 0.0 {
            clamped_mass -= *c;
            *c = 0.0;
        }
    }
    clamped_mass *= grid.dx() * grid.dv();
    let mass = state.mass();
    let renormalization = 1.0 / mass;
    if !((renormalization - 1.0).abs() <= RENORMALIZATION_TOLERANCE) {
        return Err(KineticError::RenormalizationDrift(renormalization));
    }
    state.f.iter_mut().for_each(|c| *c *= renormalization);
    state.t += dt;

    let boundary_mass = state.boundary_mass(BOUNDARY_WIDTH);
    if boundary_mass > BOUNDARY_MASS_TOLERANCE {
        return Err(KineticError::BoundaryMassLeak { mass: boundary_mass, t: state.t });
    }
    Ok(StepReport { dt, renormalization, clamped_mass, velocity_overflow, boundary_mass })
}
