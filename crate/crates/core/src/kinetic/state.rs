use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{KineticError, PhaseGrid, ScalingParams};
use crate::schedule::Clocked;
use crate::transport::{Density1D, DensityProfile};

/// Largest probability mass that initialization may lose to domain truncation.
pub const INIT_LEAKAGE_TOLERANCE: f64 = 1e-8;

/// Phase-space density `f(x_i, v_j)` stored row-major by `x` (index `i * nv + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub grid: PhaseGrid,
    pub f: Vec<f64>,
    pub t: f64,
}

impl KineticState {
    pub fn new(grid: PhaseGrid, f: Vec<f64>, t: f64) -> Result<Self, KineticError> {
        if f.len() != grid.cells() {
            return Err(KineticError::GridMismatch { expected: grid.cells(), got: f.len() });
        }
        if f.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(KineticError::InvalidState("f must be finite and nonnegative".into()));
        }
        Ok(Self { grid, f, t })
    }

    /// `sum f dx dv`.
    pub fn mass(&self) -> f64 {
        self.f.iter().sum::<f64>() * self.grid.dx() * self.grid.dv()
    }

    /// Velocity column at `x_i`.
    pub fn column(&self, i: usize) -> &[f64] {
        let nv = self.grid.nv;
        &self.f[i * nv..(i + 1) * nv]
    }

    /// `sum v^k f dx dv`.
    pub fn velocity_moment(&self, k: i32) -> f64 {
        let g = &self.grid;
        let vk: Vec<f64> = g.vs().iter().map(|v| v.powi(k)).collect();
        let mut total = 0.0;
        for i in 0..g.nx {
            total += self.column(i).iter().zip(&vk).map(|(f, w)| f * w).sum::<f64>();
        }
        total * g.dx() * g.dv()
    }

    /// `sum x^p v^q f dx dv`.
    pub fn phase_moment(&self, p: i32, q: i32) -> f64 {
        let g = &self.grid;
        let vq: Vec<f64> = g.vs().iter().map(|v| v.powi(q)).collect();
        let mut total = 0.0;
        for i in 0..g.nx {
            let col: f64 = self.column(i).iter().zip(&vq).map(|(f, w)| f * w).sum();
            total += g.x(i).powi(p) * col;
        }
        total * g.dx() * g.dv()
    }

    /// Spatial density `rho_i = sum_j f_ij dv` as a grid profile.
    pub fn density(&self) -> DensityProfile {
        let g = &self.grid;
        let dv = g.dv();
        let rho = (0..g.nx).map(|i| self.column(i).iter().sum::<f64>() * dv).collect();
        DensityProfile::new_unchecked(g.x_min, g.dx(), rho)
    }

    /// Largest mass found within `width` cells of any edge of the phase grid.
    pub fn boundary_mass(&self, width: usize) -> f64 {
        let g = &self.grid;
        let (wx, wv) = (width.min(g.nx), width.min(g.nv));
        let cell = g.dx() * g.dv();
        let strip_x = |range: std::ops::Range<usize>| -> f64 { range.map(|i| self.column(i).iter().sum::<f64>()).sum::<f64>() * cell };
        let strip_v = |range: std::ops::Range<usize>| -> f64 {
            (0..g.nx).map(|i| self.column(i)[range.clone()].iter().sum::<f64>()).sum::<f64>() * cell
        };
        strip_x(0..wx)
            .max(strip_x(g.nx - wx..g.nx))
            .max(strip_v(0..wv))
            .max(strip_v(g.nv - wv..g.nv))
    }

    /// Writes `x_index,v_index,f` rows plus a JSON sidecar with grid and time.
    pub fn dump(&self, csv_path: &Path) -> Result<(), KineticError> {
        let g = &self.grid;
        let mut body = String::with_capacity(24 * g.cells() + 32);
        body.push_str("x_index,v_index,f\n");
        for i in 0..g.nx {
            for (j, v) in self.column(i).iter().enumerate() {
                body.push_str(&format!("{i},{j},{v:e}\n"));
            }
        }
        fs::write(csv_path, body)?;
        #[derive(Serialize)]
        struct Sidecar<'a> {
            t: f64,
            grid: &'a PhaseGrid,
            dx: f64,
            dv: f64,
            mass: f64,
        }
        let side = Sidecar { t: self.t, grid: g, dx: g.dx(), dv: g.dv(), mass: self.mass() };
        fs::write(csv_path.with_extension("json"), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }
}

impl Clocked for KineticState {
    fn time(&self) -> f64 {
        self.t
    }
    fn set_time(&mut self, t: f64) {
        self.t = t;
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Near-monokinetic data `f = rho0(x) g_theta(v - u0(x))`.
///
/// Both factors are integrated exactly over each cell, and every velocity
/// column is normalized so that the spatial density equals the cell averages
/// of `rho0` on the grid.
pub fn init_kinetic<D, U>(rho0: &D, u0: U, theta: f64, grid: &PhaseGrid) -> Result<KineticState, KineticError>
where
    D: Density1D + ?Sized,
    U: Fn(f64) -> f64,
{
    let (dx, dv) = (grid.dx(), grid.dv());
    if !(theta >= 2.0 * dv) {
        return Err(KineticError::UnresolvedThermalWidth { theta, dv });
    }
    let x_edge = |i: usize| grid.x_min + i as f64 * dx;
    let v_edge = |j: usize| grid.v_min + j as f64 * dv;
    let mut lost = 1.0 - (rho0.cdf(grid.x_max) - rho0.cdf(grid.x_min));
    let mut f = vec![0.0; grid.cells()];
    let mut mass_x = 0.0;
    for i in 0..grid.nx {
        let cell_mass = (rho0.cdf(x_edge(i + 1)) - rho0.cdf(x_edge(i))).max(0.0);
        mass_x += cell_mass;
        let u = u0(grid.x(i));
        let col = &mut f[i * grid.nv..(i + 1) * grid.nv];
        let mut prev = std_normal_cdf((v_edge(0) - u) / theta);
        let below = prev;
        for (j, c) in col.iter_mut().enumerate() {
            let next = std_normal_cdf((v_edge(j + 1) - u) / theta);
            *c = (next - prev).max(0.0);
            prev = next;
        }
        let kept: f64 = col.iter().sum();
        lost += cell_mass * (below + (1.0 - prev)).max(0.0);
        if kept > 0.0 {
            let scale = cell_mass / (kept * dx * dv);
            col.iter_mut().for_each(|c| *c *= scale);
        } else if cell_mass > 0.0 {
            lost += cell_mass;
        }
    }
    if lost > INIT_LEAKAGE_TOLERANCE {
        return Err(KineticError::MassLeakage(lost));
    }
    if !(mass_x > 0.0) {
        return Err(KineticError::MassLeakage(1.0));
    }
    f.iter_mut().for_each(|c| *c /= mass_x);
    KineticState::new(*grid, f, 0.0)
}

/// Velocity moments of one state together with the regularized local velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub x_min: f64,
    pub dx: f64,
    pub rho: Vec<f64>,
    /// Momentum `m = int v f dv`.
    pub m: Vec<f64>,
    /// `m / (delta + rho)`.
    pub u_delta: Vec<f64>,
    /// `u_delta` with values above `zeta` in modulus set to zero.
    pub u_cut: Vec<f64>,
    /// `int v^2 f dv`.
    pub e: Vec<f64>,
}

impl MomentSet {
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn density(&self) -> DensityProfile {
        DensityProfile::new_unchecked(self.x_min, self.dx, self.rho.clone())
    }
}

#[inline]
pub fn cutoff(u: f64, zeta: f64) -> f64 {
    if u.abs() <= zeta {
        u
    } else {
        0.0
    }
}

pub fn moments(state: &KineticState, params: &ScalingParams) -> MomentSet {
    let g = &state.grid;
    let dv = g.dv();
    let vs = g.vs();
    let mut rho = Vec::with_capacity(g.nx);
    let mut m = Vec::with_capacity(g.nx);
    let mut e = Vec::with_capacity(g.nx);
    for i in 0..g.nx {
        let (mut r, mut p, mut k) = (0.0, 0.0, 0.0);
        for (c, v) in state.column(i).iter().zip(&vs) {
            r += c;
            p += c * v;
            k += c * v * v;
        }
        rho.push(r * dv);
        m.push(p * dv);
        e.push(k * dv);
    }
    let u_delta: Vec<f64> = rho.iter().zip(&m).map(|(r, p)| p / (params.delta + r)).collect();
    let u_cut = u_delta.iter().map(|&u| cutoff(u, params.zeta)).collect();
    MomentSet { x_min: g.x_min, dx: g.dx(), rho, m, u_delta, u_cut, e }
}
