use serde::{Deserialize, Serialize};

use super::KineticError;

/// Cell-centred phase-space grid on `[x_min, x_max] x [v_min, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nx: usize,
    pub nv: usize,
}

impl PhaseGrid {
    pub fn new(x_min: f64, x_max: f64, v_min: f64, v_max: f64, nx: usize, nv: usize) -> Result<Self, KineticError> {
        if nx < 8 || nv < 8 {
            return Err(KineticError::InvalidGrid(format!("need nx, nv >= 8, got {nx} x {nv}")));
        }
        if !(x_max > x_min) || !(v_max > v_min) || ![x_min, x_max, v_min, v_max].iter().all(|b| b.is_finite()) {
            return Err(KineticError::InvalidGrid("empty or non-finite domain".into()));
        }
        Ok(Self { x_min, x_max, v_min, v_max, nx, nv })
    }

    /// Same domain with both resolutions doubled.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx, nv: 2 * self.nv, ..*self }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    #[inline]
    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / self.nv as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        self.v_min + (j as f64 + 0.5) * self.dv()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn vs(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.v(j)).collect()
    }

    /// Largest transport speed `max |v|` over cell centres.
    pub fn max_speed(&self) -> f64 {
        self.v(0).abs().max(self.v(self.nv - 1).abs())
    }

    /// Largest `dt` with `max |v| dt / dx <= cfl`.
    pub fn cfl_dt(&self, cfl: f64) -> f64 {
        cfl * self.dx() / self.max_speed()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }

    pub fn cells(&self) -> usize {
        self.nx * self.nv
    }
}

/// Friction, force and alignment strengths plus the vacuum regularization.
///
/// In the singular scaling `gamma = 1 / (kappa eps)` and `lambda = beta =
/// kappa gamma`, so that `kappa * gamma == lambda == beta` holds bitwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub epsilon: Option<f64>,
    pub kappa: Option<f64>,
    /// Linear damping.
    pub gamma: f64,
    /// Strength of the confinement and interaction forces.
    pub lambda: f64,
    /// Local alignment.
    pub beta: f64,
    /// Vacuum floor in `u_delta = m / (delta + rho)`.
    pub delta: f64,
    /// Velocity cutoff applied to `u_delta`.
    pub zeta: f64,
}

impl ScalingParams {
    pub fn from_epsilon(epsilon: f64, kappa: f64, delta: f64, zeta: f64) -> Result<Self, KineticError> {
        if !(epsilon > 0.0) || !(kappa > 0.0) {
            return Err(KineticError::InvalidParams(format!("epsilon {epsilon} and kappa {kappa} must be positive")));
        }
        let gamma = 1.0 / (kappa * epsilon);
        let lambda = kappa * gamma;
        Self::check_regularization(delta, zeta)?;
        Ok(Self { epsilon: Some(epsilon), kappa: Some(kappa), gamma, lambda, beta: lambda, delta, zeta })
    }

    /// Arbitrary nonnegative coefficients, e.g. to switch forces off.
    pub fn custom(gamma: f64, lambda: f64, beta: f64, delta: f64, zeta: f64) -> Result<Self, KineticError> {
        if !(gamma >= 0.0 && lambda >= 0.0 && beta >= 0.0) {
            return Err(KineticError::InvalidParams("gamma, lambda, beta must be nonnegative".into()));
        }
        Self::check_regularization(delta, zeta)?;
        Ok(Self { epsilon: None, kappa: None, gamma, lambda, beta, delta, zeta })
    }

    fn check_regularization(delta: f64, zeta: f64) -> Result<(), KineticError> {
        if !(delta >= 0.0) || !(zeta > 0.0) {
            return Err(KineticError::InvalidParams(format!("need delta >= 0 and zeta > 0, got {delta}, {zeta}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_scaling_is_bitwise_consistent() {
        for eps in [0.2, 0.1, 0.05, 0.025, 0.0123] {
            for kappa in [0.05, 0.1, 0.3, 1.0 / 3.0] {
                let p = ScalingParams::from_epsilon(eps, kappa, 1e-8, 1.0).unwrap();
                assert_eq!(kappa * p.gamma, p.lambda);
                assert_eq!(p.lambda, p.beta);
                assert!((p.lambda - 1.0 / eps).abs() <= 1e-12 / eps);
            }
        }
    }

    #[test]
    fn grid_geometry() {
        let g = PhaseGrid::new(-4.0, 4.0, -2.0, 2.0, 16, 8).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.dv(), 0.5);
        assert_eq!(g.x(0), -3.75);
        assert_eq!(g.v(7), 1.75);
        assert_eq!(g.max_speed(), 1.75);
        assert!(PhaseGrid::new(0.0, 1.0, 0.0, 1.0, 4, 8).is_err());
        assert!(ScalingParams::from_epsilon(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(ScalingParams::custom(0.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }
}
