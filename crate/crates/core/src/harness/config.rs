use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::hydro::HydroIntegrator;
use crate::potentials::{ConfinementSpec, InteractionKernel, KernelTable};
use crate::transport::Profile;

/// Interaction kernel descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Zero,
    /// `W(x) = a x^2 / 2`.
    Quadratic { a: f64 },
    /// `W(x) = a exp(-x^2 / (2 s^2))`.
    Gaussian { a: f64, s: f64 },
    /// Samples of `W` read from a CSV file of `x,w` pairs.
    Tabulated { path: PathBuf },
}

impl KernelSpec {
    pub fn build(&self) -> Result<InteractionKernel, HarnessError> {
        Ok(match self {
            KernelSpec::Zero => InteractionKernel::zero(),
            KernelSpec::Quadratic { a } => InteractionKernel::quadratic(*a),
            KernelSpec::Gaussian { a, s } => InteractionKernel::gaussian(*a, *s),
            KernelSpec::Tabulated { path } => InteractionKernel::tabulated(KernelTable::from_csv(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialsConfig {
    pub c_v: f64,
    pub kernel: KernelSpec,
}

impl Default for PotentialsConfig {
    fn default() -> Self {
        Self { c_v: 1.0, kernel: KernelSpec::Quadratic { a: 1.0 } }
    }
}

impl PotentialsConfig {
    pub fn confinement(&self) -> ConfinementSpec {
        ConfinementSpec::new(self.c_v)
    }
}

/// Phase grid and kinetic time stepping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nv: usize,
    pub x_min: f64,
    pub x_max: f64,
    /// Velocity half-width; when absent it is `sup |u0| + v_width_thetas * theta`.
    pub v_half_width: Option<f64>,
    pub v_width_thetas: f64,
    pub dt_max: f64,
    pub cfl: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 256, nv: 256, x_min: -4.0, x_max: 4.0, v_half_width: None, v_width_thetas: 6.0, dt_max: 1.25e-4, cfl: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ThetaPolicy {
    Fixed { value: f64 },
    SqrtEpsilon,
}

impl ThetaPolicy {
    pub fn theta(&self, epsilon: f64) -> f64 {
        match *self {
            ThetaPolicy::Fixed { value } => value,
            ThetaPolicy::SqrtEpsilon => epsilon.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationConfig {
    pub delta: f64,
    /// `zeta = zeta_factor * sup |u0|`.
    pub zeta_factor: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self { delta: 1e-8, zeta_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleConfig {
    /// Lower bound on the particle count: every kinetic cell is split into
    /// `ceil(n / nx)` Lagrangian cells.
    pub n: usize,
    pub hydro_dt_max: f64,
    pub aggregation_dt_max: f64,
    pub integrator: HydroIntegrator,
    /// Midpoint nodes for Wasserstein distances involving a grid density.
    pub n_quad: usize,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self { n: 2000, hydro_dt_max: 1e-3, aggregation_dt_max: 1e-3, integrator: HydroIntegrator::Rk4, n_quad: 1 << 15 }
    }
}

/// Settings of the energy-identity refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub epsilon: f64,
    /// Tolerance on `sup |r|` relative to `beta D1(0)`.
    pub relative_tolerance: f64,
    /// Required reduction of `sup |r|` when `(dx, dv, dt)` are halved.
    pub min_refinement_ratio: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, relative_tolerance: 0.02, min_refinement_ratio: 1.8 }
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub t_final: f64,
    /// Number of sample times (including `t = 0` and `t_final`).
    pub samples: usize,
    pub kappa: f64,
    pub epsilons: Vec<f64>,
    pub gammas: Vec<f64>,
    pub theta: ThetaPolicy,
    pub initial: Profile,
    pub potentials: PotentialsConfig,
    pub grid: GridConfig,
    pub regularization: RegularizationConfig,
    pub particles: ParticleConfig,
    pub audit: AuditConfig,
    /// Stand-in for the absolute constant of the kinetic stability bound.
    pub c_cal: f64,
    /// Half-width of the pair grid used to estimate `c_W`.
    pub cw_radius: f64,
    pub cw_pairs: usize,
    pub output_dir: PathBuf,
    /// Seed for randomized utilities; the sweeps themselves are deterministic.
    pub seed: u64,
    /// Write measured wall times into `rows.csv` (otherwise zeros, keeping reruns bit-identical).
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "benchmark".into(),
            t_final: 0.5,
            samples: 21,
            kappa: 0.05,
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            gammas: vec![5.0, 10.0, 20.0, 40.0],
            theta: ThetaPolicy::SqrtEpsilon,
            initial: Profile::truncated_gaussian(0.0, 0.5, -4.0, 4.0),
            potentials: PotentialsConfig::default(),
            grid: GridConfig::default(),
            regularization: RegularizationConfig::default(),
            particles: ParticleConfig::default(),
            audit: AuditConfig::default(),
            c_cal: 1.0,
            cw_radius: 8.0,
            cw_pairs: 401,
            output_dir: PathBuf::from("out"),
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let normalized = toml::to_string(&table).map_err(|e| HarnessError::Config(e.to_string()))?;
        let cfg: Self = toml::from_str(&normalized).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        // t_final = 0 is accepted as a degenerate run with every integral zero
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return bad(format!("t_final {} must be finite and nonnegative", self.t_final));
        }
        if self.samples < 2 {
            return bad("need at least two sample times".into());
        }
        if self.epsilons.is_empty() || self.gammas.is_empty() {
            return bad("epsilon and gamma lists must be nonempty".into());
        }
        if self.epsilons.iter().chain(&self.gammas).any(|p| !(*p > 0.0)) {
            return bad("every epsilon and gamma must be positive".into());
        }
        if !(self.kappa > 0.0) {
            return bad(format!("kappa {} must be positive", self.kappa));
        }
        if self.particles.n < 3 {
            return bad("need at least three particles".into());
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        crate::schedule::uniform_times(0.0, self.t_final, self.samples - 1)
    }
}

/// Sets a dotted `key=value` path in a TOML table; `value` is parsed as a
/// TOML value and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), HarnessError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override '{assignment}' is not key=value")))?;
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("override path '{key}' crosses a non-table value")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
