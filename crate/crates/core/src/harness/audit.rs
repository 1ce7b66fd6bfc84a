use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::write_atomic;
use super::sweep::{kinetic_leg, kinetic_setup};
use super::HarnessError;
use crate::functionals::energy_identity_residual;

/// Energy-identity residual of one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLeg {
    pub nx: usize,
    pub nv: usize,
    pub dt: f64,
    pub steps: usize,
    pub sup_residual: f64,
    /// Time at which `|r|` peaks.
    pub t_sup: f64,
    /// `beta D1(0)`.
    pub beta_d1_0: f64,
    pub integrated_d1: f64,
    pub initial_free_energy: f64,
    pub final_free_energy: f64,
    /// Largest increase of `F` between consecutive steps.
    pub max_energy_increase: f64,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub residual: Vec<(f64, f64)>,
}

/// Outcome of the refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub epsilon: f64,
    pub coarse: AuditLeg,
    pub fine: AuditLeg,
    pub tolerance: f64,
    pub refinement_ratio: f64,
    pub within_tolerance: bool,
    pub converging: bool,
}

/// Runs the benchmark at `(nx, nv, dt_max)`.
pub fn audit_leg(cfg: &ExperimentConfig, epsilon: f64, nx: usize, nv: usize, dt_max: f64) -> Result<AuditLeg, HarnessError> {
    let clock = Instant::now();
    let spec = cfg.potentials.confinement();
    let kernel = cfg.potentials.kernel.build()?;
    let mut setup = kinetic_setup(cfg, epsilon, nx, nv, &spec, &kernel)?;
    let params = setup.params;
    let trace = kinetic_leg(&mut setup, &spec, &kernel, cfg.t_final, 1, dt_max, cfg.grid.cfl, |_, _, _| Ok(()))?;
    let residual = energy_identity_residual(&trace.energies, params.beta, params.gamma)?;
    let (t_sup, sup_residual) = residual.iter().fold((0.0, 0.0), |acc, &(t, r)| if r.abs() > acc.1 { (t, r.abs()) } else { acc });
    let e = &trace.energies;
    let max_energy_increase = e.windows(2).map(|w| w[1].f_total - w[0].f_total).fold(f64::NEG_INFINITY, f64::max);
    Ok(AuditLeg {
        nx,
        nv,
        dt: trace.dt,
        steps: trace.summary.steps,
        sup_residual,
        t_sup,
        beta_d1_0: params.beta * e[0].d1,
        integrated_d1: trace.integrated_d1(),
        initial_free_energy: e[0].f_total,
        final_free_energy: e[e.len() - 1].f_total,
        max_energy_increase,
        wall_time_s: clock.elapsed().as_secs_f64(),
        residual,
    })
}

/// Energy identity at the configured resolution and at doubled resolution
/// with half the time step.
pub fn run_energy_audit(cfg: &ExperimentConfig) -> Result<AuditReport, HarnessError> {
    cfg.validate()?;
    let eps = cfg.audit.epsilon;
    let g = &cfg.grid;
    let (coarse, fine) = rayon::join(
        || audit_leg(cfg, eps, g.nx, g.nv, g.dt_max),
        || audit_leg(cfg, eps, 2 * g.nx, 2 * g.nv, 0.5 * g.dt_max),
    );
    let (coarse, fine) = (coarse?, fine?);
    let tolerance = cfg.audit.relative_tolerance * coarse.beta_d1_0;
    let refinement_ratio = coarse.sup_residual / fine.sup_residual;
    Ok(AuditReport {
        epsilon: eps,
        within_tolerance: coarse.sup_residual <= tolerance,
        converging: refinement_ratio >= cfg.audit.min_refinement_ratio,
        coarse,
        fine,
        tolerance,
        refinement_ratio,
    })
}

/// Writes the residual series of both legs and `audit.json`.
pub fn emit_audit(report: &AuditReport, out_dir: &std::path::Path) -> Result<Vec<String>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for leg in [&report.coarse, &report.fine] {
        let name = format!("audit_residual_{}x{}.csv", leg.nx, leg.nv);
        let mut body = String::from("t,residual\n");
        for (t, r) in &leg.residual {
            body.push_str(&format!("{t:e},{r:e}\n"));
        }
        write_atomic(&out_dir.join(&name), body.as_bytes())?;
        files.push(name);
    }
    write_atomic(&out_dir.join("audit.json"), serde_json::to_string_pretty(report)?.as_bytes())?;
    files.push("audit.json".to_string());
    Ok(files)
}
