use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::{write_atomic, RowRecord, RunManifest, SweepRow};
use super::HarnessError;
use crate::aggregation::{aggregation_velocity, run_aggregation};
use crate::functionals::{
    bound_overdamped, bound_prop_main, energy_identity_residual, initial_discrepancy, relative_entropy, EnergyReport,
    OverdampedInputs, PropMainInputs,
};
use crate::hydro::{hydro_energies, lipschitz_estimate, run_hydro, HydroRunSummary, LipschitzRecord, ParticleRunOptions};
use crate::kinetic::{init_kinetic, run_kinetic, KineticRunOptions, KineticRunSummary, KineticState, PhaseGrid, ScalingParams};
use crate::particles::ParticleEnsemble;
use crate::potentials::{check_hypothesis, convolve_grad_unchecked, ConfinementSpec, InteractionKernel};
use crate::schedule::uniform_times;
use crate::transport::{w2_squared_1d, DensityProfile, Measure1D};

/// Trapezoid rule over samples `(t_k, y_k)`.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Repeats the last entry when coincident sample times were observed once.
fn pad_to<T: Clone>(v: &mut Vec<T>, n: usize) {
    while let (true, Some(last)) = (v.len() < n, v.last().cloned()) {
        v.push(last);
    }
}

/// Potentials, initial data and the aggregation reference shared by all rows.
pub struct Benchmark {
    pub spec: ConfinementSpec,
    pub kernel: InteractionKernel,
    pub sample_times: Vec<f64>,
    /// Initial particles carrying `u0 = -kappa (V' + W' * rho0)`.
    pub initial: ParticleEnsemble,
    /// `sup |u0'|` estimated on the initial particles.
    pub initial_gradient: f64,
    /// Aggregation solution at each sample time.
    pub aggregation: Vec<ParticleEnsemble>,
}

impl Benchmark {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let spec = cfg.potentials.confinement();
        let kernel = cfg.potentials.kernel.build()?;
        let sample_times = cfg.sample_times();
        let g = &cfg.grid;
        let grid0 = cfg.initial.to_grid(g.x_min, g.x_max, g.nx)?;
        let cell_masses: Vec<f64> = grid0.values().iter().map(|r| r * grid0.dx()).collect();
        let refine = cfg.particles.n.div_ceil(g.nx);
        let mut initial = ParticleEnsemble::from_grid_cells(g.x_min, grid0.dx(), &cell_masses, refine, |_| 0.0)?;
        let u0 = aggregation_velocity(&initial, cfg.kappa, &spec, &kernel, &initial.positions);
        initial.velocities = Some(u0);
        let initial_gradient = lipschitz_estimate(&initial)?;
        let mut agg = initial.clone();
        agg.velocities = None;
        let mut aggregation = Vec::with_capacity(sample_times.len());
        let opts = ParticleRunOptions { dt_max: cfg.particles.aggregation_dt_max, sample_times: sample_times.clone(), integrator: cfg.particles.integrator };
        run_aggregation::<HarnessError, _>(&mut agg, cfg.kappa, &spec, &kernel, cfg.t_final, &opts, |e| {
            aggregation.push(e.clone());
            Ok(())
        })?;
        pad_to(&mut aggregation, sample_times.len());
        Ok(Self { spec, kernel, sample_times, initial, initial_gradient, aggregation })
    }

    /// Hydrodynamic run with damping `gamma` from the shared initial data.
    pub fn hydro_leg(&self, cfg: &ExperimentConfig, gamma: f64) -> Result<HydroLeg, HarnessError> {
        let mut ens = self.initial.clone();
        let opts = ParticleRunOptions { dt_max: cfg.particles.hydro_dt_max, sample_times: self.sample_times.clone(), integrator: cfg.particles.integrator };
        let mut snapshots = Vec::with_capacity(self.sample_times.len());
        let mut lipschitz = Vec::with_capacity(self.sample_times.len());
        let summary = run_hydro::<HarnessError, _>(&mut ens, gamma, cfg.kappa, &self.spec, &self.kernel, cfg.t_final, &opts, |e| {
            lipschitz.push(LipschitzRecord::new(e.t, lipschitz_estimate(e)?, self.initial_gradient));
            snapshots.push(e.clone());
            Ok(())
        })?;
        pad_to(&mut snapshots, self.sample_times.len());
        pad_to(&mut lipschitz, self.sample_times.len());
        Ok(HydroLeg { snapshots, lipschitz, summary })
    }
}

pub struct HydroLeg {
    pub snapshots: Vec<ParticleEnsemble>,
    pub lipschitz: Vec<LipschitzRecord>,
    pub summary: HydroRunSummary,
}

impl HydroLeg {
    pub fn lipschitz_ok(&self) -> bool {
        self.lipschitz.iter().all(|r| r.within_bound)
    }

    pub fn max_gradient(&self) -> f64 {
        self.lipschitz.iter().map(|r| r.grad_u_sup_estimate).fold(0.0, f64::max)
    }
}

/// Kinetic grid, parameters and near-monokinetic initial state for one `epsilon`.
pub struct KineticSetup {
    pub grid: PhaseGrid,
    pub params: ScalingParams,
    pub theta: f64,
    pub u0_sup: f64,
    pub state: KineticState,
}

pub fn kinetic_setup(cfg: &ExperimentConfig, epsilon: f64, nx: usize, nv: usize, spec: &ConfinementSpec, kernel: &InteractionKernel) -> Result<KineticSetup, HarnessError> {
    let g = &cfg.grid;
    let rho0: DensityProfile = cfg.initial.to_grid(g.x_min, g.x_max, nx)?;
    let kappa = cfg.kappa;
    let u0 = |x: f64| -kappa * (spec.grad(x) + convolve_grad_unchecked(kernel, &rho0, &[x])[0]);
    let peak = rho0.values().iter().copied().fold(0.0, f64::max);
    let u0_sup = (0..nx)
        .filter(|&i| rho0.values()[i] > 1e-12 * peak)
        .map(|i| u0(rho0.center(i)).abs())
        .fold(0.0, f64::max);
    let theta = cfg.theta.theta(epsilon);
    let half = g.v_half_width.unwrap_or(u0_sup + g.v_width_thetas * theta);
    let grid = PhaseGrid::new(g.x_min, g.x_max, -half, half, nx, nv)?;
    let zeta_scale = if u0_sup > 0.0 { u0_sup } else { theta };
    let params = ScalingParams::from_epsilon(epsilon, kappa, cfg.regularization.delta, cfg.regularization.zeta_factor * zeta_scale)?;
    let state = init_kinetic(&cfg.initial, u0, theta, &grid)?;
    Ok(KineticSetup { grid, params, theta, u0_sup, state })
}

/// Equal steps with every sample time on the step lattice: returns the step
/// count between consecutive samples.
fn steps_per_interval(t_final: f64, intervals: usize, dt_limit: f64) -> usize {
    if t_final == 0.0 {
        return 1;
    }
    let h = t_final / intervals as f64;
    (h / dt_limit * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Diagnostics of one kinetic run recorded at every step.
pub struct KineticTrace {
    pub energies: Vec<EnergyReport>,
    pub summary: KineticRunSummary,
    pub dt: f64,
}

impl KineticTrace {
    pub fn sup_residual(&self, params: &ScalingParams) -> Result<f64, HarnessError> {
        if self.energies.len() < 3 {
            return Ok(0.0);
        }
        let r = energy_identity_residual(&self.energies, params.beta, params.gamma)?;
        Ok(r.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max))
    }

    pub fn integrated_d1(&self) -> f64 {
        let t: Vec<f64> = self.energies.iter().map(|e| e.t).collect();
        let d1: Vec<f64> = self.energies.iter().map(|e| e.d1).collect();
        trapezoid(&t, &d1)
    }
}

/// Runs the kinetic solver with energies at every step and `on_sample` at
/// each of the `intervals + 1` sample times.
pub fn kinetic_leg(
    setup: &mut KineticSetup,
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    t_final: f64,
    intervals: usize,
    dt_max: f64,
    cfl: f64,
    mut on_sample: impl FnMut(usize, &KineticState, &crate::kinetic::MomentSet) -> Result<(), HarnessError>,
) -> Result<KineticTrace, HarnessError> {
    let dt_limit = dt_max.min(setup.grid.cfl_dt(cfl));
    let per = steps_per_interval(t_final, intervals, dt_limit);
    let total = if t_final == 0.0 { 0 } else { per * intervals };
    let times = if total == 0 { vec![0.0] } else { uniform_times(0.0, t_final, total) };
    let dt = if total == 0 { 0.0 } else { t_final / total as f64 };
    let opts = KineticRunOptions { dt_max: dt_limit, cfl, sample_times: times };
    let mut energies = Vec::with_capacity(total + 1);
    let mut k = 0usize;
    let summary = run_kinetic::<HarnessError, _>(&mut setup.state, &setup.params, spec, kernel, t_final, &opts, |s, mo, e| {
        energies.push(*e);
        if k % per == 0 {
            on_sample(k / per, s, mo)?;
        }
        k += 1;
        Ok(())
    })?;
    if t_final == 0.0 {
        // every sample coincides with t = 0
        for idx in 1..=intervals {
            let mo = crate::kinetic::moments(&setup.state, &setup.params);
            on_sample(idx, &setup.state, &mo)?;
        }
    }
    Ok(KineticTrace { energies, summary, dt })
}

/// One sample of an epsilon-sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSample {
    pub t: f64,
    /// `W_2^2` between kinetic and aggregation densities.
    pub w2sq_kin_agg: f64,
    pub w2sq_kin_hydro: f64,
    pub w2sq_hydro_agg: f64,
    pub h_integral: f64,
    pub f_total: f64,
    pub d1: f64,
    pub d2: f64,
    pub lipschitz: f64,
}

pub struct EpsilonOutcome {
    pub row: SweepRow,
    pub record: RowRecord,
    pub samples: Vec<EpsilonSample>,
}

fn series_csv(samples: &[EpsilonSample]) -> String {
    let mut out = String::from("t,w2sq_kin_agg,w2sq_kin_hydro,w2sq_hydro_agg,H,F,D1,D2,lipschitz\n");
    for s in samples {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            s.t, s.w2sq_kin_agg, s.w2sq_kin_hydro, s.w2sq_hydro_agg, s.h_integral, s.f_total, s.d1, s.d2, s.lipschitz
        ));
    }
    out
}

/// Kinetic, hydrodynamic and aggregation legs for one `epsilon`.
pub fn epsilon_row(cfg: &ExperimentConfig, bench: &Benchmark, epsilon: f64) -> Result<EpsilonOutcome, HarnessError> {
    let clock = Instant::now();
    let mut setup = kinetic_setup(cfg, epsilon, cfg.grid.nx, cfg.grid.nv, &bench.spec, &bench.kernel)?;
    let params = setup.params;
    let hydro = bench.hydro_leg(cfg, params.gamma)?;
    let n_quad = cfg.particles.n_quad;
    let i_0 = initial_discrepancy(&setup.state, &bench.initial, params.delta)?;
    let kin0 = setup.state.clone();
    let mut samples: Vec<EpsilonSample> = Vec::with_capacity(bench.sample_times.len());
    let intervals = bench.sample_times.len() - 1;
    let trace = kinetic_leg(&mut setup, &bench.spec, &bench.kernel, cfg.t_final, intervals, cfg.grid.dt_max, cfg.grid.cfl, |idx, s, mo| {
        let density = mo.density();
        let kin = Measure1D::Density(&density);
        let (h_ens, a_ens) = (&hydro.snapshots[idx], &bench.aggregation[idx]);
        let energy = crate::functionals::free_energy(s, params.lambda, &bench.spec, &bench.kernel);
        samples.push(EpsilonSample {
            t: bench.sample_times[idx],
            w2sq_kin_agg: w2_squared_1d(kin, a_ens.measure(), n_quad),
            w2sq_kin_hydro: w2_squared_1d(kin, h_ens.measure(), n_quad),
            w2sq_hydro_agg: w2_squared_1d(h_ens.measure(), a_ens.measure(), n_quad),
            h_integral: relative_entropy(mo, h_ens)?.h_integral,
            f_total: energy.f_total,
            d1: energy.d1,
            d2: energy.d2,
            lipschitz: hydro.lipschitz[idx].grad_u_sup_estimate,
        });
        Ok(())
    })?;
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let w2: Vec<f64> = samples.iter().map(|s| s.w2sq_kin_agg).collect();
    let int_w2sq = trapezoid(&t, &w2);
    let sup_w2sq = w2.iter().copied().fold(0.0, f64::max);
    let energy_residual = trace.sup_residual(&params)?;
    let lipschitz_ok = hydro.lipschitz_ok();
    let wall = clock.elapsed().as_secs_f64();

    let sup_kh = samples.iter().map(|s| s.w2sq_kin_hydro).fold(0.0, f64::max);
    let int_of = |pick: fn(&EpsilonSample) -> f64| trapezoid(&t, &samples.iter().map(pick).collect::<Vec<_>>());
    let int_kh = int_of(|s| s.w2sq_kin_hydro);
    let int_ha = int_of(|s| s.w2sq_hydro_agg);
    let inputs = PropMainInputs {
        w2sq_0: samples[0].w2sq_kin_hydro,
        i_0,
        c_u: hydro.max_gradient(),
        gamma: params.gamma,
        lambda: params.lambda,
        epsilon,
        c_cal: cfg.c_cal,
    };
    let (bound, bound_note) = match bound_prop_main(&inputs, sup_kh) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let triangle_ok = samples
        .iter()
        .all(|s| s.w2sq_kin_agg.sqrt() <= s.w2sq_kin_hydro.sqrt() + s.w2sq_hydro_agg.sqrt() + 1e-9);
    let extras = BTreeMap::from([
        ("gamma".to_string(), params.gamma),
        ("lambda".to_string(), params.lambda),
        ("beta".to_string(), params.beta),
        ("theta".to_string(), setup.theta),
        ("zeta".to_string(), params.zeta),
        ("v_half_width".to_string(), setup.grid.v_max),
        ("dt".to_string(), trace.dt),
        ("steps".to_string(), trace.summary.steps as f64),
        ("initial_free_energy".to_string(), trace.energies.first().map_or(0.0, |e| e.f_total)),
        ("integrated_d1".to_string(), trace.integrated_d1()),
        ("initial_discrepancy".to_string(), i_0),
        ("initial_h".to_string(), samples[0].h_integral),
        ("max_boundary_mass".to_string(), trace.summary.max_boundary_mass),
        ("velocity_overflow".to_string(), trace.summary.total_velocity_overflow),
        ("max_renormalization_deviation".to_string(), trace.summary.max_renormalization_deviation),
        ("initial_mass_error".to_string(), (kin0.mass() - 1.0).abs()),
        ("triangle_ok".to_string(), f64::from(u8::from(triangle_ok))),
        ("hydro_min_gap".to_string(), hydro.summary.min_gap),
        ("int_w2sq_kin_hydro".to_string(), int_kh),
        ("int_w2sq_hydro_agg".to_string(), int_ha),
    ]);
    let row = SweepRow {
        param: epsilon,
        int_w2sq,
        sup_w2sq,
        final_h: samples.last().map_or(0.0, |s| s.h_integral),
        energy_residual,
        lipschitz_ok,
        wall_time_s: if cfg.record_wall_time { wall } else { 0.0 },
    };
    let record = RowRecord { param: epsilon, series_file: None, bound, bound_note, collision: hydro.summary.collision, wall_time_s: wall, extras };
    Ok(EpsilonOutcome { row, record, samples })
}

fn collect_rows(
    params: &[f64],
    label: &str,
    out_dir: &Path,
    manifest: &mut RunManifest,
    run: impl Fn(f64) -> Result<(SweepRow, RowRecord, String), HarnessError> + Sync,
) -> Result<Vec<SweepRow>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let results: Vec<Result<(SweepRow, RowRecord, String), HarnessError>> = params.par_iter().map(|&p| run(p)).collect();
    let mut rows = Vec::new();
    for (p, res) in params.iter().zip(results) {
        match res {
            Ok((row, mut record, series)) => {
                let name = format!("series_{label}_{p:e}.csv");
                write_atomic(&out_dir.join(&name), series.as_bytes())?;
                record.series_file = Some(name.clone());
                manifest.files.push(name);
                manifest.rows.push(record);
                rows.push(row);
            }
            Err(e) => manifest.failures.push(format!("{label} = {p:e}: {e}")),
        }
    }
    Ok(rows)
}

/// Kinetic versus aggregation distances over the epsilon list. Per-row time
/// series are written into `cfg.output_dir`; failed rows are listed in
/// `manifest.failures`.
pub fn run_epsilon_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, RunManifest), HarnessError> {
    let clock = Instant::now();
    cfg.validate()?;
    let bench = Benchmark::new(cfg)?;
    let mut manifest = RunManifest::new("epsilon-sweep", cfg);
    let rows = collect_rows(&cfg.epsilons, "eps", &cfg.output_dir, &mut manifest, |eps| {
        let out = epsilon_row(cfg, &bench, eps)?;
        Ok((out.row, out.record, series_csv(&out.samples)))
    })?;
    if rows.len() >= 3 {
        manifest.rate = super::rate::fit_rate(&rows, "param", "int_w2sq").ok();
    }
    manifest.notes.push("int_w2sq integrates W2^2 between the kinetic and aggregation densities".into());
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    Ok((rows, manifest))
}

/// One sample of a gamma-sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSample {
    pub t: f64,
    pub w2sq: f64,
    pub lipschitz: f64,
}

pub struct GammaOutcome {
    pub row: SweepRow,
    pub record: RowRecord,
    pub samples: Vec<GammaSample>,
}

/// `c_W` from the hypothesis check; errors unless the confinement hypothesis
/// holds and the overdamped bound applies to every listed `gamma`.
pub fn overdamped_cw(cfg: &ExperimentConfig, spec: &ConfinementSpec, kernel: &InteractionKernel) -> Result<f64, HarnessError> {
    let hyp = check_hypothesis(spec, kernel, cfg.cw_radius, cfg.cw_pairs)?;
    if !hyp.h_satisfied {
        return Err(HarnessError::HypothesisViolated(format!("c_V + c_W = {} is not positive", hyp.margin)));
    }
    if !(hyp.c_w_estimate > 0.0) {
        return Err(HarnessError::HypothesisViolated(format!("c_W = {} is not positive", hyp.c_w_estimate)));
    }
    if let Some(g) = cfg.gammas.iter().find(|&&g| 2.0 * hyp.c_w_estimate * g - 1.0 <= 0.0) {
        return Err(HarnessError::HypothesisViolated(format!("2 c_W gamma - 1 <= 0 at gamma = {g}")));
    }
    Ok(hyp.c_w_estimate)
}

pub fn gamma_row(cfg: &ExperimentConfig, bench: &Benchmark, gamma: f64, c_w: f64) -> Result<GammaOutcome, HarnessError> {
    let clock = Instant::now();
    let hydro = bench.hydro_leg(cfg, gamma)?;
    let n_quad = cfg.particles.n_quad;
    let samples: Vec<GammaSample> = bench
        .sample_times
        .iter()
        .enumerate()
        .map(|(k, &t)| GammaSample {
            t,
            w2sq: w2_squared_1d(hydro.snapshots[k].measure(), bench.aggregation[k].measure(), n_quad),
            lipschitz: hydro.lipschitz[k].grad_u_sup_estimate,
        })
        .collect();
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let w2: Vec<f64> = samples.iter().map(|s| s.w2sq).collect();
    let lhs = trapezoid(&t, &w2);

    // initial data of both systems
    let hydro0 = &bench.initial;
    let agg0 = &bench.initial;
    let (e1_g, e2_g) = hydro_energies(hydro0, &bench.spec, &bench.kernel);
    let (e1_l, e2_l) = hydro_energies(agg0, &bench.spec, &bench.kernel);
    let u_h = hydro0.velocities_or_zero();
    let u_l = agg0.velocities_or_zero();
    let u_mismatch_0: f64 = hydro0.masses.iter().zip(u_h.iter().zip(&u_l)).map(|(m, (a, b))| m * (a - b) * (a - b)).sum();
    let inputs = OverdampedInputs {
        e1_0_limit: e1_l,
        e1_0_gamma: e1_g,
        e2_0_limit: e2_l,
        e2_0_gamma: e2_g,
        w2sq_0: w2_squared_1d(hydro0.measure(), agg0.measure(), n_quad),
        u_mismatch_0,
        gamma,
        c_w,
    };
    let bound = bound_overdamped(&inputs, lhs)?;

    let last = hydro.snapshots.last().expect("at least one sample");
    let agg_last = bench.aggregation.last().expect("at least one sample");
    let u_agg = aggregation_velocity(agg_last, cfg.kappa, &bench.spec, &bench.kernel, &last.positions);
    let final_h = 0.5 * last.masses.iter().zip(last.velocities_or_zero().iter().zip(&u_agg)).map(|(m, (u, a))| m * (u - a) * (u - a)).sum::<f64>();
    let wall = clock.elapsed().as_secs_f64();
    let extras = BTreeMap::from([
        ("c_w".to_string(), c_w),
        ("initial_gradient_bound".to_string(), bench.initial_gradient + 1.0),
        ("max_gradient".to_string(), hydro.max_gradient()),
        ("hydro_steps".to_string(), hydro.summary.steps as f64),
        ("hydro_min_gap".to_string(), hydro.summary.min_gap),
    ]);
    let row = SweepRow {
        param: gamma,
        int_w2sq: lhs,
        sup_w2sq: w2.iter().copied().fold(0.0, f64::max),
        final_h,
        energy_residual: 0.0,
        lipschitz_ok: hydro.lipschitz_ok(),
        wall_time_s: if cfg.record_wall_time { wall } else { 0.0 },
    };
    let record = RowRecord { param: gamma, series_file: None, bound: Some(bound), bound_note: None, collision: hydro.summary.collision, wall_time_s: wall, extras };
    Ok(GammaOutcome { row, record, samples })
}

fn gamma_series_csv(samples: &[GammaSample]) -> String {
    let mut out = String::from("t,w2sq_hydro_agg,lipschitz\n");
    for s in samples {
        out.push_str(&format!("{:e},{:e},{:e}\n", s.t, s.w2sq, s.lipschitz));
    }
    out
}

/// Hydrodynamic versus aggregation distances over the gamma list, with the
/// overdamped bound evaluated on each row.
pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, RunManifest), HarnessError> {
    let clock = Instant::now();
    cfg.validate()?;
    let spec = cfg.potentials.confinement();
    let kernel = cfg.potentials.kernel.build()?;
    let c_w = overdamped_cw(cfg, &spec, &kernel)?;
    let bench = Benchmark::new(cfg)?;
    let mut manifest = RunManifest::new("gamma-sweep", cfg);
    let rows = collect_rows(&cfg.gammas, "gamma", &cfg.output_dir, &mut manifest, |g| {
        let out = gamma_row(cfg, &bench, g, c_w)?;
        Ok((out.row, out.record, gamma_series_csv(&out.samples)))
    })?;
    manifest.notes.push("int_w2sq integrates W2^2 between the hydrodynamic and aggregation densities".into());
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    Ok((rows, manifest))
}
