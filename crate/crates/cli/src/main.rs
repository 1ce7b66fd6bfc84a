use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarm_limits::harness::{
    emit, emit_audit, fit_rate, parse_rows, run_energy_audit, run_epsilon_sweep, run_gamma_sweep, with_threads, write_atomic,
    ExperimentConfig, HarnessError, RunManifest, SweepRow, EXIT_OK, EXIT_SOLVER,
};

#[derive(Parser)]
#[command(name = "swarm-limits", version, about = "Large-friction limit experiments for kinetic swarming models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults reproduce the standard benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Dotted `key=value` overrides applied on top of the file, e.g. `grid.nx=128`.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Kinetic vs aggregation distances over the epsilon list.
    EpsilonSweep,
    /// Hydrodynamic vs aggregation distances and bounds over the gamma list.
    GammaSweep,
    /// Energy-identity residual and its refinement ratio.
    EnergyAudit,
    /// Log-log least squares over an existing rows.csv.
    RateFit {
        /// Rows file; defaults to `<out>/rows.csv`.
        #[arg(long)]
        rows: Option<PathBuf>,
        #[arg(long, default_value = "param")]
        x_field: String,
        #[arg(long, default_value = "int_w2sq")]
        y_field: String,
    },
}

fn finish_sweep(result: Result<(Vec<SweepRow>, RunManifest), HarnessError>, out: &Path) -> Result<(), HarnessError> {
    let (rows, manifest) = result?;
    emit(&rows, &manifest, out)?;
    for r in &rows {
        println!("{:e}\tint_w2sq={:e}\tsup_w2sq={:e}\tfinal_H={:e}\tlipschitz_ok={}", r.param, r.int_w2sq, r.sup_w2sq, r.final_h, r.lipschitz_ok);
    }
    if let Some(rate) = &manifest.rate {
        println!("fitted slope {:.4} (r^2 = {:.4})", rate.slope, rate.r_squared);
    }
    if !manifest.failures.is_empty() {
        return Err(HarnessError::RowsFailed(manifest.failures.join("; ")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::load(cli.common.config.as_deref(), &cli.common.overrides)?;
    if let Some(out) = &cli.common.out {
        cfg.output_dir = out.clone();
    }
    let out = cfg.output_dir.clone();
    with_threads(cli.common.threads, || -> Result<(), HarnessError> {
        match cli.command {
            Command::EpsilonSweep => finish_sweep(run_epsilon_sweep(&cfg), &out),
            Command::GammaSweep => finish_sweep(run_gamma_sweep(&cfg), &out),
            Command::EnergyAudit => {
                let report = run_energy_audit(&cfg)?;
                emit_audit(&report, &out)?;
                println!(
                    "sup|r| = {:e} at {}x{} (tolerance {:e}); {:e} at {}x{}; ratio {:.3}",
                    report.coarse.sup_residual,
                    report.coarse.nx,
                    report.coarse.nv,
                    report.tolerance,
                    report.fine.sup_residual,
                    report.fine.nx,
                    report.fine.nv,
                    report.refinement_ratio
                );
                Ok(())
            }
            Command::RateFit { rows, x_field, y_field } => {
                let path = rows.unwrap_or_else(|| out.join("rows.csv"));
                let parsed = parse_rows(&std::fs::read_to_string(&path)?)?;
                let fit = fit_rate(&parsed, &x_field, &y_field)?;
                std::fs::create_dir_all(&out)?;
                write_atomic(&out.join("rate.json"), serde_json::to_string_pretty(&fit)?.as_bytes())?;
                println!("slope {:.6} intercept {:.6} r^2 {:.6}", fit.slope, fit.intercept, fit.r_squared);
                Ok(())
            }
        }
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(if code == 0 { EXIT_SOLVER as u8 } else { code as u8 })
        }
    }
}
