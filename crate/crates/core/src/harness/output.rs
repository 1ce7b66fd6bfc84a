use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::rate::RateFit;
use super::HarnessError;
use crate::functionals::BoundReport;

/// Fixed header of `rows.csv`.
pub const ROWS_HEADER: &str = "param,int_w2sq,sup_w2sq,final_H,energy_residual,lipschitz_ok,wall_time_s";
/// Bumped whenever the CSV layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// One experiment record of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `epsilon` or `gamma`.
    pub param: f64,
    /// `int_0^T W_2^2 dt` by the trapezoid rule over the sample times.
    pub int_w2sq: f64,
    pub sup_w2sq: f64,
    /// Relative entropy at the final time.
    pub final_h: f64,
    /// `sup |r|` of the energy-identity residual.
    pub energy_residual: f64,
    pub lipschitz_ok: bool,
    pub wall_time_s: f64,
}

impl SweepRow {
    pub fn field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "param" => self.param,
            "int_w2sq" => self.int_w2sq,
            "sup_w2sq" => self.sup_w2sq,
            "final_H" => self.final_h,
            "energy_residual" => self.energy_residual,
            "lipschitz_ok" => f64::from(u8::from(self.lipschitz_ok)),
            "wall_time_s" => self.wall_time_s,
            _ => return None,
        })
    }
}

/// Per-row provenance kept in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub param: f64,
    pub series_file: Option<String>,
    pub bound: Option<BoundReport>,
    /// Why no bound was evaluated, if so.
    pub bound_note: Option<String>,
    pub collision: bool,
    pub wall_time_s: f64,
    pub extras: BTreeMap<String, f64>,
}

/// Everything needed to reproduce and audit one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub csv_header: String,
    pub code_version: String,
    pub command: String,
    pub config: ExperimentConfig,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub rows: Vec<RowRecord>,
    pub rate: Option<RateFit>,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            csv_header: ROWS_HEADER.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            files: Vec::new(),
            rows: Vec::new(),
            rate: None,
            failures: Vec::new(),
            notes: Vec::new(),
            wall_time_s: 0.0,
        }
    }
}

/// Writes through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(ROWS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{},{:e}\n",
            r.param, r.int_w2sq, r.sup_w2sq, r.final_h, r.energy_residual, r.lipschitz_ok, r.wall_time_s
        ));
    }
    out
}

pub fn parse_rows(text: &str) -> Result<Vec<SweepRow>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != ROWS_HEADER {
        return Err(HarnessError::Config(format!("unexpected rows header '{}'", header.join(","))));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| HarnessError::Config(format!("bad number '{s}': {e}")));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let lipschitz_ok = match rec[5].trim() {
            "true" => true,
            "false" => false,
            other => return Err(HarnessError::Config(format!("bad boolean '{other}'"))),
        };
        rows.push(SweepRow {
            param: num(&rec[0])?,
            int_w2sq: num(&rec[1])?,
            sup_w2sq: num(&rec[2])?,
            final_h: num(&rec[3])?,
            energy_residual: num(&rec[4])?,
            lipschitz_ok,
            wall_time_s: num(&rec[6])?,
        });
    }
    Ok(rows)
}

/// Writes `rows.csv` and then `manifest.json`; returns the written paths.
///
/// Files already listed in the manifest (time series, snapshots) are expected
/// to exist in `out_dir`.
pub fn emit(rows: &[SweepRow], manifest: &RunManifest, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir)?;
    let rows_path = out_dir.join("rows.csv");
    write_atomic(&rows_path, rows_to_csv(rows).as_bytes())?;
    let mut manifest = manifest.clone();
    if !manifest.files.iter().any(|f| f == "rows.csv") {
        manifest.files.insert(0, "rows.csv".to_string());
    }
    for f in &manifest.files {
        if !out_dir.join(f).exists() {
            return Err(HarnessError::Config(format!("manifest references missing file {f}")));
        }
    }
    let manifest_path = out_dir.join("manifest.json");
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    let mut written: Vec<PathBuf> = manifest.files.iter().map(|f| out_dir.join(f)).collect();
    written.push(manifest_path);
    Ok(written)
}
