use swarm_limits::harness::{
    emit, fit_rate, parse_rows, run_epsilon_sweep, run_gamma_sweep, ExperimentConfig, HarnessError, RunManifest, ROWS_HEADER,
};

fn small(dir: &tempfile::TempDir, extra: &[&str]) -> ExperimentConfig {
    let mut overrides: Vec<String> = [
        "t_final=0.1",
        "samples=5",
        "epsilons=[0.2, 0.1]",
        "gammas=[5.0, 20.0]",
        "grid.nx=64",
        "grid.nv=48",
        "grid.dt_max=5e-4",
        "particles.n=200",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    overrides.extend(extra.iter().map(|s| s.to_string()));
    let mut cfg = ExperimentConfig::from_toml_str("", &overrides).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    cfg
}

#[test]
fn epsilon_sweep_writes_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir, &[]);
    let (rows, manifest) = run_epsilon_sweep(&cfg).unwrap();
    assert!(manifest.failures.is_empty(), "{:?}", manifest.failures);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r.int_w2sq.is_finite() && r.int_w2sq >= 0.0);
        assert!(r.sup_w2sq >= 0.0 && r.final_h >= 0.0);
        assert!(r.sup_w2sq * cfg.t_final >= r.int_w2sq * (1.0 - 1e-12));
        assert_eq!(r.wall_time_s, 0.0);
    }
    emit(&rows, &manifest, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(ROWS_HEADER));
    assert_eq!(parse_rows(&text).unwrap(), rows);
    let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(back.rows.len(), 2);
    for f in &back.files {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn gamma_sweep_reports_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, manifest) = run_gamma_sweep(&small(&dir, &[])).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &manifest.rows {
        let b = r.bound.as_ref().expect("bound evaluated");
        assert!(b.lhs >= 0.0 && b.rhs > 0.0);
    }
    assert!(rows.iter().all(|r| r.lipschitz_ok));
}

#[test]
fn sweeps_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (rows_a, _) = run_epsilon_sweep(&small(&a, &[])).unwrap();
    let (rows_b, _) = run_epsilon_sweep(&small(&b, &[])).unwrap();
    assert_eq!(rows_a, rows_b);
}

#[test]
fn zero_horizon_gives_zero_integrals() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, manifest) = run_gamma_sweep(&small(&dir, &["t_final=0.0"])).unwrap();
    assert!(manifest.failures.is_empty());
    assert!(rows.iter().all(|r| r.int_w2sq == 0.0));
}

#[test]
fn rate_fit_reads_emitted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir, &["epsilons=[0.2, 0.1, 0.05]"]);
    let (rows, manifest) = run_epsilon_sweep(&cfg).unwrap();
    emit(&rows, &manifest, dir.path()).unwrap();
    let parsed = parse_rows(&std::fs::read_to_string(dir.path().join("rows.csv")).unwrap()).unwrap();
    let fit = fit_rate(&parsed, "param", "int_w2sq").unwrap();
    assert_eq!(Some(fit), manifest.rate);
    assert!(matches!(fit_rate(&parsed, "param", "nope"), Err(HarnessError::Config(_))));
}

#[test]
fn bad_configurations_map_to_usage_errors() {
    for o in ["kappa=-1.0", "epsilons=[]", "samples=1", "t_final=-0.5", "potentials.kernel.kind=\"cubic\""] {
        let err = ExperimentConfig::from_toml_str("", &[o.to_string()]).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{o}: {err}");
    }
    assert!(ExperimentConfig::from_toml_str("t_final = [", &[]).is_err());
}
