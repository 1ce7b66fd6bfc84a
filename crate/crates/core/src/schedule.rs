//! Fixed-schedule time stepping shared by all solvers.

/// Anything with a simulation clock.
pub trait Clocked {
    fn time(&self) -> f64;
    fn set_time(&mut self, t: f64);
}

/// `n + 1` equispaced times on `[t0, t_end]`.
pub fn uniform_times(t0: f64, t_end: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![t0];
    }
    let h = (t_end - t0) / n as f64;
    (0..=n).map(|k| if k == n { t_end } else { t0 + h * k as f64 }).collect()
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Advances `state` to `t_end`, landing exactly on every sample time in
/// `[state.time(), t_end]` and calling `observe` there.
///
/// Each interval between consecutive stops is split into equal substeps no
/// larger than `dt_limit(state)` evaluated at the start of the interval.
pub fn drive<S, E>(
    state: &mut S,
    t_end: f64,
    sample_times: &[f64],
    mut dt_limit: impl FnMut(&S) -> f64,
    mut step: impl FnMut(&mut S, f64) -> Result<(), E>,
    mut observe: impl FnMut(&S) -> Result<(), E>,
) -> Result<(), E>
where
    S: Clocked,
{
    let t0 = state.time();
    let mut stops: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&s| (s > t0 || same_time(s, t0)) && (s < t_end || same_time(s, t_end)))
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| same_time(*a, *b));

    let mut next = 0;
    if next < stops.len() && same_time(stops[next], t0) {
        observe(state)?;
        next += 1;
    }
    while state.time() < t_end && !same_time(state.time(), t_end) {
        let target = if next < stops.len() { stops[next] } else { t_end };
        let span = target - state.time();
        let limit = dt_limit(state);
        assert!(limit > 0.0, "time step limit must be positive");
        let substeps = (span / limit * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = span / substeps as f64;
        for _ in 0..substeps {
            step(state, dt)?;
        }
        state.set_time(target);
        if next < stops.len() {
            observe(state)?;
            next += 1;
        }
    }
    Ok(())
}
