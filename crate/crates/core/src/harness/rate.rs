use serde::{Deserialize, Serialize};

use super::output::SweepRow;
use super::HarnessError;

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_log_log(x: &[f64], y: &[f64]) -> Result<RateFit, HarnessError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(HarnessError::NonPositiveData(format!("need at least three points, got {}", x.len().min(y.len()))));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(HarnessError::NonPositiveData("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::NonPositiveData("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept, r_squared })
}

/// Fits `log y_field` against `log x_field` over the rows.
pub fn fit_rate(rows: &[SweepRow], x_field: &str, y_field: &str) -> Result<RateFit, HarnessError> {
    let pick = |name: &str| -> Result<Vec<f64>, HarnessError> {
        rows.iter()
            .map(|r| r.field(name).ok_or_else(|| HarnessError::Config(format!("unknown column '{name}'"))))
            .collect()
    };
    fit_log_log(&pick(x_field)?, &pick(y_field)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(f: impl Fn(f64) -> f64) -> Vec<SweepRow> {
        [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&e| SweepRow { param: e, int_w2sq: f(e), sup_w2sq: 0.0, final_h: 0.0, energy_residual: 0.0, lipschitz_ok: true, wall_time_s: 0.0 })
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let lin = fit_rate(&rows(|e| 3.0 * e), "param", "int_w2sq").unwrap();
        assert!((lin.slope - 1.0).abs() < 1e-12);
        assert!((lin.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!((lin.r_squared - 1.0).abs() < 1e-12);
        let quad = fit_rate(&rows(|e| e * e), "param", "int_w2sq").unwrap();
        assert!((quad.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(matches!(fit_rate(&rows(|_| 0.0), "param", "int_w2sq"), Err(HarnessError::NonPositiveData(_))));
        assert!(matches!(fit_rate(&rows(|e| e)[..2], "param", "int_w2sq"), Err(HarnessError::NonPositiveData(_))));
        assert!(fit_rate(&rows(|e| e), "param", "nope").is_err());
    }
}
