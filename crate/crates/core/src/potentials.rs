//! Confinement and interaction potentials.
//!
//! The confinement is always harmonic, `V(x) = c_V x^2 / 2`. Interaction
//! kernels are even functions with a globally Lipschitz gradient; three
//! families are provided so that both signs of the convexity modulus `c_W`
//! can be exercised.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pairs closer than this are skipped when estimating `c_W`.
const MIN_PAIR_SEPARATION: f64 = 1e-12;

/// Unit-mass tolerance accepted by [`convolve_grad`].
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("position {x} lies outside the tabulated range [{lo}, {hi}]")]
    TabulatedRangeExceeded { x: f64, lo: f64, hi: f64 },
    #[error("density mass {0} is not 1 within {MASS_TOLERANCE}")]
    MassNotNormalized(f64),
    #[error("pair grid has no pair with distinct points")]
    DegenerateGrid,
    #[error("invalid c_W estimation input: {0}")]
    InvalidEstimateInput(String),
    #[error("invalid kernel table: {0}")]
    InvalidTable(String),
    #[error("failed to read kernel table: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse kernel table: {0}")]
    Csv(#[from] csv::Error),
}

/// Harmonic confinement `V(x) = c_V |x|^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfinementSpec {
    pub c_v: f64,
}

impl ConfinementSpec {
    pub fn new(c_v: f64) -> Self {
        Self { c_v }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        0.5 * self.c_v * x * x
    }

    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        self.c_v * x
    }
}

/// Gradient of the confinement potential at `x`.
pub fn eval_confinement_grad(x: f64, spec: &ConfinementSpec) -> f64 {
    spec.grad(x)
}

/// An even kernel sampled on a symmetric equispaced table.
///
/// The gradient is the piecewise-linear interpolant of central differences of
/// the (symmetrized) samples, and the value is the exact integral of that
/// interpolant, so `value` and `grad` are mutually consistent. Outside the
/// table the gradient is extended by zero and the value is held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    x0: f64,
    spacing: f64,
    /// Gradient at the nodes.
    grad: Vec<f64>,
    /// Value at the nodes, obtained by integrating `grad`.
    value: Vec<f64>,
}

impl KernelTable {
    /// Builds a table from samples `w[k] = W(x0 + k * spacing)`.
    ///
    /// The grid must be symmetric about zero; the samples are replaced by
    /// `(W(x) + W(-x)) / 2`.
    pub fn new(x0: f64, spacing: f64, samples: &[f64]) -> Result<Self, PotentialError> {
        let n = samples.len();
        if n < 3 {
            return Err(PotentialError::InvalidTable(format!("need at least 3 samples, got {n}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(PotentialError::InvalidTable(format!("spacing {spacing} must be positive")));
        }
        let x_last = x0 + spacing * (n - 1) as f64;
        if (x0 + x_last).abs() > 1e-9 * spacing.max(x_last.abs()) {
            return Err(PotentialError::InvalidTable(format!(
                "table [{x0}, {x_last}] is not symmetric about 0"
            )));
        }
        if samples.iter().any(|w| !w.is_finite()) {
            return Err(PotentialError::InvalidTable("non-finite sample".into()));
        }

        let sym: Vec<f64> = (0..n).map(|k| 0.5 * (samples[k] + samples[n - 1 - k])).collect();

        let mut grad = vec![0.0; n];
        grad[0] = (-3.0 * sym[0] + 4.0 * sym[1] - sym[2]) / (2.0 * spacing);
        grad[n - 1] = (3.0 * sym[n - 1] - 4.0 * sym[n - 2] + sym[n - 3]) / (2.0 * spacing);
        for k in 1..n - 1 {
            grad[k] = (sym[k + 1] - sym[k - 1]) / (2.0 * spacing);
        }
        // Enforce exact oddness after rounding.
        for k in 0..n / 2 {
            let g = 0.5 * (grad[k] - grad[n - 1 - k]);
            grad[k] = g;
            grad[n - 1 - k] = -g;
        }
        if n % 2 == 1 {
            grad[n / 2] = 0.0;
        }

        let mut value = vec![0.0; n];
        value[0] = sym[0];
        for k in 1..n {
            value[k] = value[k - 1] + 0.5 * spacing * (grad[k - 1] + grad[k]);
        }
        // Shift so that the table matches the samples in the least-squares sense.
        let shift = sym.iter().zip(&value).map(|(s, v)| s - v).sum::<f64>() / n as f64;
        value.iter_mut().for_each(|v| *v += shift);

        Ok(Self { x0, spacing, grad, value })
    }

    /// Loads a two-column `x, W(x)` CSV with optional header row.
    pub fn from_csv(path: &Path) -> Result<Self, PotentialError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(PotentialError::InvalidTable(format!("row {row} has fewer than 2 columns")));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(w)) => {
                    xs.push(x);
                    ws.push(w);
                }
                _ if row == 0 => continue,
                _ => return Err(PotentialError::InvalidTable(format!("row {row} is not numeric"))),
            }
        }
        if xs.len() < 3 {
            return Err(PotentialError::InvalidTable("fewer than 3 data rows".into()));
        }
        let spacing = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (k, x) in xs.iter().enumerate() {
            let expected = xs[0] + spacing * k as f64;
            if (x - expected).abs() > 1e-6 * spacing {
                return Err(PotentialError::InvalidTable(format!("x column is not equispaced at row {k}")));
            }
        }
        Self::new(xs[0], spacing, &ws)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.spacing * (self.grad.len() - 1) as f64)
    }

    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let s = (x - self.x0) / self.spacing;
        let last = self.grad.len() - 1;
        if !(s >= 0.0) || s > last as f64 {
            return None;
        }
        let k = (s.floor() as usize).min(last - 1);
        Some((k, s - k as f64))
    }

    fn grad_at(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((k, w)) => (1.0 - w) * self.grad[k] + w * self.grad[k + 1],
            None => 0.0,
        }
    }

    fn value_at(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((k, w)) => {
                let h = w * self.spacing;
                let slope = (self.grad[k + 1] - self.grad[k]) / self.spacing;
                self.value[k] + self.grad[k] * h + 0.5 * slope * h * h
            }
            None if x < self.x0 => self.value[0],
            None => self.value[self.value.len() - 1],
        }
    }

    fn hess_sup(&self) -> f64 {
        self.grad
            .windows(2)
            .map(|g| ((g[1] - g[0]) / self.spacing).abs())
            .fold(0.0, f64::max)
    }
}

/// Functional family of the interaction potential.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm {
    /// `W(x) = a |x|^2 / 2`.
    Quadratic { a: f64 },
    /// `W(x) = a exp(-|x|^2 / (2 s^2))`.
    Gaussian { a: f64, s: f64 },
    Tabulated(KernelTable),
}

/// Interaction potential `W` with its gradient and a Lipschitz bound for the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionKernel {
    form: KernelForm,
    lipschitz_grad_bound: f64,
    strict_range: bool,
}

impl InteractionKernel {
    pub fn quadratic(a: f64) -> Self {
        Self { form: KernelForm::Quadratic { a }, lipschitz_grad_bound: a.abs(), strict_range: false }
    }

    pub fn gaussian(a: f64, s: f64) -> Self {
        assert!(s > 0.0, "gaussian kernel width must be positive");
        // |W''| peaks at the origin, where it equals |a| / s^2.
        Self { form: KernelForm::Gaussian { a, s }, lipschitz_grad_bound: a.abs() / (s * s), strict_range: false }
    }

    pub fn tabulated(table: KernelTable) -> Self {
        let bound = table.hess_sup();
        Self { form: KernelForm::Tabulated(table), lipschitz_grad_bound: bound, strict_range: false }
    }

    /// The zero kernel, `W = 0`.
    pub fn zero() -> Self {
        Self::quadratic(0.0)
    }

    /// In strict mode [`eval_kernel_grad`] rejects positions outside a table.
    pub fn with_strict_range(mut self, strict: bool) -> Self {
        self.strict_range = strict;
        self
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn lipschitz_grad_bound(&self) -> f64 {
        self.lipschitz_grad_bound
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.form, KernelForm::Quadratic { a } if a == 0.0)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match &self.form {
            KernelForm::Quadratic { a } => 0.5 * a * x * x,
            KernelForm::Gaussian { a, s } => a * (-x * x / (2.0 * s * s)).exp(),
            KernelForm::Tabulated(t) => t.value_at(x),
        }
    }

    /// `W'(x)`; tabulated kernels use zero extension outside the table.
    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        match &self.form {
            KernelForm::Quadratic { a } => a * x,
            KernelForm::Gaussian { a, s } => -a * x / (s * s) * (-x * x / (2.0 * s * s)).exp(),
            KernelForm::Tabulated(t) => t.grad_at(x),
        }
    }

    /// Divided difference `(W'(x) - W'(y)) / (x - y)` for `x != y`.
    ///
    /// Exact for the quadratic family, whose gradient is linear.
    #[inline]
    pub fn grad_divided_difference(&self, x: f64, y: f64) -> f64 {
        match &self.form {
            KernelForm::Quadratic { a } => *a,
            _ => (self.grad(x) - self.grad(y)) / (x - y),
        }
    }
}

/// `W'(x)`, honouring strict-range mode for tabulated kernels.
pub fn eval_kernel_grad(kernel: &InteractionKernel, x: f64) -> Result<f64, PotentialError> {
    if let (true, KernelForm::Tabulated(t)) = (kernel.strict_range, &kernel.form) {
        let (lo, hi) = t.range();
        if x < lo || x > hi {
            return Err(PotentialError::TabulatedRangeExceeded { x, lo, hi });
        }
    }
    Ok(kernel.grad(x))
}

/// A finite collection of weighted atoms, used as the source of a convolution.
///
/// Grid densities expose their cell midpoints with weight `rho_i * dx`.
pub trait PointMasses {
    fn atom_count(&self) -> usize;
    /// `(position, mass)` of atom `k`.
    fn atom(&self, k: usize) -> (f64, f64);

    fn total_mass(&self) -> f64 {
        (0..self.atom_count()).map(|k| self.atom(k).1).sum()
    }
}

/// `(W' * rho)(x_q)` for each query point, by direct summation.
///
/// The quadratic family uses the algebraically identical closed form
/// `a (x M - sum_j m_j y_j)`.
pub fn convolve_grad<D: PointMasses + ?Sized>(
    kernel: &InteractionKernel,
    density: &D,
    query_points: &[f64],
) -> Result<Vec<f64>, PotentialError> {
    let mass = density.total_mass();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(PotentialError::MassNotNormalized(mass));
    }
    Ok(convolve_grad_unchecked(kernel, density, query_points))
}

pub(crate) fn convolve_grad_unchecked<D: PointMasses + ?Sized>(
    kernel: &InteractionKernel,
    density: &D,
    query_points: &[f64],
) -> Vec<f64> {
    let n = density.atom_count();
    match kernel.form {
        KernelForm::Quadratic { a } => {
            let (mut m0, mut m1) = (0.0, 0.0);
            for k in 0..n {
                let (y, m) = density.atom(k);
                m0 += m;
                m1 += m * y;
            }
            query_points.iter().map(|&x| a * (x * m0 - m1)).collect()
        }
        _ => query_points
            .iter()
            .map(|&x| {
                let mut acc = 0.0;
                for k in 0..n {
                    let (y, m) = density.atom(k);
                    acc += m * kernel.grad(x - y);
                }
                acc
            })
            .collect(),
    }
}

/// Grid of `n_pairs` equispaced points on `[-radius, radius]`.
fn pair_grid(radius: f64, n_pairs: usize) -> Vec<f64> {
    let h = 2.0 * radius / (n_pairs - 1) as f64;
    (0..n_pairs).map(|k| -radius + h * k as f64).collect()
}

/// Brute-force estimate of `c_W = inf_{x != y} <x - y, W'(x) - W'(y)> / |x - y|^2`.
///
/// The infimum is taken over all distinct pairs of an `n_pairs`-point grid on
/// `[-radius, radius]`, so the result is an upper bound on the true infimum.
pub fn estimate_cw(kernel: &InteractionKernel, radius: f64, n_pairs: usize) -> Result<f64, PotentialError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(PotentialError::InvalidEstimateInput(format!("radius {radius} must be positive")));
    }
    if n_pairs < 2 {
        return Err(PotentialError::InvalidEstimateInput(format!("n_pairs {n_pairs} must be at least 2")));
    }
    let pts = pair_grid(radius, n_pairs);
    let grads: Vec<f64> = pts.iter().map(|&x| kernel.grad(x)).collect();
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = pts[j] - pts[i];
            if d.abs() < MIN_PAIR_SEPARATION {
                continue;
            }
            let q = match kernel.form {
                KernelForm::Quadratic { a } => a,
                _ => (grads[j] - grads[i]) / d,
            };
            best = best.min(q);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(PotentialError::DegenerateGrid)
    }
}

/// Outcome of the hypothesis check `c_V + c_W > 0` with bounded `W'`, `W''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub c_w_estimate: f64,
    pub grad_w_sup: f64,
    pub hess_w_sup: f64,
    pub h_satisfied: bool,
    pub margin: f64,
}

pub fn check_hypothesis(
    spec: &ConfinementSpec,
    kernel: &InteractionKernel,
    radius: f64,
    n_pairs: usize,
) -> Result<HypothesisReport, PotentialError> {
    let c_w_estimate = estimate_cw(kernel, radius, n_pairs)?;
    let grad_w_sup = pair_grid(radius, n_pairs)
        .into_iter()
        .map(|x| kernel.grad(x).abs())
        .fold(0.0, f64::max);
    let hess_w_sup = kernel.lipschitz_grad_bound();
    let margin = spec.c_v + c_w_estimate;
    let h_satisfied = margin > 0.0 && grad_w_sup.is_finite() && hess_w_sup.is_finite();
    Ok(HypothesisReport { c_w_estimate, grad_w_sup, hess_w_sup, h_satisfied, margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Atoms(Vec<(f64, f64)>);

    impl PointMasses for Atoms {
        fn atom_count(&self) -> usize {
            self.0.len()
        }
        fn atom(&self, k: usize) -> (f64, f64) {
            self.0[k]
        }
    }

    fn gaussian_table() -> KernelTable {
        let h = 0.01;
        let n = 801;
        let x0 = -4.0;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let x = x0 + h * k as f64;
                (-x * x / 2.0).exp()
            })
            .collect();
        KernelTable::new(x0, h, &samples).unwrap()
    }

    #[test]
    fn confinement_examples() {
        let one = ConfinementSpec::new(1.0);
        assert_eq!(eval_confinement_grad(0.0, &one), 0.0);
        assert_eq!(eval_confinement_grad(2.0, &one), 2.0);
        assert_eq!(one.value(2.0), 2.0);
        let two = ConfinementSpec::new(2.0);
        assert_eq!(eval_confinement_grad(3.0, &two), 6.0);
        assert_eq!(two.value(3.0), 9.0);
    }

    #[test]
    fn kernel_grad_examples() {
        assert_eq!(InteractionKernel::quadratic(1.0).grad(0.5), 0.5);
        for k in [InteractionKernel::quadratic(3.0), InteractionKernel::gaussian(2.0, 0.7)] {
            assert_eq!(k.grad(0.0), 0.0);
        }
        let g = InteractionKernel::gaussian(1.0, 1.0);
        let expected = -(-0.5f64).exp();
        assert!((g.grad(1.0) - expected).abs() < 1e-15);
        let h = 1e-6;
        let fd = (g.value(1.0 + h) - g.value(1.0 - h)) / (2.0 * h);
        assert!((fd - expected).abs() < 1e-9);
    }

    #[test]
    fn finite_difference_error_is_second_order() {
        let g = InteractionKernel::gaussian(1.3, 0.8);
        let x = 0.37;
        let err = |h: f64| (g.grad(x) - (g.value(x + h) - g.value(x - h)) / (2.0 * h)).abs();
        let ratio = err(1e-3) / err(1e-4);
        assert!((ratio - 100.0).abs() < 5.0, "ratio {ratio}");
    }

    #[test]
    fn tabulated_kernel_is_even_with_odd_gradient() {
        let t = gaussian_table();
        let k = InteractionKernel::tabulated(t);
        assert_eq!(k.grad(0.0), 0.0);
        for x in [0.013, 0.5, 1.234, 3.99] {
            assert!((k.grad(x) + k.grad(-x)).abs() < 1e-14);
            assert!((k.value(x) - k.value(-x)).abs() < 1e-12);
            assert!((k.grad(x) + x * (-x * x / 2.0f64).exp()).abs() < 1e-4);
        }
        assert!(k.lipschitz_grad_bound() <= 1.0 + 1e-3);
        // zero extension outside the table
        assert_eq!(k.grad(5.0), 0.0);
    }

    #[test]
    fn tabulated_symmetrizes_noisy_samples() {
        let samples = [1.0, 0.2, 0.0, 0.4, 2.0];
        let t = KernelTable::new(-2.0, 1.0, &samples).unwrap();
        let k = InteractionKernel::tabulated(t);
        assert!((k.grad(1.5) + k.grad(-1.5)).abs() < 1e-14);
    }

    #[test]
    fn tabulated_rejects_asymmetric_grid() {
        assert!(matches!(
            KernelTable::new(-1.0, 0.5, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Err(PotentialError::InvalidTable(_))
        ));
    }

    #[test]
    fn strict_range_errors_outside_table() {
        let k = InteractionKernel::tabulated(gaussian_table()).with_strict_range(true);
        assert!(matches!(eval_kernel_grad(&k, 4.5), Err(PotentialError::TabulatedRangeExceeded { .. })));
        assert!(eval_kernel_grad(&k, 3.5).is_ok());
        let lax = InteractionKernel::tabulated(gaussian_table());
        assert_eq!(eval_kernel_grad(&lax, 4.5).unwrap(), 0.0);
    }

    #[test]
    fn csv_round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let mut body = String::from("x,W\n");
        for k in 0..41 {
            let x = -2.0 + 0.1 * k as f64;
            body.push_str(&format!("{x},{}\n", 0.5 * x * x));
        }
        std::fs::write(&path, body).unwrap();
        let k = InteractionKernel::tabulated(KernelTable::from_csv(&path).unwrap());
        assert!((k.grad(0.75) - 0.75).abs() < 1e-9);
        assert!((k.value(0.75) - 0.5 * 0.75 * 0.75).abs() < 1e-9);
    }

    #[test]
    fn convolution_with_dirac_is_kernel_gradient() {
        for kernel in [InteractionKernel::quadratic(1.7), InteractionKernel::gaussian(1.0, 0.6)] {
            let a = 0.3;
            let dirac = Atoms(vec![(a, 1.0)]);
            let q = [-1.0, 0.0, 0.25, 2.0];
            let conv = convolve_grad(&kernel, &dirac, &q).unwrap();
            for (x, c) in q.iter().zip(conv) {
                assert_eq!(c, kernel.grad(x - a));
            }
        }
    }

    #[test]
    fn convolution_of_even_density_vanishes_at_origin() {
        let d = Atoms(vec![(-1.0, 0.25), (-0.2, 0.25), (0.2, 0.25), (1.0, 0.25)]);
        let c = convolve_grad(&InteractionKernel::gaussian(1.0, 1.0), &d, &[0.0]).unwrap();
        assert!(c[0].abs() < 1e-16);
    }

    #[test]
    fn quadratic_convolution_is_offset_from_mean() {
        let d = Atoms(vec![(-0.5, 0.1), (0.2, 0.3), (1.1, 0.6)]);
        let mean: f64 = d.0.iter().map(|(x, m)| x * m).sum();
        let q = [-2.0, 0.0, 0.7];
        let conv = convolve_grad(&InteractionKernel::quadratic(1.0), &d, &q).unwrap();
        for (x, c) in q.iter().zip(conv) {
            // direct quadrature oracle
            let direct: f64 = d.0.iter().map(|(y, m)| m * (x - y)).sum();
            assert!((c - (x - mean)).abs() < 1e-14);
            assert!((c - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn convolution_rejects_unnormalized_mass() {
        let d = Atoms(vec![(0.0, 0.5)]);
        assert!(matches!(
            convolve_grad(&InteractionKernel::quadratic(1.0), &d, &[0.0]),
            Err(PotentialError::MassNotNormalized(_))
        ));
    }

    #[test]
    fn cw_quadratic_is_exact() {
        for a in [1.0, -1.0, 0.37] {
            for n in [2, 7, 50] {
                assert_eq!(estimate_cw(&InteractionKernel::quadratic(a), 3.0, n).unwrap(), a);
            }
        }
    }

    #[test]
    fn cw_gaussian_baseline() {
        // W'' of a e^{-x^2/2} attains its minimum -1 at the origin; the pair grid
        // on [-5, 5] with 401 points has spacing 0.025 and straddles the origin.
        let est = estimate_cw(&InteractionKernel::gaussian(1.0, 1.0), 5.0, 401).unwrap();
        assert!(est < 0.0);
        // divided difference over the symmetric pair (-h, h) = -e^{-h^2/2}
        let h: f64 = 0.025;
        assert!((est + (-h * h / 2.0).exp()).abs() < 1e-12, "estimate {est}");
    }

    #[test]
    fn cw_refinement_is_monotone() {
        let k = InteractionKernel::gaussian(1.0, 0.8);
        let mut prev = f64::INFINITY;
        for n in [3usize, 5, 9, 17, 33, 65, 129] {
            let est = estimate_cw(&k, 2.0, n).unwrap();
            assert!(est <= prev, "n={n}: {est} > {prev}");
            prev = est;
        }
    }

    #[test]
    fn cw_input_errors() {
        let k = InteractionKernel::quadratic(1.0);
        assert!(estimate_cw(&k, 0.0, 10).is_err());
        assert!(estimate_cw(&k, 1.0, 1).is_err());
    }

    #[test]
    fn hypothesis_examples() {
        let r = check_hypothesis(&ConfinementSpec::new(1.0), &InteractionKernel::quadratic(1.0), 4.0, 50).unwrap();
        assert_eq!(r.margin, 2.0);
        assert!(r.h_satisfied);
        let r = check_hypothesis(&ConfinementSpec::new(0.0), &InteractionKernel::quadratic(-1.0), 4.0, 50).unwrap();
        assert_eq!(r.margin, -1.0);
        assert!(!r.h_satisfied);
        let g = InteractionKernel::gaussian(1.0, 1.0);
        let r = check_hypothesis(&ConfinementSpec::new(1.0), &g, 5.0, 401).unwrap();
        assert_eq!(r.margin, 1.0 + estimate_cw(&g, 5.0, 401).unwrap());
    }

    proptest! {
        #[test]
        fn kernel_gradients_are_odd(x in -10.0f64..10.0, a in -3.0f64..3.0, s in 0.2f64..3.0) {
            for k in [InteractionKernel::quadratic(a), InteractionKernel::gaussian(a, s)] {
                prop_assert!((k.grad(x) + k.grad(-x)).abs() <= 1e-12);
                prop_assert!((k.value(x) - k.value(-x)).abs() <= 1e-12);
            }
        }

        #[test]
        fn gaussian_gradient_respects_lipschitz_bound(x in -6.0f64..6.0, y in -6.0f64..6.0) {
            let k = InteractionKernel::gaussian(1.5, 0.7);
            prop_assume!((x - y).abs() > 1e-9);
            prop_assert!(k.grad_divided_difference(x, y).abs() <= k.lipschitz_grad_bound() * (1.0 + 1e-9));
        }
    }
}
