//! Exact one-dimensional Wasserstein distances via quantile functions.

use super::measure::{grid_quantile, DensityProfile, Measure1D};

/// Minimum number of midpoint nodes for the quadrature path.
pub const MIN_QUADRATURE_NODES: usize = 64;

/// Precomputed generalized inverse CDF of a [`Measure1D`].
#[derive(Debug, Clone)]
pub enum QuantileFunction<'a> {
    Grid { profile: &'a DensityProfile, edge_cdf: Vec<f64> },
    Atoms { positions: Vec<f64>, cumulative: Vec<f64> },
    /// Continuous piecewise-linear CDF through `(xs[k], cdf[k])`; repeated
    /// abscissae encode atoms.
    Piecewise { xs: Vec<f64>, cdf: Vec<f64> },
}

impl<'a> QuantileFunction<'a> {
    pub fn new(mu: Measure1D<'a>) -> Self {
        match mu {
            Measure1D::Density(p) => QuantileFunction::Grid { profile: p, edge_cdf: p.edge_cdf() },
            Measure1D::Atoms { positions, masses } => {
                let (positions, cumulative) = sorted_atoms(positions, masses);
                QuantileFunction::Atoms { positions, cumulative }
            }
            Measure1D::Cells { nodes, masses } => {
                let (xs, cdf) = cells_cdf(nodes, masses);
                QuantileFunction::Piecewise { xs, cdf }
            }
        }
    }

    /// `inf { x : F(x) >= q }`. Grid densities interpolate the CDF linearly
    /// inside cells; atoms use the right-continuous step CDF.
    pub fn eval(&self, q: f64) -> f64 {
        match self {
            QuantileFunction::Grid { profile, edge_cdf } => grid_quantile(profile, edge_cdf, q),
            QuantileFunction::Atoms { positions, cumulative } => {
                let k = cumulative.partition_point(|&c| c < q);
                positions[k.min(positions.len() - 1)]
            }
            QuantileFunction::Piecewise { xs, cdf } => {
                let k = cdf.partition_point(|&c| c < q).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[k - 1], cdf[k]);
                if c1 > c0 {
                    xs[k - 1] + (xs[k] - xs[k - 1]) * ((q - c0) / (c1 - c0)).clamp(0.0, 1.0)
                } else {
                    xs[k]
                }
            }
        }
    }
}

/// Breakpoints and cumulative masses of a union of uniform cells, possibly
/// overlapping, normalized so the last entry is exactly 1.
fn cells_cdf(nodes: &[f64], masses: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(nodes.len(), masses.len() + 1, "cells need one more node than masses");
    assert!(!masses.is_empty(), "empty measure");
    let total: f64 = masses.iter().sum();
    if nodes.windows(2).all(|w| w[0] < w[1]) {
        let mut cdf = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for m in masses {
            acc += m;
            cdf.push(acc / total);
        }
        *cdf.last_mut().unwrap() = 1.0;
        return (nodes.to_vec(), cdf);
    }
    let mut ends: Vec<f64> = nodes.to_vec();
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    // density change at each breakpoint, and atoms sitting on breakpoints
    let mut slope_jump = vec![0.0; ends.len()];
    let mut atom = vec![0.0; ends.len()];
    let at = |x: f64| ends.partition_point(|&e| e < x);
    for (k, &m) in masses.iter().enumerate() {
        let (lo, hi) = if nodes[k] <= nodes[k + 1] { (nodes[k], nodes[k + 1]) } else { (nodes[k + 1], nodes[k]) };
        if hi > lo {
            let d = m / (hi - lo);
            slope_jump[at(lo)] += d;
            slope_jump[at(hi)] -= d;
        } else {
            atom[at(lo)] += m;
        }
    }
    let mut xs = Vec::with_capacity(2 * ends.len());
    let mut cdf = Vec::with_capacity(2 * ends.len());
    let (mut acc, mut density) = (0.0, 0.0);
    for (k, &e) in ends.iter().enumerate() {
        if k > 0 {
            acc += density * (e - ends[k - 1]);
        }
        xs.push(e);
        cdf.push(acc / total);
        if atom[k] > 0.0 {
            acc += atom[k];
            xs.push(e);
            cdf.push(acc / total);
        }
        density += slope_jump[k];
    }
    *cdf.last_mut().unwrap() = 1.0;
    (xs, cdf)
}

/// Sorts atoms by position and returns positions with cumulative masses
/// normalized so the last entry is exactly 1.
fn sorted_atoms(positions: &[f64], masses: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(positions.len(), masses.len(), "positions and masses differ in length");
    assert!(!positions.is_empty(), "empty measure");
    let mut idx: Vec<usize> = (0..positions.len()).collect();
    idx.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let total: f64 = masses.iter().sum();
    let mut acc = 0.0;
    let mut xs = Vec::with_capacity(idx.len());
    let mut cs = Vec::with_capacity(idx.len());
    for &k in &idx {
        acc += masses[k];
        xs.push(positions[k]);
        cs.push(acc / total);
    }
    *cs.last_mut().unwrap() = 1.0;
    (xs, cs)
}

/// Generalized inverse CDF of `mu` at `q` in (0, 1).
pub fn quantile(mu: Measure1D<'_>, q: f64) -> f64 {
    QuantileFunction::new(mu).eval(q)
}

/// `W_p(mu, nu) = (int_0^1 |F_mu^{-1}(q) - F_nu^{-1}(q)|^p dq)^{1/p}`.
///
/// Two atomic measures are compared exactly by summing over the merged
/// breakpoints of their step quantile functions. Otherwise the integral uses
/// midpoint quadrature with `n_quad` nodes.
pub fn wasserstein_1d(mu: Measure1D<'_>, nu: Measure1D<'_>, p: f64, n_quad: usize) -> f64 {
    assert!(p >= 1.0, "Wasserstein order must be at least 1");
    if let (Measure1D::Atoms { positions: xa, masses: ma }, Measure1D::Atoms { positions: xb, masses: mb }) = (mu, nu) {
        return atoms_cost(xa, ma, xb, mb, p).powf(1.0 / p);
    }
    assert!(n_quad >= MIN_QUADRATURE_NODES, "n_quad must be at least {MIN_QUADRATURE_NODES}");
    let fa = QuantileFunction::new(mu);
    let fb = QuantileFunction::new(nu);
    let h = 1.0 / n_quad as f64;
    let sum: f64 = (0..n_quad)
        .map(|k| {
            let q = (k as f64 + 0.5) * h;
            (fa.eval(q) - fb.eval(q)).abs().powf(p)
        })
        .sum();
    (sum * h).powf(1.0 / p)
}

/// Squared 2-Wasserstein distance; see [`wasserstein_1d`].
pub fn w2_squared_1d(mu: Measure1D<'_>, nu: Measure1D<'_>, n_quad: usize) -> f64 {
    if let (Measure1D::Atoms { positions: xa, masses: ma }, Measure1D::Atoms { positions: xb, masses: mb }) = (mu, nu) {
        return atoms_cost(xa, ma, xb, mb, 2.0);
    }
    wasserstein_1d(mu, nu, 2.0, n_quad).powi(2)
}

fn atoms_cost(xa: &[f64], ma: &[f64], xb: &[f64], mb: &[f64], p: f64) -> f64 {
    let (xa, ca) = sorted_atoms(xa, ma);
    let (xb, cb) = sorted_atoms(xb, mb);
    let (mut i, mut j) = (0, 0);
    let mut q_prev = 0.0;
    let mut cost = 0.0;
    while i < xa.len() && j < xb.len() {
        let next = ca[i].min(cb[j]);
        let d = (xa[i] - xb[j]).abs();
        cost += (next - q_prev) * if p == 2.0 { d * d } else { d.powf(p) };
        q_prev = next;
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    cost
}
