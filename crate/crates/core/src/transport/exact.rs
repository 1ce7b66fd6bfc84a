//! Exact discrete optimal transport for small instances.
//!
//! The transportation problem between two finitely supported measures is
//! solved as a min-cost flow by successive shortest augmenting paths with
//! Johnson potentials (dense Dijkstra). Intended as a reference oracle, so the
//! support size is capped.

use super::TransportError;

/// Largest support accepted by [`w2_discrete_exact`].
pub const MAX_SUPPORT: usize = 64;

/// Residual capacities at or below this are treated as exhausted.
const CAPACITY_EPS: f64 = 1e-15;

/// Finitely supported measure on `R^dim` with row-major coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, coords: Vec<f64>, masses: Vec<f64>) -> Result<Self, TransportError> {
        if dim == 0 || coords.len() != dim * masses.len() {
            return Err(TransportError::InvalidDensity(format!(
                "{} coordinates do not match {} atoms in dimension {dim}",
                coords.len(),
                masses.len()
            )));
        }
        if masses.is_empty() || masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(TransportError::InvalidDensity("masses must be nonnegative and nonempty".into()));
        }
        Ok(Self { dim, coords, masses })
    }

    /// One-dimensional atoms.
    pub fn from_line(positions: &[f64], masses: &[f64]) -> Result<Self, TransportError> {
        Self::new(1, positions.to_vec(), masses.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact `W_2` between two discrete measures of equal total mass.
pub fn w2_discrete_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64, TransportError> {
    for m in [mu, nu] {
        if m.len() > MAX_SUPPORT {
            return Err(TransportError::SupportTooLarge { size: m.len(), max: MAX_SUPPORT });
        }
    }
    if mu.dim != nu.dim {
        return Err(TransportError::DimensionMismatch(mu.dim, nu.dim));
    }
    let cost: Vec<Vec<f64>> = (0..mu.len())
        .map(|i| (0..nu.len()).map(|j| squared_distance(mu.point(i), nu.point(j))).collect())
        .collect();
    let plan = optimal_plan(&mu.masses, &nu.masses, &cost);
    let total: f64 = plan
        .iter()
        .zip(&cost)
        .map(|(row, crow)| row.iter().zip(crow).map(|(f, c)| f * c).sum::<f64>())
        .sum();
    Ok(total.max(0.0).sqrt())
}

/// Optimal transport plan for supplies `a`, demands `b` and cost matrix `cost`.
///
/// The flow value is `min(sum a, sum b)`.
pub fn optimal_plan(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b.len();
    // node layout: 0 = source, 1..=n supplies, n+1..=n+m demands, n+m+1 = sink
    let s = 0;
    let t = n + m + 1;
    let nodes = n + m + 2;
    let sup = |i: usize| 1 + i;
    let dem = |j: usize| 1 + n + j;

    let mut supply_left = a.to_vec();
    let mut demand_left = b.to_vec();
    let mut flow = vec![vec![0.0; m]; n];
    let target = a.iter().sum::<f64>().min(b.iter().sum::<f64>());
    let mut pushed = 0.0;
    let mut potential = vec![0.0; nodes];

    // residual arcs out of `u` as (v, capacity, cost)
    let arcs = |u: usize, supply_left: &[f64], demand_left: &[f64], flow: &[Vec<f64>]| -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        if u == s {
            for i in 0..n {
                out.push((sup(i), supply_left[i], 0.0));
            }
        } else if u <= n {
            let i = u - 1;
            out.push((s, a[i] - supply_left[i], 0.0));
            for j in 0..m {
                out.push((dem(j), f64::INFINITY, cost[i][j]));
            }
        } else if u < t {
            let j = u - 1 - n;
            out.push((t, demand_left[j], 0.0));
            for i in 0..n {
                out.push((sup(i), flow[i][j], -cost[i][j]));
            }
        } else {
            for j in 0..m {
                out.push((dem(j), b[j] - demand_left[j], 0.0));
            }
        }
        out
    };

    while target - pushed > CAPACITY_EPS {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        dist[s] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for (v, cap, c) in arcs(u, &supply_left, &demand_left, &flow) {
                if cap <= CAPACITY_EPS || done[v] {
                    continue;
                }
                let reduced = (c + potential[u] - potential[v]).max(0.0);
                if dist[u] + reduced < dist[v] {
                    dist[v] = dist[u] + reduced;
                    parent[v] = u;
                }
            }
        }
        if !dist[t].is_finite() {
            break;
        }
        for v in 0..nodes {
            potential[v] += dist[v].min(dist[t]);
        }

        // bottleneck along the path
        let capacity = |u: usize, v: usize, supply_left: &[f64], demand_left: &[f64], flow: &[Vec<f64>]| -> f64 {
            match (u, v) {
                (u, v) if u == s => supply_left[v - 1],
                (u, v) if v == s => a[u - 1] - supply_left[u - 1],
                (u, v) if v == t => demand_left[u - 1 - n],
                (u, v) if u == t => b[v - 1 - n] - demand_left[v - 1 - n],
                (u, _) if u <= n => f64::INFINITY,
                (u, v) => flow[v - 1][u - 1 - n],
            }
        };
        let mut delta = target - pushed;
        let mut v = t;
        while v != s {
            let u = parent[v];
            delta = delta.min(capacity(u, v, &supply_left, &demand_left, &flow));
            v = u;
        }
        let mut v = t;
        while v != s {
            let u = parent[v];
            match (u, v) {
                (u, v) if u == s => supply_left[v - 1] -= delta,
                (u, v) if v == s => supply_left[u - 1] += delta,
                (u, v) if v == t => demand_left[u - 1 - n] -= delta,
                (u, v) if u == t => demand_left[v - 1 - n] += delta,
                (u, v) if u <= n => flow[u - 1][v - 1 - n] += delta,
                (u, v) => flow[v - 1][u - 1 - n] -= delta,
            }
            v = u;
        }
        pushed += delta;
    }
    flow
}
