//! Exact transportation LP and the Wasserstein-1 distance between mixing
//! measures with total-variation ground cost.
//!
//! The LP is solved by the transportation simplex (MODI potentials) from a
//! north-west-corner basis. Entering and leaving cells follow Bland's
//! lowest-index rule, so degenerate pivots cannot cycle.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::tv::{tv_distance, TvMethod};
use super::McEstimate;
use crate::error::{Error, Result};
use crate::mixtures::MixingMeasure;
use crate::par;

/// Largest number of atoms on either side.
pub const MAX_ATOMS: usize = 64;

const MARGINAL_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;
const TAG_W1: u64 = 0x31;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `plan[i][j]`: mass moved from supply atom `i` to demand atom `j`.
    pub plan: Vec<Vec<f64>>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let n = self.plan.first().map_or(0, Vec::len);
        (0..n)
            .map(|j| self.plan.iter().map(|r| r[j]).sum())
            .collect()
    }
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [Vec<f64>],
    x: Vec<Vec<f64>>,
    basic: Vec<Vec<bool>>,
}

impl Simplex<'_> {
    fn north_west(&mut self, supply: &[f64], demand: &[f64]) {
        let (mut a, mut b) = (supply.to_vec(), demand.to_vec());
        let (mut i, mut j) = (0, 0);
        while i < self.m && j < self.n {
            let q = a[i].min(b[j]).max(0.0);
            self.x[i][j] = q;
            self.basic[i][j] = true;
            a[i] -= q;
            b[j] -= q;
            if i == self.m - 1 {
                j += 1;
            } else if j == self.n - 1 || a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    /// Tree adjacency over nodes `0..m` (rows) and `m..m+n` (columns).
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for i in 0..self.m {
            for j in 0..self.n {
                if self.basic[i][j] {
                    adj[i].push(self.m + j);
                    adj[self.m + j].push(i);
                }
            }
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.m + self.n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &next in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = if node < self.m {
                        (node, next - self.m)
                    } else {
                        (next, node - self.m)
                    };
                    // u_i + v_j = c_ij
                    pot[next] = self.cost[i][j] - pot[node];
                    queue.push_back(next);
                }
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    /// Tree path from row node `i` to column node `m + j`, as a node list.
    fn path(&self, adj: &[Vec<usize>], i: usize, j: usize) -> Vec<usize> {
        let target = self.m + j;
        let mut parent = vec![usize::MAX; self.m + self.n];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut path = vec![target];
        let mut node = target;
        while node != i {
            node = parent[node];
            path.push(node);
        }
        path.reverse();
        path
    }

    fn cell(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.m {
            (a, b - self.m)
        } else {
            (b, a - self.m)
        }
    }

    fn solve(&mut self) -> Result<()> {
        let scale = self
            .cost
            .iter()
            .flatten()
            .fold(1.0f64, |acc, c| acc.max(c.abs()));
        let eps = 1e-12 * scale;
        for _ in 0..MAX_PIVOTS {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj);
            let entering = (0..self.m)
                .flat_map(|i| (0..self.n).map(move |j| (i, j)))
                .find(|&(i, j)| !self.basic[i][j] && self.cost[i][j] - u[i] - v[j] < -eps);
            let Some((ei, ej)) = entering else {
                return Ok(());
            };
            // Cycle: entering cell (+), then path edges alternate -, +, ...
            // starting from the edge at the entering column.
            let nodes = self.path(&adj, ei, ej);
            let edges: Vec<(usize, usize)> = nodes
                .windows(2)
                .rev()
                .map(|w| self.cell(w[0], w[1]))
                .collect();
            let minus: Vec<(usize, usize)> = edges.iter().copied().step_by(2).collect();
            let plus: Vec<(usize, usize)> = edges.iter().copied().skip(1).step_by(2).collect();
            let theta = minus
                .iter()
                .map(|&(i, j)| self.x[i][j])
                .fold(f64::INFINITY, f64::min);
            let leaving = minus
                .iter()
                .copied()
                .filter(|&(i, j)| self.x[i][j] <= theta)
                .min()
                .expect("cycle has a decreasing cell");
            for &(i, j) in &plus {
                self.x[i][j] += theta;
            }
            for &(i, j) in &minus {
                self.x[i][j] = (self.x[i][j] - theta).max(0.0);
            }
            self.x[ei][ej] = theta;
            self.basic[ei][ej] = true;
            self.x[leaving.0][leaving.1] = 0.0;
            self.basic[leaving.0][leaving.1] = false;
        }
        Err(Error::TransportDiverged(MAX_PIVOTS))
    }
}

/// Minimum-cost transport between `supply` and `demand` (equal totals).
pub fn transport_lp(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || m > MAX_ATOMS || n > MAX_ATOMS {
        return Err(Error::InvalidInput(format!(
            "transport needs 1..={MAX_ATOMS} atoms per side, got {m} x {n}"
        )));
    }
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!(
            "cost matrix must be {m} x {n}"
        )));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite transport cost".into()));
    }
    if supply
        .iter()
        .chain(demand)
        .any(|v| !(v.is_finite() && *v >= 0.0))
    {
        return Err(Error::InvalidInput("marginals must be nonnegative".into()));
    }
    let (ts, td): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (ts - td).abs() > MARGINAL_TOL {
        return Err(Error::InvalidInput(format!(
            "marginal totals differ: {ts} vs {td}"
        )));
    }
    let mut s = Simplex {
        m,
        n,
        cost,
        x: vec![vec![0.0; n]; m],
        basic: vec![vec![false; n]; m],
    };
    s.north_west(supply, demand);
    s.solve()?;
    let total =
        s.x.iter()
            .zip(cost)
            .flat_map(|(xr, cr)| xr.iter().zip(cr).map(|(x, c)| x * c))
            .sum();
    Ok(TransportPlan {
        plan: s.x,
        cost: total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Report {
    pub distance: McEstimate,
    pub plan: TransportPlan,
    /// Pairwise ground costs `d_TV(f_i, f'_j)`.
    pub tv_costs: Vec<Vec<McEstimate>>,
    pub tv_method: TvMethod,
}

/// `W_1(Λ, Λ')` with `d_TV` ground cost.
///
/// Monte-Carlo TV estimates use one substream per atom pair. The reported
/// half-width propagates the pairwise half-widths through the optimal plan.
pub fn wasserstein1(a: &MixingMeasure, b: &MixingMeasure, tv: TvMethod) -> Result<W1Report> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let seed = match tv {
        TvMethod::MonteCarlo { seed, .. } => seed,
        TvMethod::Quadrature1d { .. } => 0,
    };
    let (m, n) = (a.k(), b.k());
    let mut tv_costs = Vec::with_capacity(m);
    for (i, fi) in a.components().iter().enumerate() {
        let row = (0..n)
            .map(|j| {
                let method = tv.with_seed(par::derive_seed(seed, TAG_W1, (i * n + j) as u64));
                tv_distance(fi, &b.components()[j], method)
            })
            .collect::<Result<Vec<_>>>()?;
        tv_costs.push(row);
    }
    let cost: Vec<Vec<f64>> = tv_costs
        .iter()
        .map(|r| r.iter().map(|e| e.value).collect())
        .collect();
    let plan = transport_lp(a.weights(), b.weights(), &cost)?;
    let half_width = plan
        .plan
        .iter()
        .zip(&tv_costs)
        .flat_map(|(pr, tr)| pr.iter().zip(tr).map(|(p, t)| p * t.half_width))
        .sum();
    Ok(W1Report {
        distance: McEstimate {
            value: plan.cost,
            half_width,
        },
        plan,
        tv_costs,
        tv_method: tv,
    })
}
