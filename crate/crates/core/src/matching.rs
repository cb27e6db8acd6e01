//! Maximum-weight perfect matching on complete bipartite graphs.
//!
//! The Hungarian solver works on negated weights as a min-cost assignment,
//! so the tie tolerance [`TIE_TOL`] is applied to total weights after the
//! fact, never inside the pivoting.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixtures::Permutation;

/// Two matchings whose totals differ by at most this are considered tied.
pub const TIE_TOL: f64 = 1e-9;

/// Largest size accepted by [`brute_force_matching`].
pub const BRUTE_FORCE_MAX_K: usize = 10;

/// Square matrix of finite scores, row `k` = class, column `k'` = region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct WeightMatrix {
    k: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidWeights(format!(
                "matrix with {k} rows is not square"
            )));
        }
        Self::from_row_major(k, rows.into_iter().flatten().collect())
    }

    pub fn from_row_major(k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * k {
            return Err(Error::InvalidWeights(format!(
                "{} entries cannot form a {k}x{k} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "entry ({}, {}) is not finite",
                pos / k.max(1),
                pos % k.max(1)
            )));
        }
        Ok(Self { k, data })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            data: vec![0.0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.k + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.k..(row + 1) * self.k]
    }

    pub(crate) fn add(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.k + col] += value;
    }

    /// `Σ_k w(k, perm(k))`, summed in row order.
    pub fn total(&self, perm: &Permutation) -> f64 {
        (0..self.k)
            .map(|r| self.get(r, perm.region_of_class(r)))
            .sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.k.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for WeightMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<WeightMatrix> for Vec<Vec<f64>> {
    fn from(w: WeightMatrix) -> Self {
        w.to_rows()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    pub permutation: Permutation,
    pub total_weight: f64,
    pub is_unique: bool,
}

/// Min-cost assignment on `-w`, O(K^3). `forbidden` removes one edge.
///
/// Returns the column assigned to each row.
fn hungarian(w: &WeightMatrix, forbidden: Option<(usize, usize)>) -> Vec<usize> {
    let n = w.k();
    if n == 0 {
        return Vec::new();
    }
    // Potentials and matching, 1-based with a virtual column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                if forbidden != Some((i0 - 1, j - 1)) {
                    let cur = -w.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Optimal permutation and its total, without the uniqueness check.
pub(crate) fn solve(w: &WeightMatrix) -> (Permutation, f64) {
    let perm = Permutation::new(hungarian(w, None)).expect("assignment is a bijection");
    let total = w.total(&perm);
    (perm, total)
}

/// Best permutation that differs from `best` as a map: K re-solves, each
/// forbidding one edge of `best`. Requires K ≥ 2.
pub(crate) fn runner_up(w: &WeightMatrix, best: &Permutation) -> (Permutation, f64) {
    let mut out: Option<(Permutation, f64)> = None;
    for k in 0..w.k() {
        let cols = hungarian(w, Some((k, best.region_of_class(k))));
        let perm = Permutation::new(cols).expect("assignment is a bijection");
        let total = w.total(&perm);
        if out.as_ref().is_none_or(|(_, t)| total > *t) {
            out = Some((perm, total));
        }
    }
    out.expect("K >= 2")
}

/// Maximum-weight perfect matching via the Hungarian algorithm.
///
/// `is_unique` is false when some other permutation comes within
/// [`TIE_TOL`] of the optimum.
pub fn max_weight_matching(w: &WeightMatrix) -> Result<MatchingResult> {
    if w.k() == 0 {
        return Err(Error::InvalidWeights("empty matrix".into()));
    }
    let (permutation, total_weight) = solve(w);
    let is_unique = if w.k() < 2 {
        true
    } else {
        let (_, second) = runner_up(w, &permutation);
        total_weight - second > TIE_TOL
    };
    Ok(MatchingResult {
        permutation,
        total_weight,
        is_unique,
    })
}

/// Best permutation strictly different from the Hungarian optimum.
///
/// `is_unique` mirrors the optimum's flag: false when the runner-up ties it.
pub fn second_best_matching(w: &WeightMatrix) -> Result<MatchingResult> {
    if w.k() < 2 {
        return Err(Error::InvalidWeights(
            "second-best matching needs K >= 2".into(),
        ));
    }
    let (best, best_total) = solve(w);
    let (permutation, total_weight) = runner_up(w, &best);
    Ok(MatchingResult {
        permutation,
        total_weight,
        is_unique: best_total - total_weight > TIE_TOL,
    })
}

/// Exhaustive maximisation over all K! permutations; K ≤ 10.
///
/// Permutations are visited in lexicographic order and the first maximum
/// wins.
pub fn brute_force_matching(w: &WeightMatrix) -> Result<MatchingResult> {
    let k = w.k();
    if k == 0 || k > BRUTE_FORCE_MAX_K {
        return Err(Error::InvalidWeights(format!(
            "brute force supports 1 <= K <= {BRUTE_FORCE_MAX_K}, got {k}"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut totals = Vec::new();
    for cols in (0..k).permutations(k) {
        let total: f64 = cols.iter().enumerate().map(|(r, &c)| w.get(r, c)).sum();
        totals.push(total);
        if best.as_ref().is_none_or(|(_, t)| total > *t) {
            best = Some((cols, total));
        }
    }
    let (cols, total_weight) = best.expect("at least one permutation");
    let ties = totals
        .iter()
        .filter(|t| total_weight - **t <= TIE_TOL)
        .count();
    Ok(MatchingResult {
        permutation: Permutation::new(cols)?,
        total_weight,
        is_unique: ties == 1,
    })
}
