//! Monte-Carlo estimates of the MLE and majority-vote gaps.
//!
//! Both gaps are computed from draws `(X, Y)` of the true model. The MLE gap
//! compares expected log-likelihoods of the true assignment and its best
//! competitor; the MV gap is the smallest per-region margin between the
//! frequency of the correct label and the most frequent wrong one.

use serde::{Deserialize, Serialize};

use super::{check_pair, mc_fold, McEstimate, SE_MULTIPLIER, TAG_TRUTH};
use crate::error::{Error, Result};
use crate::matching::{self, WeightMatrix};
use crate::mixtures::{argmax_lowest, MixingMeasure, Permutation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleGap {
    pub gap: McEstimate,
    /// The best assignment other than π* under the expected weights.
    pub competitor: Permutation,
    /// Whether π* maximises the expected weights.
    pub truth_is_optimal: bool,
    /// `E[1(Y = k) log λ_b f_b(X)]` for class `k` (row) and atom `b`.
    pub expected_weights: Vec<Vec<f64>>,
    pub samples_used: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvGap {
    pub gap: McEstimate,
    /// `P(Y = correct | X ∈ D_b) − max_{wrong j} P(Y = j | X ∈ D_b)` per region.
    pub margins: Vec<McEstimate>,
    pub region_counts: Vec<usize>,
    pub samples_used: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap_mle: McEstimate,
    pub gap_mv: McEstimate,
    pub margins: Vec<McEstimate>,
    pub mle_competitor: Permutation,
    pub samples_used: usize,
    pub seed: u64,
}

struct Acc {
    k: usize,
    /// Σ 1(Y=k) s_b, row-major K×K.
    cells: Vec<f64>,
    /// Σ 1(Y=k) (s_{π*(k)} − s_b)², row-major K×K.
    sq_diff: Vec<f64>,
    /// Region (of the model) × class counts.
    votes: Vec<usize>,
    n: usize,
}

impl Acc {
    fn new(k: usize) -> Self {
        Self {
            k,
            cells: vec![0.0; k * k],
            sq_diff: vec![0.0; k * k],
            votes: vec![0; k * k],
            n: 0,
        }
    }

    fn merge(mut self, other: &Acc) -> Self {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        for (a, b) in self.sq_diff.iter_mut().zip(&other.sq_diff) {
            *a += b;
        }
        for (a, b) in self.votes.iter_mut().zip(&other.votes) {
            *a += b;
        }
        self.n += other.n;
        self
    }
}

fn accumulate(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    pi_star: &Permutation,
    samples: usize,
    seed: u64,
) -> Result<Acc> {
    check_pair(model, truth, pi_star)?;
    if model.k() < 2 {
        return Err(Error::InvalidInput("gaps need at least two atoms".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("mc_samples must be at least 1".into()));
    }
    let k = model.k();
    let chunks = mc_fold(
        truth,
        pi_star,
        samples,
        seed,
        TAG_TRUTH,
        || (Acc::new(k), vec![0.0; k]),
        |(acc, scores), y, _, x| {
            model.weighted_log_densities_into(x, scores);
            let own = scores[pi_star.region_of_class(y)];
            for (b, s) in scores.iter().enumerate() {
                acc.cells[y * k + b] += s;
                acc.sq_diff[y * k + b] += (own - s).powi(2);
            }
            acc.votes[argmax_lowest(scores) * k + y] += 1;
            acc.n += 1;
        },
    );
    Ok(chunks
        .iter()
        .fold(Acc::new(k), |total, (acc, _)| total.merge(acc)))
}

fn finish_mle(acc: &Acc, pi_star: &Permutation, seed: u64) -> MleGap {
    let k = acc.k;
    let nf = acc.n as f64;
    let expected: Vec<Vec<f64>> = acc
        .cells
        .chunks(k)
        .map(|row| row.iter().map(|v| v / nf).collect())
        .collect();
    let w = WeightMatrix::new(expected.clone()).expect("finite expected weights");
    let (best, _) = matching::solve(&w);
    let truth_is_optimal = &best == pi_star;
    let competitor = if truth_is_optimal {
        matching::runner_up(&w, pi_star).0
    } else {
        best
    };
    // Paired per-sample differences D = s_{π*(Y)} − s_{π'(Y)}.
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for y in 0..k {
        let (own, other) = (pi_star.region_of_class(y), competitor.region_of_class(y));
        sum += acc.cells[y * k + own] - acc.cells[y * k + other];
        sum_sq += acc.sq_diff[y * k + other];
    }
    MleGap {
        gap: McEstimate::from_sums(sum, sum_sq, acc.n),
        competitor,
        truth_is_optimal,
        expected_weights: expected,
        samples_used: acc.n,
        seed,
    }
}

fn finish_mv(acc: &Acc, pi_star: &Permutation, seed: u64) -> Result<MvGap> {
    let k = acc.k;
    let mut margins = Vec::with_capacity(k);
    let mut region_counts = Vec::with_capacity(k);
    for b in 0..k {
        let row = &acc.votes[b * k..(b + 1) * k];
        let m_b: usize = row.iter().sum();
        if m_b == 0 {
            return Err(Error::EmptyMonteCarloRegion { region: b });
        }
        let mf = m_b as f64;
        let correct = pi_star.class_of_region(b);
        let p_a = row[correct] as f64 / mf;
        let p_j = (0..k)
            .filter(|&j| j != correct)
            .map(|j| row[j] as f64 / mf)
            .fold(f64::NEG_INFINITY, f64::max);
        let var = (p_a + p_j - (p_a - p_j).powi(2)).max(0.0);
        margins.push(McEstimate {
            value: p_a - p_j,
            half_width: SE_MULTIPLIER * (var / mf).sqrt(),
        });
        region_counts.push(m_b);
    }
    let gap = *margins
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("K >= 2");
    Ok(MvGap {
        gap,
        margins,
        region_counts,
        samples_used: acc.n,
        seed,
    })
}

/// `Δ_MLE(Λ)`: expected log-likelihood of π* minus the best other permutation.
///
/// When π* is not optimal under the expected weights the result is negative
/// and the competitor is the optimum itself. The half-width comes from the
/// paired per-sample differences between the two assignments.
pub fn estimate_gap_mle(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    pi_star: &Permutation,
    mc_samples: usize,
    seed: u64,
) -> Result<MleGap> {
    let acc = accumulate(model, truth, pi_star, mc_samples, seed)?;
    Ok(finish_mle(&acc, pi_star, seed))
}

/// `Δ_MV(Λ)`: the minimum over regions `b` of the conditional label margin.
///
/// Fails with [`Error::EmptyMonteCarloRegion`] if some region of `model`
/// receives no draws.
pub fn estimate_gap_mv(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    pi_star: &Permutation,
    mc_samples: usize,
    seed: u64,
) -> Result<MvGap> {
    let acc = accumulate(model, truth, pi_star, mc_samples, seed)?;
    finish_mv(&acc, pi_star, seed)
}

/// Both gaps from a single pass over the same draws.
pub fn gap_report(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    pi_star: &Permutation,
    mc_samples: usize,
    seed: u64,
) -> Result<GapReport> {
    let acc = accumulate(model, truth, pi_star, mc_samples, seed)?;
    let mle = finish_mle(&acc, pi_star, seed);
    let mv = finish_mv(&acc, pi_star, seed)?;
    Ok(GapReport {
        gap_mle: mle.gap,
        gap_mv: mv.gap,
        margins: mv.margins,
        mle_competitor: mle.competitor,
        samples_used: acc.n,
        seed,
    })
}
