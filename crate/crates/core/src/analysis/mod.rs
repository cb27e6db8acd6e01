//! Gaps, large-deviation duals, recovery bounds, distances and risk.
//!
//! Every Monte-Carlo quantity is returned as an [`McEstimate`] whose
//! half-width is [`SE_MULTIPLIER`] standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixtures::{MixingMeasure, Permutation};
use crate::par;

pub mod bounds;
pub mod dual;
pub mod gap;
pub mod risk;
pub mod transport;
pub mod tv;

pub use bounds::{
    bound_report, corollary_n, group_requirement, multinomial_min_bound,
    multinomial_min_bound_conservative, thm1_bound, thm2_bound, BoundKind, BoundReport,
};
pub use dual::{
    beta_star_inf, dual_beta_star, dual_beta_star_all, legendre_dual, BetaStarInf, DualEstimate,
    DualStatus,
};
pub use gap::{estimate_gap_mle, estimate_gap_mv, gap_report, GapReport, MleGap, MvGap};
pub use risk::{misclassification_rate, RiskReport};
pub use transport::{transport_lp, wasserstein1, TransportPlan, W1Report};
pub use tv::{tv_distance, TvMethod};

/// Standard errors per reported half-width.
pub const SE_MULTIPLIER: f64 = 3.0;

/// A Monte-Carlo (or quadrature) value with its half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub half_width: f64,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            half_width: 0.0,
        }
    }

    /// Mean with a [`SE_MULTIPLIER`]-SE half-width from running sums.
    pub(crate) fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            half_width: SE_MULTIPLIER * (var / nf).sqrt(),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.value - x).abs() <= self.half_width
    }
}

/// Running sum and sum of squares, merged across chunks in order.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Moments {
    pub sum: f64,
    pub sum_sq: f64,
    pub n: usize,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
    }

    pub fn merge(mut self, other: &Self) -> Self {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.n += other.n;
        self
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate::from_sums(self.sum, self.sum_sq, self.n)
    }
}

/// Reject a model/truth pair that cannot be compared atom by atom.
pub(crate) fn check_pair(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    perm: &Permutation,
) -> Result<()> {
    if model.k() != truth.k() {
        return Err(Error::InvalidInput(format!(
            "model has {} atoms, truth has {}",
            model.k(),
            truth.k()
        )));
    }
    if model.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            got: model.dim(),
        });
    }
    if perm.len() != truth.k() {
        return Err(Error::InvalidPermutation(format!(
            "permutation of size {} for {} atoms",
            perm.len(),
            truth.k()
        )));
    }
    Ok(())
}

/// Fold `samples` draws `(y, b, x)` from the true model into one accumulator
/// per [`par::MC_CHUNK`] chunk. Chunk `c` uses substream `(seed, tag, c)`.
pub(crate) fn mc_fold<A, I, F>(
    truth: &MixingMeasure,
    perm: &Permutation,
    samples: usize,
    seed: u64,
    tag: u64,
    init: I,
    step: F,
) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, usize, usize, &[f64]) + Sync + Send,
{
    par::map_chunks(samples, |c, len| {
        let mut rng = par::substream(seed, tag, c as u64);
        let mut acc = init();
        for _ in 0..len {
            let (b, x) = truth.sample_point(&mut rng);
            step(&mut acc, perm.class_of_region(b), b, &x);
        }
        acc
    })
}

/// Substream tag for draws from the true model. Shared by the gap and risk
/// estimators so that reports computed with one seed use the same points.
pub(crate) const TAG_TRUTH: u64 = 0x6A9;
