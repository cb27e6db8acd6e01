//! Closed-form recovery-probability and sample-complexity bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Maximum likelihood; the input value is `inf_b β*_b(Δ_MLE/3)`.
    Mle,
    /// Majority vote; the input value is `Δ_MV`.
    Mv,
}

/// `1 − 2K² exp(−exponent)`, clamped to `[0, 1]`.
fn clamp_bound(k: usize, exponent: f64) -> f64 {
    if exponent.is_nan() || exponent <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    (1.0 - 2.0 * kf * kf * (-exponent).exp()).clamp(0.0, 1.0)
}

fn min_count(counts: &[usize]) -> usize {
    counts.iter().copied().min().unwrap_or(0)
}

/// MLE recovery bound `max(0, 1 − 2K² exp(−min_k n_k · β))`.
///
/// Taking the minimum of the counts and the dual value separately gives the
/// same exponent as minimising their products jointly, since both factors
/// are nonnegative.
pub fn thm1_bound(k: usize, class_counts: &[usize], beta_star_inf: f64) -> f64 {
    let n = min_count(class_counts);
    if n == 0 {
        return 0.0;
    }
    clamp_bound(k, n as f64 * beta_star_inf)
}

/// MV recovery bound `max(0, 1 − 2K² exp(−2 Δ² min_b m_b / 9))`.
/// A nonpositive gap gives 0.
pub fn thm2_bound(k: usize, region_counts: &[usize], gap_mv: f64) -> f64 {
    if gap_mv.is_nan() || gap_mv <= 0.0 {
        return 0.0;
    }
    let m = min_count(region_counts) as f64;
    clamp_bound(k, 2.0 * gap_mv * gap_mv * m / 9.0)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "delta must lie in (0, 1), got {delta}"
        )))
    }
}

fn check_value(kind: BoundKind, value: f64) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        let what = match kind {
            BoundKind::Mle => "dual value",
            BoundKind::Mv => "gap",
        };
        Err(Error::Unbounded(format!(
            "{what} must be positive, got {value}"
        )))
    }
}

/// Total sample size sufficient for recovery with probability `1 − δ`.
///
/// MLE: `K log(K/δ) (1 + 4/β)`. MV: `K log(K/δ) (1 + 18/Δ²)`. The result is
/// rounded up and never below `K`.
pub fn corollary_n(k: usize, delta: f64, kind: BoundKind, value: f64) -> Result<u64> {
    if k == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    check_delta(delta)?;
    check_value(kind, value)?;
    let kf = k as f64;
    let factor = match kind {
        BoundKind::Mle => 1.0 + 4.0 / value,
        BoundKind::Mv => 1.0 + 18.0 / (value * value),
    };
    let n = (kf * (kf / delta).ln() * factor).ceil();
    if !n.is_finite() || n >= u64::MAX as f64 {
        return Err(Error::Unbounded(format!("requirement overflows: {n}")));
    }
    Ok((n as u64).max(k as u64))
}

/// Per-group requirement: `n_0 = log(2K²/δ)/β` (MLE) or
/// `m_0 = 9 log(2K²/δ)/(2Δ²)` (MV), rounded up.
pub fn group_requirement(k: usize, delta: f64, kind: BoundKind, value: f64) -> Result<u64> {
    check_delta(delta)?;
    check_value(kind, value)?;
    let kf = k as f64;
    let log_term = (2.0 * kf * kf / delta).ln();
    let n = match kind {
        BoundKind::Mle => log_term / value,
        BoundKind::Mv => 9.0 * log_term / (2.0 * value * value),
    }
    .ceil()
    .max(0.0);
    if !n.is_finite() || n >= u64::MAX as f64 {
        return Err(Error::Unbounded(format!("requirement overflows: {n}")));
    }
    Ok(n as u64)
}

fn union_bound(n: usize, p: &[f64], m: usize, tail: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let total: f64 = p
        .iter()
        .map(|&pk| {
            let np = nf * pk;
            if np <= mf {
                1.0
            } else {
                tail(nf, np, mf)
            }
        })
        .sum();
    (1.0 - total).clamp(0.0, 1.0)
}

/// `1 − Σ_k exp(−2(n p_k − m)²/(n p_k))` for `P(min_k n_k ≥ m)` with `n`
/// multinomial draws. Terms with `n p_k ≤ m` count as 1, which makes the
/// bound trivial.
///
/// The per-class tail used here is four times sharper in the exponent than
/// the multiplicative Chernoff bound and is not a valid upper bound on
/// `P(n_k < m)` in general; see [`multinomial_min_bound_conservative`].
pub fn multinomial_min_bound(n: usize, p: &[f64], m: usize) -> f64 {
    union_bound(n, p, m, |_, np, m| (-2.0 * (np - m).powi(2) / np).exp())
}

/// Same union bound with each tail taken as the smaller of the Chernoff
/// `exp(−(n p_k − m)²/(2 n p_k))` and Hoeffding `exp(−2(n p_k − m)²/n)`
/// bounds, both of which hold for every `n`, `p_k` and `m < n p_k`.
pub fn multinomial_min_bound_conservative(n: usize, p: &[f64], m: usize) -> f64 {
    union_bound(n, p, m, |n, np, m| {
        let d2 = (np - m).powi(2);
        (-d2 / (2.0 * np)).exp().min((-2.0 * d2 / n).exp())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub k: usize,
    pub delta: f64,
    /// Gap that produced `value`. For MV this is `value` itself.
    pub gap: Option<f64>,
    /// Dual value `inf_b β*_b(Δ/3)`; MLE only.
    pub dual_value: Option<f64>,
    /// Smallest class (MLE) or region (MV) count the bound was evaluated at.
    pub min_count: usize,
    /// `n_0` (MLE) or `m_0` (MV).
    pub group_requirement: u64,
    pub required_n: u64,
    pub recovery_lower_bound: f64,
}

/// Recovery bound at the given counts plus both sample-size requirements.
pub fn bound_report(
    kind: BoundKind,
    k: usize,
    delta: f64,
    value: f64,
    counts: &[usize],
) -> Result<BoundReport> {
    let required_n = corollary_n(k, delta, kind, value)?;
    let group_requirement = group_requirement(k, delta, kind, value)?;
    let (gap, dual_value, recovery_lower_bound) = match kind {
        BoundKind::Mle => (None, Some(value), thm1_bound(k, counts, value)),
        BoundKind::Mv => (Some(value), None, thm2_bound(k, counts, value)),
    };
    Ok(BoundReport {
        kind,
        k,
        delta,
        gap,
        dual_value,
        min_count: min_count(counts),
        group_requirement,
        required_n,
        recovery_lower_bound,
    })
}
