//! Permutation estimators: maximum likelihood, majority vote and greedy.
//!
//! All three read the same sufficient statistics, gathered in one pass by
//! [`Tally`]: the class-by-region log-likelihood matrix
//! `w(k, b) = Σ_{i: y_i = k} log(λ_b f_b(x_i))`, the class counts `n_k`, the
//! region counts `m_b` and the region-by-class vote table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{self, WeightMatrix};
use crate::mixtures::{argmax_lowest, LabeledSample, MixingMeasure, Permutation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// A region received no samples (MV), or a class has none (greedy).
    EmptyRegion,
    /// The winning label of some region is tied.
    MajorityTie,
    /// Two regions (or classes) elected the same partner.
    NonBijective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Estimate {
    Recovered { permutation: Permutation },
    Failure { reason: FailureReason },
}

impl Estimate {
    pub fn permutation(&self) -> Option<&Permutation> {
        match self {
            Estimate::Recovered { permutation } => Some(permutation),
            Estimate::Failure { .. } => None,
        }
    }

    pub fn failure(&self) -> Option<FailureReason> {
        match self {
            Estimate::Recovered { .. } => None,
            Estimate::Failure { reason } => Some(*reason),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub class_counts: Vec<usize>,
    pub region_counts: Vec<usize>,
    /// `ℓ_n / n` of the returned permutation; absent on failure.
    pub log_likelihood: Option<f64>,
    /// Classes with no samples (their weight row is all zeros).
    pub unconstrained_classes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutcome {
    pub result: Estimate,
    pub diagnostics: Diagnostics,
}

impl EstimateOutcome {
    pub fn permutation(&self) -> Option<&Permutation> {
        self.result.permutation()
    }

    pub fn recovers(&self, truth: &Permutation) -> bool {
        self.permutation() == Some(truth)
    }
}

/// Running sufficient statistics for the three estimators.
#[derive(Clone, Debug)]
pub struct Tally {
    k: usize,
    n: usize,
    weights: WeightMatrix,
    class_counts: Vec<usize>,
    region_counts: Vec<usize>,
    /// `votes[b * k + class]`
    votes: Vec<usize>,
}

impl Tally {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            n: 0,
            weights: WeightMatrix::zeros(k),
            class_counts: vec![0; k],
            region_counts: vec![0; k],
            votes: vec![0; k * k],
        }
    }

    /// Add one sample of class `y` with `scores[b] = log(λ_b f_b(x))`.
    pub fn push(&mut self, y: usize, scores: &[f64]) {
        debug_assert_eq!(scores.len(), self.k);
        let region = argmax_lowest(scores);
        for (b, s) in scores.iter().enumerate() {
            self.weights.add(y, b, *s);
        }
        self.class_counts[y] += 1;
        self.region_counts[region] += 1;
        self.votes[region * self.k + y] += 1;
        self.n += 1;
    }

    pub fn from_data(model: &MixingMeasure, data: &[LabeledSample]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("no labeled samples".into()));
        }
        let k = model.k();
        let mut tally = Self::new(k);
        let mut scores = vec![0.0; k];
        for s in data {
            if s.y >= k {
                return Err(Error::LabelOutOfRange { label: s.y, k });
            }
            if s.x.len() != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    got: s.x.len(),
                });
            }
            model.weighted_log_densities_into(&s.x, &mut scores);
            tally.push(s.y, &scores);
        }
        Ok(tally)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn region_counts(&self) -> &[usize] {
        &self.region_counts
    }

    /// Number of samples of `class` that fell in `region`.
    pub fn votes(&self, region: usize, class: usize) -> usize {
        self.votes[region * self.k + class]
    }

    fn outcome(&self, result: std::result::Result<Permutation, FailureReason>) -> EstimateOutcome {
        let log_likelihood = result
            .as_ref()
            .ok()
            .map(|p| self.weights.total(p) / self.n as f64);
        EstimateOutcome {
            result: match result {
                Ok(permutation) => Estimate::Recovered { permutation },
                Err(reason) => Estimate::Failure { reason },
            },
            diagnostics: Diagnostics {
                class_counts: self.class_counts.clone(),
                region_counts: self.region_counts.clone(),
                log_likelihood,
                unconstrained_classes: (0..self.k).filter(|&c| self.class_counts[c] == 0).collect(),
            },
        }
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("no labeled samples".into()));
        }
        Ok(())
    }

    pub fn mle(&self) -> Result<EstimateOutcome> {
        self.check_nonempty()?;
        let (perm, _) = matching::solve(&self.weights);
        Ok(self.outcome(Ok(perm)))
    }

    pub fn mv(&self) -> Result<EstimateOutcome> {
        self.check_nonempty()?;
        Ok(self.outcome(self.majority_assignment()))
    }

    pub fn greedy(&self) -> Result<EstimateOutcome> {
        self.check_nonempty()?;
        let result = if self.class_counts.contains(&0) {
            Err(FailureReason::EmptyRegion)
        } else {
            greedy_assignment(&self.weights)
        };
        Ok(self.outcome(result))
    }

    fn majority_assignment(&self) -> std::result::Result<Permutation, FailureReason> {
        let k = self.k;
        if self.region_counts.contains(&0) {
            return Err(FailureReason::EmptyRegion);
        }
        let mut winners = Vec::with_capacity(k);
        for b in 0..k {
            let row = &self.votes[b * k..(b + 1) * k];
            let top = *row.iter().max().expect("k >= 1");
            if row.iter().filter(|&&c| c == top).count() > 1 {
                return Err(FailureReason::MajorityTie);
            }
            winners.push(row.iter().position(|&c| c == top).expect("max exists"));
        }
        // winners is the inverse map region -> class.
        Permutation::new(winners)
            .map(|inv| inv.inverse())
            .map_err(|_| FailureReason::NonBijective)
    }
}

/// Row-wise argmax of `w` (lowest index on ties), if it is a bijection.
pub fn greedy_assignment(w: &WeightMatrix) -> std::result::Result<Permutation, FailureReason> {
    let cols = (0..w.k()).map(|r| argmax_lowest(w.row(r))).collect();
    Permutation::new(cols).map_err(|_| FailureReason::NonBijective)
}

/// Maximum-likelihood permutation via maximum-weight matching.
pub fn mle_estimate(model: &MixingMeasure, data: &[LabeledSample]) -> Result<EstimateOutcome> {
    Tally::from_data(model, data)?.mle()
}

/// Majority vote over the decision regions of `model`.
pub fn mv_estimate(model: &MixingMeasure, data: &[LabeledSample]) -> Result<EstimateOutcome> {
    Tally::from_data(model, data)?.mv()
}

/// Per-class argmax of the weight matrix.
pub fn greedy_estimate(model: &MixingMeasure, data: &[LabeledSample]) -> Result<EstimateOutcome> {
    Tally::from_data(model, data)?.greedy()
}

/// `ℓ_n(perm; model) = (1/n) Σ_i log(λ_{perm(y_i)} f_{perm(y_i)}(x_i))`.
pub fn log_likelihood(
    model: &MixingMeasure,
    perm: &Permutation,
    data: &[LabeledSample],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no labeled samples".into()));
    }
    let mut total = 0.0;
    for s in data {
        let scores = model.weighted_log_densities(&s.x)?;
        total += scores[perm.region_of_class(s.y)];
    }
    Ok(total / data.len() as f64)
}
