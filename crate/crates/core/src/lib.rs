//! Semi-supervised permutation learning over finite mixing measures.
//!
//! A [`MixingMeasure`] fixes K weighted component densities and therefore K
//! decision regions. Labeled samples are only needed to learn which class
//! belongs to which region. This crate provides:
//!
//! * [`mixtures`]: component densities, mixing measures, regions, classifiers
//!   and a generative sampler.
//! * [`matching`]: exact (Hungarian) and second-best maximum-weight perfect
//!   matching, plus a brute-force reference.
//! * [`estimators`]: the maximum-likelihood, majority-vote and greedy
//!   permutation estimators.
//! * [`analysis`]: gaps, Legendre duals, recovery/sample-complexity bounds,
//!   total variation and Wasserstein-1 distances, misclassification risk.
//! * [`harness`]: synthetic experiment families and seeded recovery trials.
//!
//! Monte-Carlo loops run on rayon when the `parallel` feature is enabled
//! (default). Results never depend on the thread count: every chunk of work
//! draws from its own RNG stream derived from the caller's seed.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod matching;
pub mod mixtures;
pub mod par;

pub use error::{Error, Result};
pub use estimators::{greedy_estimate, mle_estimate, mv_estimate, EstimateOutcome};
pub use matching::{
    brute_force_matching, max_weight_matching, second_best_matching, MatchingResult, WeightMatrix,
};
pub use mixtures::{ComponentDensity, LabeledSample, MixingMeasure, Permutation};
