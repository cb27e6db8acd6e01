//! Misclassification risk of a plug-in classifier under the true model.

use serde::{Deserialize, Serialize};

use super::{check_pair, mc_fold, McEstimate, Moments, TAG_TRUTH};
use crate::error::{Error, Result};
use crate::mixtures::{argmax_lowest, MixingMeasure, Permutation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// `P(classify(Λ, π, X) ≠ Y)`.
    pub error: McEstimate,
    /// `P(classify(Λ*, π*, X) ≠ Y)` on the same draws.
    pub bayes: McEstimate,
    /// Paired difference `error − bayes`.
    pub excess: McEstimate,
    pub samples_used: usize,
    pub seed: u64,
}

/// Error rate of `(model, pi)` against draws from `(truth, pi_star)`, with
/// the Bayes rate and the paired excess risk from the same draws.
pub fn misclassification_rate(
    model: &MixingMeasure,
    pi: &Permutation,
    truth: &MixingMeasure,
    pi_star: &Permutation,
    mc_samples: usize,
    seed: u64,
) -> Result<RiskReport> {
    if model.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            got: model.dim(),
        });
    }
    if pi.len() != model.k() {
        return Err(Error::InvalidPermutation(format!(
            "permutation of size {} for {} atoms",
            pi.len(),
            model.k()
        )));
    }
    check_pair(truth, truth, pi_star)?;
    if mc_samples == 0 {
        return Err(Error::InvalidInput("mc_samples must be at least 1".into()));
    }
    let (km, kt) = (model.k(), truth.k());
    let chunks = mc_fold(
        truth,
        pi_star,
        mc_samples,
        seed,
        TAG_TRUTH,
        || ([Moments::default(); 3], vec![0.0; km], vec![0.0; kt]),
        |(acc, sm, st), y, _, x| {
            model.weighted_log_densities_into(x, sm);
            truth.weighted_log_densities_into(x, st);
            let e1 = f64::from(u8::from(pi.class_of_region(argmax_lowest(sm)) != y));
            let e0 = f64::from(u8::from(pi_star.class_of_region(argmax_lowest(st)) != y));
            acc[0].push(e1);
            acc[1].push(e0);
            acc[2].push(e1 - e0);
        },
    );
    let total = chunks
        .iter()
        .fold([Moments::default(); 3], |mut t, (m, _, _)| {
            for (a, b) in t.iter_mut().zip(m) {
                *a = a.merge(b);
            }
            t
        });
    Ok(RiskReport {
        error: total[0].estimate(),
        bayes: total[1].estimate(),
        excess: total[2].estimate(),
        samples_used: total[0].n,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::{ComponentDensity, Gaussian};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn two_gaussians(mu: f64) -> MixingMeasure {
        let f = |m: f64| -> ComponentDensity { Gaussian::isotropic(vec![m], 1.0).unwrap().into() };
        MixingMeasure::new(vec![0.5, 0.5], vec![f(-mu), f(mu)]).unwrap()
    }

    #[test]
    fn paired_identity_has_exactly_zero_excess() {
        let m = two_gaussians(1.0);
        let pi = Permutation::identity(2);
        let r = misclassification_rate(&m, &pi, &m, &pi, 50_000, 3).unwrap();
        assert_eq!(r.excess.value, 0.0);
        assert_eq!(r.excess.half_width, 0.0);
        assert_eq!(r.error, r.bayes);
    }

    #[test]
    fn bayes_rate_closed_form() {
        let m = two_gaussians(1.0);
        let pi = Permutation::identity(2);
        let r = misclassification_rate(&m, &pi, &m, &pi, 100_000, 8).unwrap();
        let exact = Normal::standard().cdf(-1.0);
        assert!((exact - 0.1587).abs() < 1e-4);
        assert!(r.bayes.contains(exact), "{:?} vs {exact}", r.bayes);
    }

    #[test]
    fn swapped_assignment_complements_bayes() {
        let m = two_gaussians(3.0);
        let pi = Permutation::identity(2);
        let swap = Permutation::new(vec![1, 0]).unwrap();
        let r = misclassification_rate(&m, &swap, &m, &pi, 50_000, 2).unwrap();
        assert!((r.error.value - (1.0 - r.bayes.value)).abs() < 1e-12);
        assert!(r.excess.value > 0.9);
    }

    #[test]
    fn model_may_differ_in_size() {
        let truth = two_gaussians(1.0);
        let f: ComponentDensity = Gaussian::isotropic(vec![0.0], 1.0).unwrap().into();
        let one = MixingMeasure::new(vec![1.0], vec![f]).unwrap();
        let r = misclassification_rate(
            &one,
            &Permutation::identity(1),
            &truth,
            &Permutation::identity(2),
            20_000,
            1,
        )
        .unwrap();
        assert!((r.error.value - 0.5).abs() < r.error.half_width + 1e-12);
        assert!(misclassification_rate(
            &one,
            &Permutation::identity(2),
            &truth,
            &Permutation::identity(2),
            10,
            1
        )
        .is_err());
        assert!(misclassification_rate(
            &truth,
            &Permutation::identity(2),
            &truth,
            &Permutation::identity(2),
            0,
            1
        )
        .is_err());
    }
}
