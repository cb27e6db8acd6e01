//! Total variation distance `½∫|f − g|` between component densities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{McEstimate, Moments};
use crate::error::{Error, Result};
use crate::mixtures::ComponentDensity;
use crate::par;

/// Envelope half-width in standard deviations for 1-D quadrature.
pub const ENVELOPE_SDS: f64 = 10.0;

const PANELS: usize = 256;
const MAX_DEPTH: u32 = 40;
const TAG_TV: u64 = 0x7D;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TvMethod {
    /// Adaptive Simpson over the union of the ±10σ envelopes; d = 1 only.
    Quadrature1d { tol: f64 },
    /// Importance sampling from `(f + g)/2`; the integrand is bounded by 2.
    MonteCarlo { samples: usize, seed: u64 },
}

impl TvMethod {
    pub fn quadrature() -> Self {
        TvMethod::Quadrature1d { tol: 1e-10 }
    }

    /// Quadrature for 1-D inputs, Monte Carlo otherwise.
    pub fn auto(dim: usize, samples: usize, seed: u64) -> Self {
        if dim == 1 {
            Self::quadrature()
        } else {
            TvMethod::MonteCarlo { samples, seed }
        }
    }

    pub(crate) fn with_seed(self, seed: u64) -> Self {
        match self {
            TvMethod::MonteCarlo { samples, .. } => TvMethod::MonteCarlo { samples, seed },
            q => q,
        }
    }
}

pub fn tv_distance(
    f: &ComponentDensity,
    g: &ComponentDensity,
    method: TvMethod,
) -> Result<McEstimate> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    match method {
        TvMethod::Quadrature1d { tol } => {
            if f.dim() != 1 {
                return Err(Error::Unsupported(format!(
                    "quadrature TV needs d = 1, got d = {}",
                    f.dim()
                )));
            }
            if tol.is_nan() || tol <= 0.0 {
                return Err(Error::InvalidInput(
                    "quadrature tolerance must be positive".into(),
                ));
            }
            Ok(tv_quadrature(f, g, tol))
        }
        TvMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidInput(
                    "Monte-Carlo TV needs samples > 0".into(),
                ));
            }
            Ok(tv_monte_carlo(f, g, samples, seed))
        }
    }
}

fn tv_quadrature(f: &ComponentDensity, g: &ComponentDensity, tol: f64) -> McEstimate {
    if f == g {
        return McEstimate::exact(0.0);
    }
    let (a0, b0) = f.envelope_1d(ENVELOPE_SDS);
    let (a1, b1) = g.envelope_1d(ENVELOPE_SDS);
    let (lo, hi) = (a0.min(a1), b0.max(b1));
    let integrand = |x: f64| (f.log_pdf(&[x]).exp() - g.log_pdf(&[x]).exp()).abs();
    let width = (hi - lo) / PANELS as f64;
    let panel_tol = tol / PANELS as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for p in 0..PANELS {
        let a = lo + p as f64 * width;
        let b = if p + 1 == PANELS { hi } else { a + width };
        let (v, e) = adaptive_simpson(&integrand, a, b, panel_tol);
        total += v;
        err += e;
    }
    McEstimate {
        value: (0.5 * total).clamp(0.0, 1.0),
        half_width: 0.5 * err,
    }
}

/// Adaptive Simpson; returns (integral, error estimate).
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return (left + right + delta / 15.0, delta.abs() / 15.0);
    }
    let (l, le) = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let (r, re) = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    (l + r, le + re)
}

fn tv_monte_carlo(
    f: &ComponentDensity,
    g: &ComponentDensity,
    samples: usize,
    seed: u64,
) -> McEstimate {
    let parts = par::map_chunks(samples, |c, len| {
        let mut rng = par::substream(seed, TAG_TV, c as u64);
        let mut m = Moments::default();
        for _ in 0..len {
            let x = if rng.random::<bool>() {
                f.sample(&mut rng)
            } else {
                g.sample(&mut rng)
            };
            // |f - g| / ((f + g)/2) = 2|tanh((log f - log g)/2)|, halved for TV.
            m.push((0.5 * (f.log_pdf(&x) - g.log_pdf(&x))).tanh().abs());
        }
        m
    });
    parts
        .iter()
        .fold(Moments::default(), |acc, m| acc.merge(m))
        .estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::{Gaussian, GaussianMixture, KernelDensity};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn g1(mean: f64, var: f64) -> ComponentDensity {
        Gaussian::isotropic(vec![mean], var).unwrap().into()
    }

    fn phi(x: f64) -> f64 {
        Normal::standard().cdf(x)
    }

    #[test]
    fn identical_densities_have_zero_distance() {
        let f = g1(0.3, 2.0);
        assert!(tv_distance(&f, &f, TvMethod::quadrature()).unwrap().value < 1e-6);
        let mc = tv_distance(
            &f,
            &f,
            TvMethod::MonteCarlo {
                samples: 1000,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(mc.value, 0.0);
    }

    #[test]
    fn shifted_unit_gaussians_match_closed_form() {
        for mu in [0.1, 0.5, 2.0, 5.0] {
            let expected = 2.0 * phi(mu / 2.0) - 1.0;
            let q = tv_distance(&g1(0.0, 1.0), &g1(mu, 1.0), TvMethod::quadrature()).unwrap();
            assert!(
                (q.value - expected).abs() < 1e-7,
                "mu={mu}: {} vs {expected}",
                q.value
            );
        }
        let expected = 2.0 * phi(1.0) - 1.0;
        assert!((expected - 0.6827).abs() < 1e-4);
        let mc = tv_distance(
            &g1(0.0, 1.0),
            &g1(2.0, 1.0),
            TvMethod::MonteCarlo {
                samples: 200_000,
                seed: 3,
            },
        )
        .unwrap();
        assert!(mc.contains(expected), "{mc:?} vs {expected}");
    }

    #[test]
    fn symmetric_and_bounded() {
        let f: ComponentDensity = GaussianMixture::new(
            vec![0.3, 0.7],
            vec![
                Gaussian::isotropic(vec![-1.0], 0.2).unwrap(),
                Gaussian::isotropic(vec![1.5], 0.5).unwrap(),
            ],
        )
        .unwrap()
        .into();
        let g: ComponentDensity = KernelDensity::new(vec![vec![0.0], vec![0.4], vec![2.0]], 0.3)
            .unwrap()
            .into();
        let ab = tv_distance(&f, &g, TvMethod::quadrature()).unwrap();
        let ba = tv_distance(&g, &f, TvMethod::quadrature()).unwrap();
        assert!((ab.value - ba.value).abs() < 1e-8);
        assert!((0.0..=1.0).contains(&ab.value));
        let mc = tv_distance(
            &f,
            &g,
            TvMethod::MonteCarlo {
                samples: 100_000,
                seed: 8,
            },
        )
        .unwrap();
        let mc_rev = tv_distance(
            &g,
            &f,
            TvMethod::MonteCarlo {
                samples: 100_000,
                seed: 8,
            },
        )
        .unwrap();
        assert!((mc.value - mc_rev.value).abs() <= mc.half_width + mc_rev.half_width);
        assert!((mc.value - ab.value).abs() <= mc.half_width + 1e-6);
    }

    #[test]
    fn multivariate_monte_carlo_matches_projection() {
        // Equal isotropic covariances: TV depends only on the Mahalanobis gap.
        let f: ComponentDensity = Gaussian::isotropic(vec![0.0, 0.0], 1.0).unwrap().into();
        let g: ComponentDensity = Gaussian::isotropic(vec![0.6, 0.8], 1.0).unwrap().into();
        let expected = 2.0 * phi(0.5) - 1.0;
        let mc = tv_distance(
            &f,
            &g,
            TvMethod::MonteCarlo {
                samples: 200_000,
                seed: 4,
            },
        )
        .unwrap();
        assert!(mc.contains(expected), "{mc:?} vs {expected}");
    }

    #[test]
    fn errors() {
        let f = g1(0.0, 1.0);
        let g: ComponentDensity = Gaussian::isotropic(vec![0.0, 0.0], 1.0).unwrap().into();
        assert!(tv_distance(&f, &g, TvMethod::quadrature()).is_err());
        assert!(tv_distance(&g, &g, TvMethod::quadrature()).is_err());
        assert!(tv_distance(
            &f,
            &f,
            TvMethod::MonteCarlo {
                samples: 0,
                seed: 0
            }
        )
        .is_err());
    }
}
