//! Fenchel-Legendre duals of centered log-MGFs, estimated from samples.
//!
//! For a sample `u_1..u_n` with mean `ū`, the empirical centered log-MGF is
//! `β(s) = log (1/n) Σ exp(s (u_i − ū))` and the dual is
//! `β*(t) = sup_{s ≥ 0} (s t − β(s))`. Only `s ≥ 0` matters for `t ≥ 0`
//! because `β ≥ 0` by Jensen and `s t ≤ 0` for negative `s`.
//!
//! The empirical MGF is only trusted where the importance weights
//! `exp(s (u_i − ū))` keep an effective sample size of at least
//! `max(5% of n, 30)`. Past that point the estimate is dominated by a few
//! extreme draws.

use serde::{Deserialize, Serialize};

use super::{check_pair, mc_fold};
use crate::error::{Error, Result};
use crate::mixtures::{log_sum_exp, MixingMeasure, Permutation};

const TAG_DUAL: u64 = 0xD0A1;
const ESS_FRACTION: f64 = 0.05;
const ESS_FLOOR: f64 = 30.0;
const GRID_START: f64 = 0.01;
const GRID_RATIO: f64 = 1.25;
const GRID_MAX_STEPS: usize = 200;
const GOLDEN_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualStatus {
    /// Interior maximiser inside the stable range.
    Ok,
    /// Maximiser sits at the edge of the stable range; the value is a lower
    /// bound on the dual of the true distribution.
    Truncated,
    /// The sample is constant: the dual is `+∞` for every `t > 0`.
    Degenerate,
    /// No `s > 0` passed the stability check. The value is reported as 0.
    Divergent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualEstimate {
    pub t: f64,
    #[serde(with = "extended_f64")]
    pub value: f64,
    /// Maximising `s`.
    pub s_opt: f64,
    /// Upper edge of the stable `s` range.
    pub s_max: f64,
    pub status: DualStatus,
}

impl DualEstimate {
    /// True when the bound using this value carries no information.
    pub fn is_vacuous(&self) -> bool {
        self.status == DualStatus::Divergent || self.value <= 0.0
    }
}

/// JSON has no infinity; encode it as the string `"inf"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad number {t}"))),
        }
    }
}

fn ess(centered: &[f64], s: f64, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(centered.iter().map(|c| s * c));
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut w1, mut w2) = (0.0, 0.0);
    for v in buf.iter() {
        let w = (v - max).exp();
        w1 += w;
        w2 += w * w;
    }
    w1 * w1 / w2
}

fn log_mgf(centered: &[f64], s: f64, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(centered.iter().map(|c| s * c));
    log_sum_exp(buf) - (centered.len() as f64).ln()
}

/// Dual `β*(t)` of the centered empirical log-MGF of `samples`.
pub fn legendre_dual(samples: &[f64], t: f64) -> Result<DualEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("dual needs at least one sample".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "dual argument must be >= 0, got {t}"
        )));
    }
    if samples.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample in dual".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let centered: Vec<f64> = samples.iter().map(|u| u - mean).collect();
    let sd = (centered.iter().map(|c| c * c).sum::<f64>() / n).sqrt();
    let zero = |status, value| DualEstimate {
        t,
        value,
        s_opt: 0.0,
        s_max: 0.0,
        status,
    };
    if sd <= 1e-12 * mean.abs().max(1.0) {
        let value = if t > 0.0 { f64::INFINITY } else { 0.0 };
        return Ok(zero(DualStatus::Degenerate, value));
    }

    let mut buf = Vec::with_capacity(centered.len());
    let threshold = (ESS_FRACTION * n).max(ESS_FLOOR);
    let mut s_max = 0.0;
    let mut s = GRID_START / sd;
    for _ in 0..GRID_MAX_STEPS {
        if ess(&centered, s, &mut buf) < threshold {
            break;
        }
        s_max = s;
        s *= GRID_RATIO;
    }
    if s_max == 0.0 {
        return Ok(zero(DualStatus::Divergent, 0.0));
    }
    if t == 0.0 {
        return Ok(DualEstimate {
            s_max,
            ..zero(DualStatus::Ok, 0.0)
        });
    }

    let mut objective = |s: f64| s * t - log_mgf(&centered, s, &mut buf);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, s_max);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-12 * s_max {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let s_opt = 0.5 * (a + b);
    let value = objective(s_opt).max(0.0);
    let status = if s_opt >= s_max * (1.0 - 1e-6) {
        DualStatus::Truncated
    } else {
        DualStatus::Ok
    };
    Ok(DualEstimate {
        t,
        value,
        s_opt,
        s_max,
        status,
    })
}

fn draw_scores(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let identity = Permutation::identity(truth.k());
    check_pair(model, truth, &identity)?;
    if mc_samples == 0 {
        return Err(Error::InvalidInput("mc_samples must be at least 1".into()));
    }
    let k = model.k();
    let chunks = mc_fold(
        truth,
        &identity,
        mc_samples,
        seed,
        TAG_DUAL,
        || (vec![Vec::new(); k], vec![0.0; k]),
        |(cols, scores), _, _, x| {
            model.weighted_log_densities_into(x, scores);
            for (col, s) in cols.iter_mut().zip(scores.iter()) {
                col.push(*s);
            }
        },
    );
    let mut cols = vec![Vec::with_capacity(mc_samples); k];
    for (chunk, _) in chunks {
        for (col, part) in cols.iter_mut().zip(chunk) {
            col.extend(part);
        }
    }
    Ok(cols)
}

/// `β*_b(t)` for `U_b = log λ_b f_b(X)` with `X` drawn from the true marginal.
pub fn dual_beta_star(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    b: usize,
    t: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<DualEstimate> {
    if b >= model.k() {
        return Err(Error::InvalidInput(format!(
            "region {b} out of range for {} atoms",
            model.k()
        )));
    }
    let cols = draw_scores(model, truth, mc_samples, seed)?;
    legendre_dual(&cols[b], t)
}

/// `β*_b(t)` for every region, all computed from one set of draws.
pub fn dual_beta_star_all(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    t: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<DualEstimate>> {
    draw_scores(model, truth, mc_samples, seed)?
        .iter()
        .map(|col| legendre_dual(col, t))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaStarInf {
    pub t: f64,
    #[serde(with = "extended_f64")]
    pub value: f64,
    pub argmin_region: usize,
    pub per_region: Vec<DualEstimate>,
}

impl BetaStarInf {
    pub fn is_vacuous(&self) -> bool {
        self.per_region[self.argmin_region].is_vacuous()
    }
}

/// `inf_b β*_b(t)`. A divergent region contributes 0.
pub fn beta_star_inf(
    model: &MixingMeasure,
    truth: &MixingMeasure,
    t: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<BetaStarInf> {
    let per_region = dual_beta_star_all(model, truth, t, mc_samples, seed)?;
    let (argmin_region, value) =
        per_region
            .iter()
            .map(|d| d.value)
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (b, v)| if v < best.1 { (b, v) } else { best },
            );
    Ok(BetaStarInf {
        t,
        value,
        argmin_region,
        per_region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::{ComponentDensity, Gaussian};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn normal_sample(m: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + sigma * z
            })
            .collect()
    }

    #[test]
    fn zero_at_origin() {
        let u = normal_sample(1.0, 2.0, 1000, 1);
        let d = legendre_dual(&u, 0.0).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.status, DualStatus::Ok);
    }

    #[test]
    fn gaussian_closed_form_within_five_percent() {
        for (sigma, seed) in [(0.5, 1), (1.0, 2), (3.0, 3)] {
            let u = normal_sample(-4.0, sigma, 100_000, seed);
            for frac in [0.1, 0.5, 1.0] {
                let t = frac * sigma;
                let d = legendre_dual(&u, t).unwrap();
                let exact = t * t / (2.0 * sigma * sigma);
                let rel = (d.value - exact).abs() / exact;
                assert!(rel <= 0.05, "sigma {sigma} t {t}: {} vs {exact}", d.value);
                assert_eq!(d.status, DualStatus::Ok);
            }
        }
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let d = legendre_dual(&[3.0; 50], 0.1).unwrap();
        assert_eq!(d.status, DualStatus::Degenerate);
        assert!(d.value.is_infinite());
        assert_eq!(legendre_dual(&[3.0; 50], 0.0).unwrap().value, 0.0);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"inf\""));
        let back: DualEstimate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn tiny_sample_is_divergent() {
        // Fewer draws than the ESS floor: no s > 0 is trusted.
        let d = legendre_dual(&[0.0, 1.0, 2.0], 0.5).unwrap();
        assert_eq!(d.status, DualStatus::Divergent);
        assert_eq!(d.value, 0.0);
        assert!(d.is_vacuous());
    }

    #[test]
    fn heavy_right_tail_truncates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let exp = Exp::new(1.0).unwrap();
        let u: Vec<f64> = (0..20_000).map(|_| exp.sample(&mut rng)).collect();
        // The exponential MGF blows up at s = 1; a large t pushes the
        // maximiser to the edge of the stable range.
        let d = legendre_dual(&u, 50.0).unwrap();
        assert_eq!(d.status, DualStatus::Truncated);
        assert!(d.value.is_finite() && d.value > 0.0);
        assert!(d.s_max < 1.0);
    }

    #[test]
    fn dual_is_nondecreasing_in_t() {
        let u = normal_sample(0.0, 1.0, 20_000, 8);
        let mut last = 0.0;
        for i in 0..20 {
            let v = legendre_dual(&u, i as f64 * 0.1).unwrap().value;
            assert!(v >= last - 1e-9);
            last = v;
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(legendre_dual(&[], 1.0).is_err());
        assert!(legendre_dual(&[1.0, 2.0], -1.0).is_err());
        assert!(legendre_dual(&[1.0, f64::NAN], 1.0).is_err());
    }

    fn two_gaussians() -> MixingMeasure {
        let f = |m: f64| -> ComponentDensity { Gaussian::isotropic(vec![m], 1.0).unwrap().into() };
        MixingMeasure::new(vec![0.3, 0.7], vec![f(-1.5), f(1.5)]).unwrap()
    }

    #[test]
    fn mixture_duals_are_consistent() {
        let m = two_gaussians();
        let all = dual_beta_star_all(&m, &m, 0.2, 20_000, 4).unwrap();
        assert_eq!(all.len(), 2);
        for (b, d) in all.iter().enumerate() {
            assert_eq!(*d, dual_beta_star(&m, &m, b, 0.2, 20_000, 4).unwrap());
            assert!(d.value > 0.0);
        }
        let inf = beta_star_inf(&m, &m, 0.2, 20_000, 4).unwrap();
        assert_eq!(inf.value, all[0].value.min(all[1].value));
        assert!(!inf.is_vacuous());
        assert!(dual_beta_star(&m, &m, 2, 0.2, 10, 4).is_err());
    }
}
