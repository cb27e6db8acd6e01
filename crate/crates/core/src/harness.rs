//! Synthetic experiment families and seeded Monte-Carlo recovery trials.
//!
//! The generator constants below are declared choices:
//!
//! * grid: `r × c` with `r` the largest divisor of `K` not above `√K`, unit
//!   spacing, centered at the origin, laid out in the first two coordinates;
//! * covariances: `A Aᵀ + 0.1 I` with `A_ij ~ N(0, 0.15²)`, rescaled so the
//!   largest eigenvalue is `0.25²` (`0.15²` for nested sub-Gaussians), which
//!   keeps every pair of grid neighbours at total variation above 0.9 at η = 1;
//! * nested families: three sub-Gaussians per atom, offsets `N(0, 0.1²)` per
//!   coordinate;
//! * weights: independent `U(0, 1]`, normalized;
//! * perturbation: mean shift `N(0, 0.1²)` per coordinate, covariance scaled
//!   by 0.5 or 2 with equal probability, weights multiplied by `U(0.8, 1.25)`
//!   and renormalized.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimateOutcome, FailureReason, Tally};
use crate::matching;
use crate::mixtures::{ComponentDensity, Gaussian, GaussianMixture, MixingMeasure, Permutation};
use crate::par;

pub const GRID_MAX_SD: f64 = 0.25;
pub const NESTED_MAX_SD: f64 = 0.15;
pub const NESTED_OFFSET_SD: f64 = 0.1;
pub const NESTED_PARTS: usize = 3;
const COV_ENTRY_SD: f64 = 0.15;
const COV_RIDGE: f64 = 0.1;
const WEIGHT_FACTOR_RANGE: (f64, f64) = (0.8, 1.25);
/// Unnormalized class weights are uniform on this range, so no class is
/// more than twice as likely as another.
pub const CLASS_WEIGHT_RANGE: (f64, f64) = (0.5, 1.0);

const TAG_GENERATE: u64 = 0x6E4;
const TAG_PERTURB: u64 = 0x9E7;
const TAG_TRIAL: u64 = 0x7A1;
const TAG_NOISE: u64 = 0x401;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Family {
    GaussianGrid,
    GaussianGridPerturbed,
    MixtureOfMixtures,
    MixtureOfMixturesPerturbed,
    /// User-supplied truth and model; π* is the identity.
    Custom {
        truth: MixingMeasure,
        model: MixingMeasure,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::GaussianGrid => "gaussian_grid",
            Family::GaussianGridPerturbed => "gaussian_grid_perturbed",
            Family::MixtureOfMixtures => "mixture_of_mixtures",
            Family::MixtureOfMixturesPerturbed => "mixture_of_mixtures_perturbed",
            Family::Custom { .. } => "custom",
        }
    }

    pub fn is_perturbed(&self) -> bool {
        match self {
            Family::GaussianGridPerturbed | Family::MixtureOfMixturesPerturbed => true,
            Family::Custom { truth, model } => truth != model,
            _ => false,
        }
    }

    fn is_nested(&self) -> bool {
        matches!(
            self,
            Family::MixtureOfMixtures | Family::MixtureOfMixturesPerturbed
        )
    }
}

/// Which parts of a mixture [`perturb_mixture_with`] changes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbOptions {
    /// Standard deviation of the per-coordinate mean shift.
    pub mean_shift_sd: f64,
    pub scale_covariance: bool,
    pub perturb_weights: bool,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self {
            mean_shift_sd: 0.1,
            scale_covariance: true,
            perturb_weights: true,
        }
    }
}

impl PerturbOptions {
    pub fn none() -> Self {
        Self {
            mean_shift_sd: 0.0,
            scale_covariance: false,
            perturb_weights: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: Family,
    pub k: usize,
    pub dim: usize,
    pub eta: f64,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub label_noise: f64,
    pub seed: u64,
    #[serde(default)]
    pub perturb: PerturbOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            family: Family::GaussianGrid,
            k: 4,
            dim: 2,
            eta: 1.0,
            n_grid: default_n_grid(),
            trials: 50,
            label_noise: 0.0,
            seed: 0,
            perturb: PerturbOptions::default(),
        }
    }
}

/// `3, 6, …, 99`.
pub fn default_n_grid() -> Vec<usize> {
    (3..=99).step_by(3).collect()
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if let Family::Custom { truth, model } = &self.family {
            if truth.k() != model.k() || truth.dim() != model.dim() {
                return bad("custom truth and model differ in shape".into());
            }
            if truth.k() != self.k || truth.dim() != self.dim {
                return bad(format!(
                    "spec says K={} dim={}, custom truth has K={} dim={}",
                    self.k,
                    self.dim,
                    truth.k(),
                    truth.dim()
                ));
            }
        } else {
            if self.k < 2 {
                return bad(format!("grid families need K >= 2, got {}", self.k));
            }
            if self.dim < 2 {
                return bad(format!("grid families need dim >= 2, got {}", self.dim));
            }
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be > 0, got {}", self.eta));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return bad("n grid must be nonempty and start at n >= 1".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n grid must be strictly increasing".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad(format!(
                "label noise must lie in [0, 1), got {}",
                self.label_noise
            ));
        }
        if self.label_noise > 0.0 && self.k < 2 {
            return bad("label noise needs at least two classes".into());
        }
        let p = &self.perturb;
        if !(p.mean_shift_sd >= 0.0 && p.mean_shift_sd.is_finite()) {
            return bad(format!(
                "mean shift sd must be >= 0, got {}",
                p.mean_shift_sd
            ));
        }
        Ok(())
    }
}

/// Rows and columns of the placement grid.
pub fn grid_shape(k: usize) -> (usize, usize) {
    let rows = (1..=k)
        .filter(|r| r * r <= k && k.is_multiple_of(*r))
        .max()
        .unwrap_or(1);
    (rows, k / rows)
}

/// Grid positions, row-major, centered at the origin with unit spacing.
pub fn grid_positions(k: usize) -> Vec<[f64; 2]> {
    let (rows, cols) = grid_shape(k);
    let (r0, c0) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    (0..k)
        .map(|i| [(i % cols) as f64 - c0, (i / cols) as f64 - r0])
        .collect()
}

fn random_covariance(rng: &mut ChaCha8Rng, dim: usize, max_sd: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        COV_ENTRY_SD * rng.sample::<f64, _>(StandardNormal)
    });
    let mut s = &a * a.transpose() + DMatrix::identity(dim, dim) * COV_RIDGE;
    // Exact symmetry so the Cholesky check never sees rounding asymmetry.
    s = (&s + s.transpose()) * 0.5;
    let top = SymmetricEigen::new(s.clone()).eigenvalues.max();
    s * (max_sd * max_sd / top)
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

fn embed(pos: [f64; 2], dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| if i < 2 { pos[i] } else { 0.0 })
}

/// Draw `(Λ*, π*)` for a spec. π* is always the identity.
pub fn generate_true_mixture(
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<(MixingMeasure, Permutation)> {
    spec.validate()?;
    if let Family::Custom { truth, .. } = &spec.family {
        return Ok((truth.clone(), Permutation::identity(truth.k())));
    }
    let (k, dim, eta) = (spec.k, spec.dim, spec.eta);
    let mut rng = par::substream(seed, TAG_GENERATE, 0);
    let mut components = Vec::with_capacity(k);
    for pos in grid_positions(k) {
        let center = embed(pos, dim);
        let atom: ComponentDensity = if spec.family.is_nested() {
            let mut parts = Vec::with_capacity(NESTED_PARTS);
            for _ in 0..NESTED_PARTS {
                let offset = DVector::from_fn(dim, |_, _| {
                    NESTED_OFFSET_SD * rng.sample::<f64, _>(StandardNormal)
                });
                let cov = random_covariance(&mut rng, dim, NESTED_MAX_SD);
                parts.push(Gaussian::from_parts((&center + offset) * eta, cov)?);
            }
            GaussianMixture::new(random_simplex(&mut rng, NESTED_PARTS), parts)?.into()
        } else {
            let cov = random_covariance(&mut rng, dim, GRID_MAX_SD);
            Gaussian::from_parts(center * eta, cov)?.into()
        };
        components.push(atom);
    }
    let raw: Vec<f64> = (0..k)
        .map(|_| rng.random_range(CLASS_WEIGHT_RANGE.0..=CLASS_WEIGHT_RANGE.1))
        .collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    Ok((
        MixingMeasure::new(weights, components)?,
        Permutation::identity(k),
    ))
}

/// [`perturb_mixture_with`] using the default options.
pub fn perturb_mixture(truth: &MixingMeasure, seed: u64) -> Result<MixingMeasure> {
    perturb_mixture_with(truth, PerturbOptions::default(), seed)
}

/// Shift means, rescale covariances and reweight atoms of `truth`.
///
/// Every random number is drawn whatever the options, so runs that differ
/// only in options share the same underlying draws. With
/// [`PerturbOptions::none`] the result equals `truth`.
pub fn perturb_mixture_with(
    truth: &MixingMeasure,
    opts: PerturbOptions,
    seed: u64,
) -> Result<MixingMeasure> {
    let mut rng = par::substream(seed, TAG_PERTURB, 0);
    let mut perturb_one = |g: &Gaussian| {
        let shift: Vec<f64> = (0..g.dim())
            .map(|_| opts.mean_shift_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let factor = if rng.random::<bool>() { 2.0 } else { 0.5 };
        let g = g.shifted(&shift);
        if opts.scale_covariance {
            g.scaled(factor)
        } else {
            g
        }
    };
    let mut components = Vec::with_capacity(truth.k());
    for c in truth.components() {
        components.push(match c {
            ComponentDensity::Gaussian(g) => ComponentDensity::Gaussian(perturb_one(g)),
            ComponentDensity::GaussianMixture(m) => {
                ComponentDensity::GaussianMixture(m.map_components(&mut perturb_one))
            }
            ComponentDensity::KernelDensity(_) => {
                return Err(Error::Unsupported(
                    "kernel density atoms cannot be perturbed".into(),
                ))
            }
        });
    }
    let factors: Vec<f64> = (0..truth.k())
        .map(|_| rng.random_range(WEIGHT_FACTOR_RANGE.0..WEIGHT_FACTOR_RANGE.1))
        .collect();
    let out = truth.with_components(components)?;
    if opts.perturb_weights {
        let weights = truth
            .weights()
            .iter()
            .zip(&factors)
            .map(|(w, f)| w * f)
            .collect();
        out.reweighted(weights)
    } else {
        Ok(out)
    }
}

/// `(Λ*, π*, Λ)` for a spec: the perturbed families perturb with
/// `spec.perturb`, the others use `Λ = Λ*`.
pub fn experiment_models(
    spec: &ExperimentSpec,
) -> Result<(MixingMeasure, Permutation, MixingMeasure)> {
    let (truth, pi_star) = generate_true_mixture(spec, spec.seed)?;
    let model = match &spec.family {
        Family::Custom { model, .. } => model.clone(),
        f if f.is_perturbed() => perturb_mixture_with(&truth, spec.perturb, spec.seed)?,
        _ => truth.clone(),
    };
    Ok((truth, pi_star, model))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    Greedy,
    Mv,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] =
        [EstimatorKind::Mle, EstimatorKind::Greedy, EstimatorKind::Mv];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::Greedy => "greedy",
            EstimatorKind::Mv => "mv",
        }
    }

    pub fn run(self, tally: &Tally) -> Result<EstimateOutcome> {
        match self {
            EstimatorKind::Mle => tally.mle(),
            EstimatorKind::Greedy => tally.greedy(),
            EstimatorKind::Mv => tally.mv(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub trials: usize,
    pub recovered: usize,
    pub fail_empty: usize,
    pub fail_tie: usize,
    pub fail_nonbij: usize,
    /// Mean of `ℓ_n(π̂)/n` over trials that returned a permutation.
    pub mean_loglik: Option<f64>,
}

impl CurvePoint {
    pub fn frequency(&self) -> f64 {
        self.recovered as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCurve {
    pub spec: ExperimentSpec,
    /// Ordered by estimator (mle, greedy, mv), then by n.
    pub points: Vec<CurvePoint>,
    pub wall_time_secs: f64,
}

impl RecoveryCurve {
    pub fn point(&self, estimator: EstimatorKind, n: usize) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| p.estimator == estimator && p.n == n)
    }

    pub fn frequencies(&self, estimator: EstimatorKind) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.estimator == estimator)
            .map(|p| (p.n, p.frequency()))
            .collect()
    }
}

/// Result of one estimator on one prefix of one trial.
#[derive(Clone, Copy, Debug)]
struct Cell {
    recovered: bool,
    failure: Option<FailureReason>,
    /// The MLE optimum is shared by another permutation, so the returned
    /// one is an arbitrary pick. Scored as a tie rather than a recovery.
    tied_optimum: bool,
    loglik: Option<f64>,
}

/// Replace each label, with probability `rho`, by a uniformly drawn wrong one.
pub fn corrupt_labels(labels: &mut [usize], k: usize, rho: f64, rng: &mut ChaCha8Rng) {
    for y in labels.iter_mut() {
        if rng.random::<f64>() < rho {
            let other = rng.random_range(0..k - 1);
            *y = if other >= *y { other + 1 } else { other };
        }
    }
}

/// Run `f(tally, n)` at every grid size on the prefixes of one trial's data.
///
/// Trial `t` draws its data from substream `(seed, trial, t)` and its label
/// noise from a separate substream, so the first `n` samples are the same
/// for every grid that contains `n`.
pub fn for_each_prefix<F>(
    spec: &ExperimentSpec,
    truth: &MixingMeasure,
    pi_star: &Permutation,
    model: &MixingMeasure,
    trial: usize,
    mut f: F,
) -> Result<()>
where
    F: FnMut(&Tally, usize) -> Result<()>,
{
    let n_max = *spec.n_grid.last().expect("validated grid");
    let mut rng = par::substream(spec.seed, TAG_TRIAL, trial as u64);
    let data = truth.sample_labeled_with(pi_star, n_max, &mut rng)?;
    let mut labels: Vec<usize> = data.iter().map(|s| s.y).collect();
    if spec.label_noise > 0.0 {
        let mut noise = par::substream(spec.seed, TAG_NOISE, trial as u64);
        corrupt_labels(&mut labels, truth.k(), spec.label_noise, &mut noise);
    }
    let mut tally = Tally::new(model.k());
    let mut scores = vec![0.0; model.k()];
    let mut next = 0;
    for &n in &spec.n_grid {
        while next < n {
            model.weighted_log_densities_into(&data[next].x, &mut scores);
            tally.push(labels[next], &scores);
            next += 1;
        }
        f(&tally, n)?;
    }
    Ok(())
}

fn run_trial(
    spec: &ExperimentSpec,
    truth: &MixingMeasure,
    pi_star: &Permutation,
    model: &MixingMeasure,
    trial: usize,
) -> Result<Vec<Cell>> {
    let mut cells = Vec::with_capacity(3 * spec.n_grid.len());
    for_each_prefix(spec, truth, pi_star, model, trial, |tally, _| {
        for est in EstimatorKind::ALL {
            let out = est.run(tally)?;
            let tied_optimum = est == EstimatorKind::Mle
                && !matching::max_weight_matching(tally.weights())?.is_unique;
            cells.push(Cell {
                recovered: out.recovers(pi_star) && !tied_optimum,
                failure: out.result.failure(),
                tied_optimum,
                loglik: out.diagnostics.log_likelihood,
            });
        }
        Ok(())
    })?;
    Ok(cells)
}

/// Recovery frequencies of all three estimators over `spec.trials` trials.
///
/// The pair `(Λ*, Λ)` is fixed across trials. Estimator failures count as
/// non-recovery. Results do not depend on the number of threads.
pub fn run_recovery_experiment(spec: &ExperimentSpec) -> Result<RecoveryCurve> {
    let start = Instant::now();
    let (truth, pi_star, model) = experiment_models(spec)?;
    let per_trial: Vec<Vec<Cell>> = par::map_indexed(spec.trials, |t| {
        run_trial(spec, &truth, &pi_star, &model, t)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let grid = spec.n_grid.len();
    let mut points = Vec::with_capacity(3 * grid);
    for (e, est) in EstimatorKind::ALL.into_iter().enumerate() {
        for (g, &n) in spec.n_grid.iter().enumerate() {
            let mut p = CurvePoint {
                estimator: est,
                n,
                trials: spec.trials,
                recovered: 0,
                fail_empty: 0,
                fail_tie: 0,
                fail_nonbij: 0,
                mean_loglik: None,
            };
            let (mut ll_sum, mut ll_n) = (0.0, 0usize);
            for cells in &per_trial {
                let c = cells[g * 3 + e];
                p.recovered += usize::from(c.recovered);
                match c.failure {
                    Some(FailureReason::EmptyRegion) => p.fail_empty += 1,
                    Some(FailureReason::MajorityTie) => p.fail_tie += 1,
                    Some(FailureReason::NonBijective) => p.fail_nonbij += 1,
                    None if c.tied_optimum => p.fail_tie += 1,
                    None => {}
                }
                if let Some(ll) = c.loglik {
                    ll_sum += ll;
                    ll_n += 1;
                }
            }
            p.mean_loglik = (ll_n > 0).then(|| ll_sum / ll_n as f64);
            points.push(p);
        }
    }
    Ok(RecoveryCurve {
        spec: spec.clone(),
        points,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    family: &'a str,
    #[serde(rename = "K")]
    k: usize,
    dim: usize,
    eta: f64,
    perturbed: bool,
    estimator: &'a str,
    n: usize,
    trials: usize,
    recovered: usize,
    fail_empty: usize,
    fail_tie: usize,
    fail_nonbij: usize,
    mean_loglik: Option<f64>,
    seed: u64,
}

/// Long-format CSV, one row per (estimator, n). Wall time is not written.
pub fn write_curve_csv<W: Write>(curve: &RecoveryCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let spec = &curve.spec;
    for p in &curve.points {
        w.serialize(CsvRow {
            family: spec.family.name(),
            k: spec.k,
            dim: spec.dim,
            eta: spec.eta,
            perturbed: spec.family.is_perturbed(),
            estimator: p.estimator.name(),
            n: p.n,
            trials: p.trials,
            recovered: p.recovered,
            fail_empty: p.fail_empty,
            fail_tie: p.fail_tie,
            fail_nonbij: p.fail_nonbij,
            mean_loglik: p.mean_loglik,
            seed: spec.seed,
        })
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

pub fn curve_csv_string(curve: &RecoveryCurve) -> Result<String> {
    let mut buf = Vec::new();
    write_curve_csv(curve, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// JSON sidecar echoing the full spec.
pub fn spec_json(spec: &ExperimentSpec) -> String {
    serde_json::to_string_pretty(spec).expect("spec serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{tv_distance, wasserstein1, TvMethod};

    fn spec(family: Family, k: usize, eta: f64) -> ExperimentSpec {
        ExperimentSpec {
            family,
            k,
            eta,
            seed: 11,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(2), (1, 2));
        assert_eq!(grid_shape(4), (2, 2));
        assert_eq!(grid_shape(9), (3, 3));
        assert_eq!(grid_shape(16), (4, 4));
        assert_eq!(grid_shape(6), (2, 3));
        let p = grid_positions(4);
        assert_eq!(p, vec![[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn grid_means_and_separation() {
        let (truth, pi) = generate_true_mixture(&spec(Family::GaussianGrid, 4, 1.0), 7).unwrap();
        assert!(pi.is_identity());
        let means: Vec<Vec<f64>> = truth
            .components()
            .iter()
            .map(|c| match c {
                ComponentDensity::Gaussian(g) => g.mean().as_slice().to_vec(),
                _ => unreachable!(),
            })
            .collect();
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        assert!((dist(&means[0], &means[1]) - 1.0).abs() < 1e-12);
        assert!((dist(&means[0], &means[2]) - 1.0).abs() < 1e-12);
        let mut min_tv: f64 = 1.0;
        for i in 0..4 {
            for j in i + 1..4 {
                let tv = tv_distance(
                    &truth.components()[i],
                    &truth.components()[j],
                    TvMethod::MonteCarlo {
                        samples: 20_000,
                        seed: 3,
                    },
                )
                .unwrap();
                min_tv = min_tv.min(tv.value);
            }
        }
        assert!(min_tv >= 0.9, "min TV {min_tv}");
        let w: f64 = truth.weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_shrinks_means_to_origin() {
        let (truth, _) = generate_true_mixture(&spec(Family::GaussianGrid, 9, 1e-9), 7).unwrap();
        for c in truth.components() {
            if let ComponentDensity::Gaussian(g) = c {
                assert!(g.mean().norm() < 1e-8);
            }
        }
        let (nested, _) =
            generate_true_mixture(&spec(Family::MixtureOfMixtures, 4, 1e-9), 7).unwrap();
        for c in nested.components() {
            if let ComponentDensity::GaussianMixture(m) = c {
                assert_eq!(m.components().len(), NESTED_PARTS);
                assert!(m.components().iter().all(|g| g.mean().norm() < 1e-8));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(Family::MixtureOfMixtures, 9, 0.75);
        let a = generate_true_mixture(&s, 5).unwrap().0;
        let b = generate_true_mixture(&s, 5).unwrap().0;
        assert_eq!(a.to_json_string(), b.to_json_string());
        let c = generate_true_mixture(&s, 6).unwrap().0;
        assert_ne!(a, c);
    }

    #[test]
    fn higher_dimensions_embed_the_grid() {
        let s = ExperimentSpec {
            dim: 10,
            ..spec(Family::GaussianGrid, 4, 1.0)
        };
        let (truth, _) = generate_true_mixture(&s, 1).unwrap();
        assert_eq!(truth.dim(), 10);
        if let ComponentDensity::Gaussian(g) = &truth.components()[0] {
            assert!(g.mean().iter().skip(2).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = spec(Family::GaussianGrid, 4, 1.0);
        for bad in [
            ExperimentSpec {
                eta: 0.0,
                ..base.clone()
            },
            ExperimentSpec {
                k: 1,
                ..base.clone()
            },
            ExperimentSpec {
                dim: 1,
                ..base.clone()
            },
            ExperimentSpec {
                n_grid: vec![3, 3],
                ..base.clone()
            },
            ExperimentSpec {
                n_grid: vec![],
                ..base.clone()
            },
            ExperimentSpec {
                trials: 0,
                ..base.clone()
            },
            ExperimentSpec {
                label_noise: 1.0,
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn identity_perturbation_and_simplex() {
        let (truth, _) =
            generate_true_mixture(&spec(Family::MixtureOfMixtures, 4, 1.0), 2).unwrap();
        let same = perturb_mixture_with(&truth, PerturbOptions::none(), 9).unwrap();
        assert_eq!(same, truth);
        let moved = perturb_mixture(&truth, 9).unwrap();
        assert_ne!(moved, truth);
        let s: f64 = moved.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(moved.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn perturbation_moves_w1() {
        let (truth, _) = generate_true_mixture(&spec(Family::GaussianGrid, 4, 1.0), 4).unwrap();
        let moved = perturb_mixture(&truth, 4).unwrap();
        let w = wasserstein1(
            &moved,
            &truth,
            TvMethod::MonteCarlo {
                samples: 4096,
                seed: 1,
            },
        )
        .unwrap();
        assert!(w.distance.value > 3.0 * w.distance.half_width);
        let kde = MixingMeasure::new(
            vec![1.0],
            vec![crate::mixtures::KernelDensity::new(vec![vec![0.0]], 1.0)
                .unwrap()
                .into()],
        )
        .unwrap();
        assert!(matches!(
            perturb_mixture(&kde, 1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn shift_levels_share_draws() {
        let (truth, _) = generate_true_mixture(&spec(Family::GaussianGrid, 4, 1.0), 4).unwrap();
        let at = |sd: f64| {
            let opts = PerturbOptions {
                mean_shift_sd: sd,
                scale_covariance: false,
                perturb_weights: false,
            };
            let m = perturb_mixture_with(&truth, opts, 8).unwrap();
            match &m.components()[0] {
                ComponentDensity::Gaussian(g) => g.mean()[0],
                _ => unreachable!(),
            }
        };
        let base = at(0.0);
        assert!(((at(0.3) - base) - 3.0 * (at(0.1) - base)).abs() < 1e-12);
    }

    #[test]
    fn well_separated_k2_recovers_everywhere() {
        let s = ExperimentSpec {
            trials: 50,
            ..spec(Family::GaussianGrid, 2, 1.0)
        };
        let curve = run_recovery_experiment(&s).unwrap();
        assert_eq!(curve.points.len(), 3 * 33);
        for est in EstimatorKind::ALL {
            assert_eq!(curve.point(est, 99).unwrap().frequency(), 1.0, "{est:?}");
        }
        for p in &curve.points {
            assert_eq!(p.trials, 50);
            assert!(p.recovered + p.fail_empty + p.fail_tie + p.fail_nonbij <= p.trials);
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let s = ExperimentSpec {
            trials: 20,
            n_grid: vec![2, 5, 10, 20],
            label_noise: 0.1,
            ..spec(Family::MixtureOfMixturesPerturbed, 4, 0.5)
        };
        let a = run_recovery_experiment(&s).unwrap();
        let b = run_recovery_experiment(&s).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(curve_csv_string(&a).unwrap(), curve_csv_string(&b).unwrap());
    }

    #[test]
    fn prefixes_are_nested() {
        let s = ExperimentSpec {
            n_grid: vec![5, 30],
            ..spec(Family::GaussianGrid, 4, 1.0)
        };
        let long = ExperimentSpec {
            n_grid: vec![30, 99],
            ..s.clone()
        };
        let (truth, pi, model) = experiment_models(&s).unwrap();
        let mut short_w = None;
        for_each_prefix(&s, &truth, &pi, &model, 3, |t, n| {
            if n == 30 {
                short_w = Some(t.weights().clone());
            }
            Ok(())
        })
        .unwrap();
        let mut long_w = None;
        for_each_prefix(&long, &truth, &pi, &model, 3, |t, n| {
            if n == 30 {
                long_w = Some(t.weights().clone());
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(short_w, long_w);
    }

    #[test]
    fn uninformative_labels_give_coin_flip_mv() {
        let s = ExperimentSpec {
            trials: 400,
            n_grid: vec![301],
            label_noise: 0.5,
            ..spec(Family::GaussianGrid, 2, 1.0)
        };
        let curve = run_recovery_experiment(&s).unwrap();
        let near_half = |hits: usize, total: usize| {
            let rate = hits as f64 / total as f64;
            (rate - 0.5).abs() < 3.0 * (0.25 / total as f64).sqrt()
        };
        // MV votes each region independently, so half of its outcomes are
        // non-bijective; among the permutations it returns, both are equally
        // likely.
        let mv = curve.point(EstimatorKind::Mv, 301).unwrap();
        let returned = mv.trials - mv.fail_tie - mv.fail_empty - mv.fail_nonbij;
        assert!(near_half(mv.recovered, returned), "{mv:?}");
        let mle = curve.point(EstimatorKind::Mle, 301).unwrap();
        assert!(near_half(mle.recovered, mle.trials), "{mle:?}");
    }

    #[test]
    fn label_noise_draws_wrong_labels_only() {
        let mut rng = par::substream(1, 2, 3);
        let mut labels = vec![0usize, 1, 2, 3, 0, 1, 2, 3];
        let before = labels.clone();
        corrupt_labels(&mut labels, 4, 0.999_999, &mut rng);
        assert!(labels.iter().zip(&before).all(|(a, b)| a != b && *a < 4));
    }

    #[test]
    fn csv_layout() {
        let s = ExperimentSpec {
            trials: 3,
            n_grid: vec![3, 6],
            ..spec(Family::GaussianGridPerturbed, 4, 1.0)
        };
        let curve = run_recovery_experiment(&s).unwrap();
        let text = curve_csv_string(&curve).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "family,K,dim,eta,perturbed,estimator,n,trials,recovered,fail_empty,fail_tie,fail_nonbij,mean_loglik,seed"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 6);
        assert!(rows[0].starts_with("gaussian_grid_perturbed,4,2,1.0,true,mle,3,3,"));
        assert!(rows[5].contains(",mv,6,3,"));
        let back: ExperimentSpec = serde_json::from_str(&spec_json(&s)).unwrap();
        assert_eq!(back, s);
    }
}
