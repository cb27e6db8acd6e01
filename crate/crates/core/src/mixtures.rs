//! Component densities, mixing measures, decision regions and classifiers.
//!
//! All density arithmetic happens in the log domain. Region and class
//! indices are 0-based in the API; file formats use 1-based labels.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "weights sum to one".
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log(sum(exp(v)))` without overflow. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn check_weights(weights: &[f64], what: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidMixture(format!("{what}: no weights")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidMixture(format!(
            "{what}: weight {w} is not strictly positive"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidMixture(format!(
            "{what}: weights sum to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Multivariate normal density with a Cholesky-factored covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidDensity(format!(
                "covariance must be {d}x{d} to match the mean"
            )));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        Self::from_parts(DVector::from_vec(mean), cov)
    }

    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidDensity("zero-dimensional Gaussian".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::InvalidDensity(format!(
                "covariance must be {d}x{d} to match the mean"
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity("non-finite parameter".into()));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (cov[(i, j)], cov[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidDensity("covariance is not symmetric".into()));
                }
            }
        }
        let chol = nalgebra::Cholesky::new(cov.clone())
            .ok_or_else(|| Error::InvalidDensity("covariance is not positive definite".into()))?
            .unpack();
        let log_det_half: f64 = (0..d).map(|i| chol[(i, i)].ln()).sum();
        let log_norm = 0.5 * d as f64 * LN_2PI + log_det_half;
        Ok(Self {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    /// `N(mean, variance * I)`.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::from_parts(
            DVector::from_vec(mean),
            DMatrix::from_diagonal_element(d, d, variance),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let d = self.dim();
        // Forward substitution L z = x - mean, accumulating |z|^2.
        let mut z = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if d <= z.len() {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut quad = 0.0;
        // Forward substitution L z = x − μ.
        #[allow(clippy::needless_range_loop)]
        for i in 0..d {
            let mut r = x[i] - self.mean[i];
            for j in 0..i {
                r -= self.chol[(i, j)] * z[j];
            }
            z[i] = r / self.chol[(i, i)];
            quad += z[i] * z[i];
        }
        -0.5 * quad - self.log_norm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mean + &self.chol * eps).as_slice().to_vec()
    }

    /// Same covariance, mean moved by `delta`.
    pub fn shifted(&self, delta: &[f64]) -> Self {
        let mut out = self.clone();
        for (m, d) in out.mean.iter_mut().zip(delta) {
            *m += d;
        }
        out
    }

    /// Same mean, covariance multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let d = self.dim();
        Self {
            mean: self.mean.clone(),
            cov: &self.cov * factor,
            chol: &self.chol * factor.sqrt(),
            log_norm: self.log_norm + 0.5 * d as f64 * factor.ln(),
        }
    }

    /// Mean scaled by `factor` (shrinkage towards the origin).
    pub fn mean_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.mean *= factor;
        out
    }

    fn envelope_1d(&self, width: f64) -> (f64, f64) {
        let sd = self.cov[(0, 0)].sqrt();
        (self.mean[0] - width * sd, self.mean[0] + width * sd)
    }
}

/// Finite Gaussian mixture used as a single component.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<Gaussian>,
    picker: WeightedIndex<f64>,
}

impl PartialEq for GaussianMixture {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.components == other.components
    }
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::InvalidDensity(
                "mixture weights and components differ in length".into(),
            ));
        }
        check_weights(&weights, "nested mixture")
            .map_err(|e| Error::InvalidDensity(e.to_string()))?;
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::InvalidDensity(
                "nested mixture components differ in dimension".into(),
            ));
        }
        let picker =
            WeightedIndex::new(&weights).map_err(|e| Error::InvalidDensity(e.to_string()))?;
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            components,
            picker,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_pdf(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let i = self.picker.sample(rng);
        self.components[i].sample(rng)
    }

    /// Apply `f` to every nested Gaussian, keeping the weights.
    pub fn map_components(&self, f: impl FnMut(&Gaussian) -> Gaussian) -> Self {
        Self {
            weights: self.weights.clone(),
            log_weights: self.log_weights.clone(),
            components: self.components.iter().map(f).collect(),
            picker: self.picker.clone(),
        }
    }
}

/// Kernel density estimate with isotropic Gaussian kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelDensity {
    points: Vec<Vec<f64>>,
    bandwidth: f64,
    log_norm: f64,
}

impl KernelDensity {
    pub fn new(points: Vec<Vec<f64>>, bandwidth: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDensity("KDE needs at least one point".into()));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidDensity(format!(
                "KDE bandwidth must be positive, got {bandwidth}"
            )));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidDensity(
                "KDE points differ in dimension".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity("non-finite KDE point".into()));
        }
        let log_norm =
            (points.len() as f64).ln() + 0.5 * d as f64 * (2.0 * PI * bandwidth * bandwidth).ln();
        Ok(Self {
            points,
            bandwidth,
            log_norm,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let inv = 0.5 / (self.bandwidth * self.bandwidth);
        let terms: Vec<f64> = self
            .points
            .iter()
            .map(|p| -inv * p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .collect();
        log_sum_exp(&terms) - self.log_norm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let p = &self.points[rng.random_range(0..self.points.len())];
        p.iter()
            .map(|v| v + self.bandwidth * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// A full-support probability density on R^d.
#[derive(Clone, Debug, PartialEq)]
pub enum ComponentDensity {
    Gaussian(Gaussian),
    GaussianMixture(GaussianMixture),
    KernelDensity(KernelDensity),
}

impl ComponentDensity {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.dim(),
            Self::GaussianMixture(m) => m.dim(),
            Self::KernelDensity(k) => k.dim(),
        }
    }

    /// Log-density. The caller guarantees `x.len() == self.dim()`.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian(g) => g.log_pdf(x),
            Self::GaussianMixture(m) => m.log_pdf(x),
            Self::KernelDensity(k) => k.log_pdf(x),
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => g.sample(rng),
            Self::GaussianMixture(m) => m.sample(rng),
            Self::KernelDensity(k) => k.sample(rng),
        }
    }

    /// Interval holding all but a negligible part of the mass of a 1-D
    /// density: every Gaussian piece contributes `mean ± width·sd`.
    pub fn envelope_1d(&self, width: f64) -> (f64, f64) {
        let merge = |(a, b): (f64, f64), (c, d): (f64, f64)| (a.min(c), b.max(d));
        let empty = (f64::INFINITY, f64::NEG_INFINITY);
        match self {
            Self::Gaussian(g) => g.envelope_1d(width),
            Self::GaussianMixture(m) => m
                .components()
                .iter()
                .map(|g| g.envelope_1d(width))
                .fold(empty, merge),
            Self::KernelDensity(k) => k
                .points()
                .iter()
                .map(|p| (p[0] - width * k.bandwidth(), p[0] + width * k.bandwidth()))
                .fold(empty, merge),
        }
    }
}

impl From<Gaussian> for ComponentDensity {
    fn from(g: Gaussian) -> Self {
        Self::Gaussian(g)
    }
}

impl From<GaussianMixture> for ComponentDensity {
    fn from(m: GaussianMixture) -> Self {
        Self::GaussianMixture(m)
    }
}

impl From<KernelDensity> for ComponentDensity {
    fn from(k: KernelDensity) -> Self {
        Self::KernelDensity(k)
    }
}

/// Bijection from class index `k` to region index `b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let k = forward.len();
        let mut inverse = vec![usize::MAX; k];
        for (class, &region) in forward.iter().enumerate() {
            if region >= k {
                return Err(Error::InvalidPermutation(format!(
                    "image {region} out of range for size {k}"
                )));
            }
            if inverse[region] != usize::MAX {
                return Err(Error::InvalidPermutation(format!(
                    "region {region} is hit twice"
                )));
            }
            inverse[region] = class;
        }
        Ok(Self { forward, inverse })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            forward: (0..k).collect(),
            inverse: (0..k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Region assigned to `class`.
    pub fn region_of_class(&self, class: usize) -> usize {
        self.forward[class]
    }

    /// Class assigned to `region` (the inverse map).
    pub fn class_of_region(&self, region: usize) -> usize {
        self.inverse[region]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> Self {
        Self {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::InvalidPermutation("size mismatch in compose".into()));
        }
        Self::new(other.forward.iter().map(|&i| self.forward[i]).collect())
    }

    /// 1-based image list, as written in files.
    pub fn to_one_based(&self) -> Vec<usize> {
        self.forward.iter().map(|v| v + 1).collect()
    }

    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::InvalidPermutation("labels are 1-based".into()));
        }
        Self::new(images.iter().map(|v| v - 1).collect())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_one_based())
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let images = Vec::<usize>::deserialize(d)?;
        Self::from_one_based(&images).map_err(serde::de::Error::custom)
    }
}

/// A point with its 0-based class label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: usize,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: usize) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "sample has a non-finite coordinate".into(),
            ));
        }
        Ok(Self { x, y })
    }
}

/// K weighted component densities sharing one dimension.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MixtureDoc", into = "MixtureDoc")]
pub struct MixingMeasure {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<ComponentDensity>,
    labels: Option<Vec<String>>,
    picker: WeightedIndex<f64>,
}

impl PartialEq for MixingMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
            && self.components == other.components
            && self.labels == other.labels
    }
}

impl MixingMeasure {
    pub fn new(weights: Vec<f64>, components: Vec<ComponentDensity>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::InvalidMixture(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        check_weights(&weights, "mixing measure")?;
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        let picker =
            WeightedIndex::new(&weights).map_err(|e| Error::InvalidMixture(e.to_string()))?;
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            components,
            labels: None,
            picker,
        })
    }

    /// Like [`MixingMeasure::new`] but rescales `weights` to sum to one.
    pub fn normalized(weights: Vec<f64>, components: Vec<ComponentDensity>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidMixture(
                "weights do not have a positive sum".into(),
            ));
        }
        Self::new(weights.iter().map(|w| w / total).collect(), components)
    }

    /// Attach display names for the K classes.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.k() {
            return Err(Error::InvalidMixture(format!(
                "{} labels for {} atoms",
                labels.len(),
                self.k()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ComponentDensity] {
        &self.components
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Fill `out[b] = log(λ_b f_b(x))`. No dimension check.
    pub fn weighted_log_densities_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, c), lw) in out.iter_mut().zip(&self.components).zip(&self.log_weights) {
            *o = lw + c.log_pdf(x);
        }
    }

    pub fn weighted_log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.k()];
        self.weighted_log_densities_into(x, &mut out);
        Ok(out)
    }

    /// `log Σ_b λ_b f_b(x)`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(log_sum_exp(&self.weighted_log_densities(x)?))
    }

    /// `Σ_b λ_b f_b(x)`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// Decision region containing `x`: the atom with the largest weighted
    /// density, lowest index on ties.
    pub fn region_of(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_lowest(&self.weighted_log_densities(x)?))
    }

    /// Class predicted by `(self, perm)`: `perm⁻¹(region_of(x))`.
    pub fn classify(&self, perm: &Permutation, x: &[f64]) -> Result<usize> {
        if perm.len() != self.k() {
            return Err(Error::InvalidPermutation(format!(
                "permutation of size {} for {} atoms",
                perm.len(),
                self.k()
            )));
        }
        Ok(perm.class_of_region(self.region_of(x)?))
    }

    /// Draw an atom index by weight and a point from that atom.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let b = self.picker.sample(rng);
        (b, self.components[b].sample(rng))
    }

    /// Draw `n` labeled samples from the generative model: region `b` with
    /// probability `λ_b`, `X ~ f_b`, `Y = perm⁻¹(b)`.
    pub fn sample_labeled_with<R: Rng + ?Sized>(
        &self,
        perm: &Permutation,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<LabeledSample>> {
        if perm.len() != self.k() {
            return Err(Error::InvalidPermutation(format!(
                "permutation of size {} for {} atoms",
                perm.len(),
                self.k()
            )));
        }
        Ok((0..n)
            .map(|_| {
                let (b, x) = self.sample_point(rng);
                LabeledSample {
                    x,
                    y: perm.class_of_region(b),
                }
            })
            .collect())
    }

    pub fn sample_labeled(
        &self,
        perm: &Permutation,
        n: usize,
        seed: u64,
    ) -> Result<Vec<LabeledSample>> {
        let mut rng = crate::par::substream(seed, 0x005A_3B1E, 0);
        self.sample_labeled_with(perm, n, &mut rng)
    }

    /// Same atoms with new (renormalised) weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        let out = Self::normalized(weights, self.components.clone())?;
        Ok(Self {
            labels: self.labels.clone(),
            ..out
        })
    }

    /// Same weights with new atoms.
    pub fn with_components(&self, components: Vec<ComponentDensity>) -> Result<Self> {
        let out = Self::new(self.weights.clone(), components)?;
        Ok(Self {
            labels: self.labels.clone(),
            ..out
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidMixture(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("mixture documents always serialize")
    }
}

/// Convenience: `MixingMeasure::sample_labeled` as a free function.
pub fn sample_labeled(
    truth: &MixingMeasure,
    perm: &Permutation,
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    truth.sample_labeled(perm, n, seed)
}

// --- JSON document form -----------------------------------------------------

/// On-disk mixture format.
///
/// ```json
/// {"dim": 1, "atoms": [
///   {"weight": 0.5, "density": {"type": "gaussian", "mean": [-1.0], "cov": [[1.0]]}},
///   {"weight": 0.5, "density": {"type": "kde", "points": [[0.9], [1.1]], "bandwidth": 0.3}}
/// ]}
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDoc {
    pub dim: usize,
    pub atoms: Vec<AtomDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDoc {
    pub weight: f64,
    pub density: DensityDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityDoc {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    GaussianMixture {
        components: Vec<WeightedGaussianDoc>,
    },
    Kde {
        points: Vec<Vec<f64>>,
        bandwidth: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedGaussianDoc {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

fn gaussian_doc(g: &Gaussian) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = g.dim();
    let cov = (0..d)
        .map(|i| (0..d).map(|j| g.cov()[(i, j)]).collect())
        .collect();
    (g.mean().as_slice().to_vec(), cov)
}

impl From<&ComponentDensity> for DensityDoc {
    fn from(c: &ComponentDensity) -> Self {
        match c {
            ComponentDensity::Gaussian(g) => {
                let (mean, cov) = gaussian_doc(g);
                DensityDoc::Gaussian { mean, cov }
            }
            ComponentDensity::GaussianMixture(m) => DensityDoc::GaussianMixture {
                components: m
                    .weights()
                    .iter()
                    .zip(m.components())
                    .map(|(&weight, g)| {
                        let (mean, cov) = gaussian_doc(g);
                        WeightedGaussianDoc { weight, mean, cov }
                    })
                    .collect(),
            },
            ComponentDensity::KernelDensity(k) => DensityDoc::Kde {
                points: k.points().to_vec(),
                bandwidth: k.bandwidth(),
            },
        }
    }
}

impl TryFrom<DensityDoc> for ComponentDensity {
    type Error = Error;

    fn try_from(doc: DensityDoc) -> Result<Self> {
        Ok(match doc {
            DensityDoc::Gaussian { mean, cov } => Gaussian::new(mean, cov)?.into(),
            DensityDoc::GaussianMixture { components } => {
                let mut weights = Vec::with_capacity(components.len());
                let mut gs = Vec::with_capacity(components.len());
                for c in components {
                    weights.push(c.weight);
                    gs.push(Gaussian::new(c.mean, c.cov)?);
                }
                GaussianMixture::new(weights, gs)?.into()
            }
            DensityDoc::Kde { points, bandwidth } => KernelDensity::new(points, bandwidth)?.into(),
        })
    }
}

impl From<MixingMeasure> for MixtureDoc {
    fn from(m: MixingMeasure) -> Self {
        MixtureDoc {
            dim: m.dim(),
            atoms: m
                .weights
                .iter()
                .zip(&m.components)
                .map(|(&weight, c)| AtomDoc {
                    weight,
                    density: c.into(),
                })
                .collect(),
            labels: m.labels,
        }
    }
}

impl TryFrom<MixtureDoc> for MixingMeasure {
    type Error = Error;

    fn try_from(doc: MixtureDoc) -> Result<Self> {
        let mut weights = Vec::with_capacity(doc.atoms.len());
        let mut components = Vec::with_capacity(doc.atoms.len());
        for atom in doc.atoms {
            weights.push(atom.weight);
            components.push(ComponentDensity::try_from(atom.density)?);
        }
        if components.is_empty() {
            return Err(Error::InvalidMixture("no atoms".into()));
        }
        let m = MixingMeasure::new(weights, components)?;
        if m.dim() != doc.dim {
            return Err(Error::DimensionMismatch {
                expected: doc.dim,
                got: m.dim(),
            });
        }
        match doc.labels {
            Some(labels) => m.with_labels(labels),
            None => Ok(m),
        }
    }
}
