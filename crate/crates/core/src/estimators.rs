//! Estimators that consume private releases, plus data models for each
//! problem family.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{rr_sign_mechanism, sign, PrivateRelease};
use crate::normal;
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bernoulli,
    Gaussian,
    SparseGaussian,
    Correlated,
    Logistic,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Bernoulli,
        Family::Gaussian,
        Family::SparseGaussian,
        Family::Correlated,
        Family::Logistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bernoulli => "bernoulli",
            Family::Gaussian => "gaussian",
            Family::SparseGaussian => "sparse_gaussian",
            Family::Correlated => "correlated",
            Family::Logistic => "logistic",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "family",
                name: s.to_string(),
            })
    }
}

fn default_sigma() -> f64 {
    1.0
}

/// A concrete estimation problem.
///
/// `theta` holds the true parameter: Bernoulli means in [0, 1], Gaussian
/// locations in [−1, 1], or for the correlated family the vector
/// b·(2p − 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub family: Family,
    pub d: usize,
    pub n: usize,
    pub theta: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_vector: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::arg("d", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::arg("n", "must be at least 1"));
        }
        if self.theta.len() != self.d {
            return Err(Error::arg(
                "theta",
                format!("has length {}, expected d = {}", self.theta.len(), self.d),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::arg("sigma", format!("must be positive, got {}", self.sigma)));
        }
        let range = match self.family {
            Family::Bernoulli => (0.0, 1.0),
            Family::Logistic => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (-1.0, 1.0),
        };
        if let Some(t) = self
            .theta
            .iter()
            .find(|t| !(t.is_finite() && (range.0..=range.1).contains(*t)))
        {
            return Err(Error::arg(
                "theta",
                format!("entry {t} outside [{}, {}]", range.0, range.1),
            ));
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.d {
                return Err(Error::arg("k", format!("must lie in 1..={}, got {k}", self.d)));
            }
        }
        if self.family == Family::SparseGaussian {
            let k = self.k.unwrap_or(1);
            let support = self.theta.iter().filter(|t| **t != 0.0).count();
            if support > k {
                return Err(Error::arg(
                    "theta",
                    format!("has {support} nonzero entries but k = {k}"),
                ));
            }
        }
        if let Some(b) = &self.b_vector {
            check_signs(b, self.d)?;
        }
        if self.family == Family::Correlated {
            self.correlated_level()?;
        }
        Ok(())
    }

    /// For the correlated family: the scalar s = 2p − 1 with theta = b·s.
    pub fn correlated_level(&self) -> Result<f64> {
        let b = self
            .b_vector
            .as_ref()
            .ok_or_else(|| Error::arg("b_vector", "required for the correlated family"))?;
        check_signs(b, self.d)?;
        let s = self.theta[0] * b[0];
        if self
            .theta
            .iter()
            .zip(b)
            .any(|(t, bj)| (t * bj - s).abs() > 1e-12)
        {
            return Err(Error::arg("theta", "must equal b_vector times a common scalar"));
        }
        Ok(s)
    }
}

fn check_signs(b: &[f64], d: usize) -> Result<()> {
    if b.len() != d {
        return Err(Error::arg(
            "b_vector",
            format!("has length {}, expected {d}", b.len()),
        ));
    }
    if let Some(v) = b.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::arg("b_vector", format!("entries must be ±1, found {v}")));
    }
    Ok(())
}

/// Inverts E[Z] = 1 − 2Φ(−θ/σ) for θ, projected onto [−1, 1].
///
/// Computed as sign(z)·σ·(−Φ⁻¹((1 − |z|)/2)) so that the map is exactly odd.
/// |z| ≥ 1 maps to the boundary.
pub fn gaussian_location_estimator(z_bar: f64, sigma: f64) -> f64 {
    if z_bar.is_nan() {
        return 0.0;
    }
    let magnitude = z_bar.abs();
    if magnitude >= 1.0 {
        return sign(z_bar);
    }
    let t = -sigma * normal::quantile(0.5 * (1.0 - magnitude));
    (t.min(1.0) * if z_bar < 0.0 { -1.0 } else { 1.0 }).clamp(-1.0, 1.0)
}

/// E[Z] under the sign-flip release of N(θ, σ²) data.
pub fn gaussian_sign_mean(theta: f64, sigma: f64) -> f64 {
    1.0 - 2.0 * normal::cdf(-theta / sigma)
}

/// Per-coordinate debiased means of a batch of releases.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateMeans {
    pub means: Vec<f64>,
    /// Number of releases that observed each coordinate.
    pub observed: Vec<usize>,
}

impl CoordinateMeans {
    pub fn unobserved(&self) -> Vec<usize> {
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == 0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// (1/(n·m)) Σ_i Z_ij with missing entries contributing zero, where m is the
/// release's unbias factor. For subsampled releases this is the
/// inverse-propensity-weighted mean.
pub fn coordinate_means(releases: &[PrivateRelease], d: usize) -> Result<CoordinateMeans> {
    if releases.is_empty() {
        return Err(Error::arg("releases", "at least one release is required"));
    }
    let mut sums = vec![0.0; d];
    let mut observed = vec![0usize; d];
    for r in releases {
        if r.dim() != d {
            return Err(Error::arg(
                "releases",
                format!("release of dimension {} where {d} was expected", r.dim()),
            ));
        }
        if !(r.unbias_factor > 0.0) {
            return Err(Error::arg("releases", "unbias factor must be positive"));
        }
        for (j, v) in r.values.iter().enumerate() {
            if let Some(z) = v {
                sums[j] += z / r.unbias_factor;
                observed[j] += 1;
            }
        }
    }
    let n = releases.len() as f64;
    Ok(CoordinateMeans {
        means: sums.into_iter().map(|s| s / n).collect(),
        observed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorEstimate {
    pub theta: Vec<f64>,
    /// Coordinates no release observed; their estimate is 0.
    pub unsampled: Vec<usize>,
}

/// Per-coordinate inversion of sign-flip releases of Gaussian data.
pub fn gaussian_vector_estimator(
    releases: &[PrivateRelease],
    spec: &ProblemSpec,
) -> Result<VectorEstimate> {
    let means = coordinate_means(releases, spec.d)?;
    let theta = means
        .means
        .iter()
        .zip(&means.observed)
        .map(|(&z, &count)| {
            if count == 0 {
                0.0
            } else {
                gaussian_location_estimator(z, spec.sigma)
            }
        })
        .collect();
    Ok(VectorEstimate {
        theta,
        unsampled: means.unobserved(),
    })
}

/// (1 + Z̄_j)/2 clipped to [0, 1], for releases unbiased for 2θ − 1.
pub fn bernoulli_mean_estimator(releases: &[PrivateRelease], d: usize) -> Result<Vec<f64>> {
    let means = coordinate_means(releases, d)?;
    Ok(means
        .means
        .into_iter()
        .map(|z| (0.5 * (1.0 + z)).clamp(0.0, 1.0))
        .collect())
}

/// θ̂ = b·Z̄ from releases of the shared bit.
pub fn correlated_estimator(releases: &[PrivateRelease], b_vector: &[f64]) -> Result<Vec<f64>> {
    check_signs(b_vector, b_vector.len())?;
    let means = coordinate_means(releases, 1)?;
    let z_bar = means.means[0];
    Ok(b_vector.iter().map(|b| b * z_bar).collect())
}

/// Row-and-coordinate access to a sample of `sample_count` vectors in R^d.
/// The sparse estimator touches each entry at most once, so lazy sources
/// may generate entries on demand.
pub trait SampleSource {
    fn dim(&self) -> usize;
    fn sample_count(&self) -> usize;
    fn coordinate(&mut self, i: usize, j: usize) -> f64;
}

/// In-memory sample, one row per individual.
pub struct DenseSample<'a> {
    rows: &'a [Vec<f64>],
    d: usize,
}

impl<'a> DenseSample<'a> {
    pub fn new(rows: &'a [Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::arg("sample", "rows must share a positive dimension"));
        }
        Ok(Self { rows, d })
    }
}

impl SampleSource for DenseSample<'_> {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample_count(&self) -> usize {
        self.rows.len()
    }

    fn coordinate(&mut self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }
}

/// N(θ, σ²I) draws generated when first requested. Entries are independent,
/// so generating only the entries that are read gives the same distribution
/// as materializing the full sample.
pub struct LazyGaussianSample {
    theta: Vec<f64>,
    sigma: f64,
    count: usize,
    rng: SeededRng,
}

impl LazyGaussianSample {
    pub fn new(theta: Vec<f64>, sigma: f64, count: usize, rng: SeededRng) -> Self {
        Self {
            theta,
            sigma,
            count,
            rng,
        }
    }
}

impl SampleSource for LazyGaussianSample {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn sample_count(&self) -> usize {
        self.count
    }

    fn coordinate(&mut self, _i: usize, j: usize) -> f64 {
        let noise: f64 = rand_distr::StandardNormal.sample(&mut self.rng);
        self.theta[j] + self.sigma * noise
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseEstimate {
    pub theta: Vec<f64>,
    pub selected: usize,
    pub screening: Vec<f64>,
}

/// Two-stage estimator for a 1-sparse Gaussian mean from 2n samples.
///
/// The first n samples are cut into d contiguous bins of ⌊n/d⌋ (leftovers
/// dropped); bin j privately estimates coordinate j. The largest screening
/// estimate in absolute value picks ĵ (lowest index on ties), and the last n
/// samples privately estimate coordinate ĵ. Each individual releases one
/// coordinate at the full budget ε.
pub fn sparse_two_stage_estimator(
    sample: &mut dyn SampleSource,
    epsilon: f64,
    spec: &ProblemSpec,
    rng: &mut SeededRng,
) -> Result<SparseEstimate> {
    if spec.k.unwrap_or(1) != 1 {
        return Err(Error::arg("k", "the two-stage estimator requires k = 1"));
    }
    let d = sample.dim();
    if d != spec.d {
        return Err(Error::arg(
            "sample",
            format!("dimension {d} does not match d = {}", spec.d),
        ));
    }
    let half = sample.sample_count() / 2;
    let bin = half / d;
    if bin == 0 {
        return Err(Error::arg(
            "n",
            format!("each half needs at least d = {d} samples, got {half}"),
        ));
    }
    let mut screening = Vec::with_capacity(d);
    for j in 0..d {
        let mut total = 0.0;
        for i in j * bin..(j + 1) * bin {
            total += rr_sign_mechanism(sample.coordinate(i, j), epsilon, rng)?.scalar();
        }
        screening.push(gaussian_location_estimator(total / bin as f64, spec.sigma));
    }
    let mut selected = 0;
    for (j, v) in screening.iter().enumerate() {
        if v.abs() > screening[selected].abs() {
            selected = j;
        }
    }
    let mut total = 0.0;
    for i in half..2 * half {
        total += rr_sign_mechanism(sample.coordinate(i, selected), epsilon, rng)?.scalar();
    }
    let mut theta = vec![0.0; d];
    theta[selected] = gaussian_location_estimator(total / half as f64, spec.sigma);
    Ok(SparseEstimate {
        theta,
        selected,
        screening,
    })
}

/// Largest dimension for exact logistic risk computations.
pub const LOGISTIC_MAX_DIM: usize = 16;

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// One labeled example.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Y uniform on {−1, 1}; given Y, independent X_j with P(X_j = Y) =
/// sigmoid(θ_j).
pub fn logistic_data_generator(
    theta: &[f64],
    n: usize,
    rng: &mut SeededRng,
) -> Vec<LabeledExample> {
    let agree: Vec<f64> = theta.iter().map(|&t| sigmoid(t)).collect();
    (0..n)
        .map(|_| {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let x = agree
                .iter()
                .map(|&p| if rng.random::<f64>() < p { y } else { -y })
                .collect();
            LabeledExample { x, y }
        })
        .collect()
}

fn check_logistic_dim(theta: &[f64], d: usize, name: &'static str) -> Result<()> {
    if d == 0 || d > LOGISTIC_MAX_DIM {
        return Err(Error::arg("d", format!("must lie in 1..={LOGISTIC_MAX_DIM}, got {d}")));
    }
    if theta.len() != d {
        return Err(Error::arg(name, format!("has length {}, expected {d}", theta.len())));
    }
    Ok(())
}

/// Every (x, y) outcome with its exact probability under the logistic model.
/// Bit j of the enumeration index set means x_j = +1.
pub fn logistic_joint(theta: &[f64]) -> Result<Vec<(LabeledExample, f64)>> {
    let d = theta.len();
    check_logistic_dim(theta, d, "theta")?;
    let agree: Vec<f64> = theta.iter().map(|&t| sigmoid(t)).collect();
    let mut out = Vec::with_capacity(1 << (d + 1));
    for y in [-1.0, 1.0] {
        for mask in 0u32..(1 << d) {
            let x: Vec<f64> = (0..d)
                .map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            let p = x
                .iter()
                .zip(&agree)
                .map(|(&xj, &a)| if xj == y { a } else { 1.0 - a })
                .product::<f64>()
                * 0.5;
            out.push((LabeledExample { x, y }, p));
        }
    }
    Ok(out)
}

/// R(θ) = E log(1 + exp(−Y⟨X, θ⟩)) under the model with parameter θ*.
pub fn logistic_risk(theta: &[f64], theta_star: &[f64]) -> Result<f64> {
    check_logistic_dim(theta, theta_star.len(), "theta_hat")?;
    Ok(logistic_joint(theta_star)?
        .into_iter()
        .map(|(ex, p)| {
            let margin: f64 = ex.x.iter().zip(theta).map(|(a, b)| a * b).sum();
            p * softplus(-ex.y * margin)
        })
        .sum())
}

/// R(θ̂) − R(θ*), computed exactly by enumerating all 2^{d+1} outcomes.
pub fn logistic_excess_risk(theta_hat: &[f64], theta_star: &[f64], d: usize) -> Result<f64> {
    check_logistic_dim(theta_hat, d, "theta_hat")?;
    check_logistic_dim(theta_star, d, "theta_star")?;
    let excess = logistic_risk(theta_hat, theta_star)? - logistic_risk(theta_star, theta_star)?;
    Ok(excess.max(0.0))
}

/// Draws from N(θ, σ²I).
pub fn gaussian_sample(theta: &[f64], sigma: f64, rng: &mut SeededRng) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma).expect("sigma validated positive");
    theta.iter().map(|t| t + noise.sample(rng)).collect()
}

/// Sign encoding 2X − 1 of a Bernoulli(θ) vector.
pub fn bernoulli_sign_sample(theta: &[f64], rng: &mut SeededRng) -> Vec<f64> {
    theta
        .iter()
        .map(|&p| if rng.random::<f64>() < p { 1.0 } else { -1.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{coordinate_subsample_mechanism, rr_magnitude};

    fn gaussian_spec(theta: Vec<f64>) -> ProblemSpec {
        ProblemSpec {
            family: Family::Gaussian,
            d: theta.len(),
            n: 1,
            theta,
            sigma: 1.0,
            k: None,
            b_vector: None,
        }
    }

    #[test]
    fn location_estimator_values() {
        assert_eq!(gaussian_location_estimator(0.0, 1.0), 0.0);
        let z = 1.0 - 2.0 * normal::cdf(-0.5);
        assert!((gaussian_location_estimator(z, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(gaussian_location_estimator(1.0, 1.0), 1.0);
        assert_eq!(gaussian_location_estimator(-1.3, 1.0), -1.0);
        assert_eq!(gaussian_location_estimator(0.999, 2.0), 1.0);
    }

    #[test]
    fn location_estimator_fixed_point() {
        for &sigma in &[0.5, 1.0, 3.0] {
            for i in -100..=100 {
                let theta = f64::from(i) / 100.0;
                let z = gaussian_sign_mean(theta, sigma);
                let back = gaussian_location_estimator(z, sigma);
                assert!((back - theta).abs() < 1e-10, "theta={theta} sigma={sigma}: {back}");
            }
        }
    }

    #[test]
    fn location_estimator_odd_and_monotone() {
        let mut prev = -1.0;
        for i in -1000..=1000 {
            let z = f64::from(i) / 1000.0;
            let t = gaussian_location_estimator(z, 1.0);
            assert_eq!(t, -gaussian_location_estimator(-z, 1.0));
            assert!(t >= prev);
            prev = t;
        }
    }

    #[test]
    fn vector_estimator_zero_and_reduction() {
        let zero = PrivateRelease {
            values: vec![Some(0.0), Some(0.0)],
            magnitude_bound: 1.0,
            unbias_factor: 1.0,
            sampled_coords: None,
        };
        let est = gaussian_vector_estimator(&[zero.clone(), zero], &gaussian_spec(vec![0.0, 0.0]))
            .unwrap();
        assert_eq!(est.theta, vec![0.0, 0.0]);

        let mut rng = SeededRng::new(5, 0);
        let releases: Vec<_> = (0..500)
            .map(|i| rr_sign_mechanism(f64::from(i % 3) - 0.5, 1.0, &mut rng).unwrap())
            .collect();
        let z_bar = releases.iter().map(|r| r.scalar()).sum::<f64>() / 500.0;
        let est = gaussian_vector_estimator(&releases, &gaussian_spec(vec![0.0])).unwrap();
        assert_eq!(est.theta[0], gaussian_location_estimator(z_bar, 1.0));
    }

    #[test]
    fn vector_estimator_flags_unsampled() {
        let r = PrivateRelease {
            values: vec![Some(0.5), None],
            magnitude_bound: 2.2,
            unbias_factor: 0.5,
            sampled_coords: Some(vec![0]),
        };
        let est = gaussian_vector_estimator(&[r], &gaussian_spec(vec![0.0, 0.0])).unwrap();
        assert_eq!(est.unsampled, vec![1]);
        assert_eq!(est.theta[1], 0.0);
    }

    #[test]
    fn vector_estimator_recovers_two_coordinates() {
        let spec = gaussian_spec(vec![0.5, -0.5]);
        let mut rng = SeededRng::new(6, 0);
        let releases: Vec<_> = (0..100_000)
            .map(|_| {
                let x = gaussian_sample(&spec.theta, 1.0, &mut rng);
                coordinate_subsample_mechanism(&x, 2.0, &mut rng).unwrap()
            })
            .collect();
        let est = gaussian_vector_estimator(&releases, &spec).unwrap();
        for (t, e) in spec.theta.iter().zip(&est.theta) {
            assert!((t - e).abs() < 0.1);
        }
    }

    #[test]
    fn bernoulli_estimator() {
        let full = PrivateRelease {
            values: vec![Some(2.0)],
            magnitude_bound: 2.0,
            unbias_factor: 2.0,
            sampled_coords: None,
        };
        assert_eq!(bernoulli_mean_estimator(&[full], 1).unwrap(), vec![1.0]);
        let zero = PrivateRelease {
            values: vec![Some(0.0)],
            magnitude_bound: 2.0,
            unbias_factor: 1.0,
            sampled_coords: None,
        };
        assert_eq!(bernoulli_mean_estimator(&[zero], 1).unwrap(), vec![0.5]);
        assert!(bernoulli_mean_estimator(&[], 1).is_err());

        let mut rng = SeededRng::new(7, 0);
        let n = 100_000;
        let releases: Vec<_> = (0..n)
            .map(|_| {
                let x = bernoulli_sign_sample(&[0.75], &mut rng);
                rr_sign_mechanism(x[0], 1.0, &mut rng).unwrap()
            })
            .collect();
        let est = bernoulli_mean_estimator(&releases, 1).unwrap()[0];
        let tol = 3.0 * 0.5 * rr_magnitude(1.0) / (n as f64).sqrt();
        assert!((est - 0.75).abs() <= tol, "{est}");
    }

    #[test]
    fn correlated_estimator_values() {
        let r = |z: f64| PrivateRelease {
            values: vec![Some(z)],
            magnitude_bound: 2.0,
            unbias_factor: 1.0,
            sampled_coords: None,
        };
        assert_eq!(correlated_estimator(&[r(0.0)], &[1.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(correlated_estimator(&[r(1.0)], &[1.0, -1.0]).unwrap(), vec![1.0, -1.0]);
        assert!(correlated_estimator(&[], &[1.0]).is_err());
        assert!(correlated_estimator(&[r(1.0)], &[0.5]).is_err());
    }

    #[test]
    fn sparse_estimator_rejections_and_ties() {
        let mut spec = gaussian_spec(vec![0.0; 4]);
        spec.family = Family::SparseGaussian;
        spec.k = Some(2);
        let rows = vec![vec![0.0; 4]; 16];
        let mut rng = SeededRng::new(8, 0);
        assert!(
            sparse_two_stage_estimator(&mut DenseSample::new(&rows).unwrap(), 1.0, &spec, &mut rng)
                .is_err()
        );
        spec.k = Some(1);
        let few = vec![vec![0.0; 4]; 6];
        assert!(
            sparse_two_stage_estimator(&mut DenseSample::new(&few).unwrap(), 1.0, &spec, &mut rng)
                .is_err()
        );
        // Infinite budget makes every release +1, so all screening values tie.
        let est = sparse_two_stage_estimator(
            &mut DenseSample::new(&rows).unwrap(),
            800.0,
            &spec,
            &mut rng,
        )
        .unwrap();
        assert_eq!(est.selected, 0);
    }

    #[test]
    fn sparse_estimator_finds_support() {
        let mut theta = vec![0.0; 8];
        theta[0] = 0.8;
        let spec = ProblemSpec {
            family: Family::SparseGaussian,
            d: 8,
            n: 8000,
            theta: theta.clone(),
            sigma: 1.0,
            k: Some(1),
            b_vector: None,
        };
        let mut hits = 0;
        for rep in 0..50 {
            let mut source = LazyGaussianSample::new(theta.clone(), 1.0, 16_000, SeededRng::new(rep, 1));
            let mut rng = SeededRng::new(rep, 2);
            let est = sparse_two_stage_estimator(&mut source, 1.0, &spec, &mut rng).unwrap();
            hits += usize::from(est.selected == 0);
            assert_eq!(est.theta.iter().filter(|t| **t != 0.0).count() <= 1, true);
        }
        assert!(hits >= 49);
    }

    #[test]
    fn logistic_generator_agreement_frequency() {
        let delta = 0.3;
        let mut rng = SeededRng::new(11, 0);
        let n = 100_000;
        let data = logistic_data_generator(&[delta], n, &mut rng);
        let agree = data.iter().filter(|e| e.x[0] * e.y > 0.0).count() as f64;
        let p = delta.exp() / (1.0 + delta.exp());
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((agree - n as f64 * p).abs() <= 3.0 * sd);
    }

    #[test]
    fn logistic_joint_satisfies_posterior_identity() {
        for theta in [vec![0.4], vec![0.3, -0.7], vec![1.2, -0.1, 0.5]] {
            let joint = logistic_joint(&theta).unwrap();
            let total: f64 = joint.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let half = joint.len() / 2;
            for i in 0..half {
                let (neg, p_neg) = &joint[i];
                let (pos, p_pos) = &joint[i + half];
                assert_eq!(neg.x, pos.x);
                let margin: f64 = pos.x.iter().zip(&theta).map(|(a, b)| a * b).sum();
                let posterior = p_pos / (p_pos + p_neg);
                assert!((posterior - sigmoid(margin)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_excess_risk_values() {
        assert_eq!(logistic_excess_risk(&[0.3, -0.2], &[0.3, -0.2], 2).unwrap(), 0.0);
        let null = logistic_risk(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((null - 2f64.ln()).abs() < 1e-15);
        assert!(logistic_excess_risk(&[0.5, 1.0], &[0.0, 0.0], 2).unwrap() > 0.0);

        // d = 1, θ* = 0.2, θ̂ = 0: R(0) = ln 2; R(θ*) sums four outcomes.
        let s = sigmoid(0.2);
        let r_star = s * softplus(-0.2) + (1.0 - s) * softplus(0.2);
        let expected = 2f64.ln() - r_star;
        let got = logistic_excess_risk(&[0.0], &[0.2], 1).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!(logistic_excess_risk(&[0.0; 17], &[0.0; 17], 17).is_err());
    }

    #[test]
    fn family_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("poisson".parse::<Family>().is_err());
    }
}
