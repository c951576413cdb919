//! Experiment driver: Monte Carlo risk estimation on configured problems,
//! matched lower bounds, result files, and verification suites.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{dp_to_renyi_bound, PrivacySpec};
use crate::bounds::{
    corollary_bernoulli_bound, corollary_gaussian_bound, corollary_sparse_gaussian_bound,
    correlated_bound, LowerBoundReport, Loss,
};
use crate::channels::{
    audit_approx_dp, audit_pure_dp, audit_renyi, min_tv_pure_projection, projection_tv_bound,
    DiscreteChannel,
};
use crate::divergence;
use crate::error::{Error, Result};
use crate::estimators::{
    bernoulli_mean_estimator, bernoulli_sign_sample, correlated_estimator, gaussian_sample,
    gaussian_vector_estimator, sparse_two_stage_estimator, Family, LazyGaussianSample,
    ProblemSpec,
};
use crate::mechanisms::{
    coordinate_subsample_channel, coordinate_subsample_mechanism, correlated_bit_mechanism,
    gaussian_noise_variance, linf_mechanism, rr_sign_channel, rr_sign_mechanism,
    rr_sign_vector_mechanism, LinfSampler, PrivateRelease,
};
use crate::oracles::{
    self, default_packing_radii, info_decomposition_check, random_pure_channel, FiniteJoint,
    VerificationReport,
};
use crate::rng::SeededRng;

/// Mechanism applied by every individual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// Randomized response on each coordinate's sign at ε/d.
    RrSign,
    CoordinateSubsample,
    Linf,
    /// ℓ∞ release below ε = 1, coordinate subsampling from ε = 1 on.
    Auto,
    /// Per-coordinate Gaussian noise on the ±1 encoding, KL budget split
    /// evenly across coordinates.
    GaussianNoise,
    CorrelatedBit,
}

impl MechanismKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MechanismKind::RrSign => "rr_sign",
            MechanismKind::CoordinateSubsample => "coordinate_subsample",
            MechanismKind::Linf => "linf",
            MechanismKind::Auto => "auto",
            MechanismKind::GaussianNoise => "gaussian_noise",
            MechanismKind::CorrelatedBit => "correlated_bit",
        }
    }

    fn resolve(self, epsilon: f64) -> Self {
        match self {
            MechanismKind::Auto if epsilon < 1.0 => MechanismKind::Linf,
            MechanismKind::Auto => MechanismKind::CoordinateSubsample,
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    BernoulliMean,
    GaussianInversion,
    SparseTwoStage,
    Correlated,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::BernoulliMean => "bernoulli_mean",
            EstimatorKind::GaussianInversion => "gaussian_inversion",
            EstimatorKind::SparseTwoStage => "sparse_two_stage",
            EstimatorKind::Correlated => "correlated",
        }
    }
}

/// Sweeps; the run covers the Cartesian product n × d × ε in that nesting
/// order (ε fastest).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
}

fn default_replications() -> usize {
    100
}

/// One experiment, as read from a JSON document.
///
/// When the grid changes d, `theta` and `b_vector` are resized: constant
/// vectors stay constant, sparse parameters are zero-padded or truncated,
/// and other patterns repeat cyclically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorKind>,
    pub privacy: PrivacySpec,
    #[serde(default)]
    pub loss: Loss,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    /// Worker threads; results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn mechanism(&self) -> MechanismKind {
        self.mechanism.unwrap_or(match self.problem.family {
            Family::Correlated => MechanismKind::CorrelatedBit,
            Family::SparseGaussian => MechanismKind::RrSign,
            _ => MechanismKind::Auto,
        })
    }

    pub fn estimator(&self) -> EstimatorKind {
        self.estimator.unwrap_or(match self.problem.family {
            Family::Gaussian | Family::Logistic => EstimatorKind::GaussianInversion,
            Family::SparseGaussian => EstimatorKind::SparseTwoStage,
            Family::Correlated => EstimatorKind::Correlated,
            Family::Bernoulli => EstimatorKind::BernoulliMean,
        })
    }

    /// Every grid point as a fully specified single-point experiment.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.replications == 0 {
            return Err(Error::arg("replications", "must be at least 1"));
        }
        if self.replications > u32::MAX as usize {
            return Err(Error::arg("replications", "too many"));
        }
        if self.workers == Some(0) {
            return Err(Error::arg("workers", "must be at least 1"));
        }
        self.privacy.validated()?;
        let grid = self.grid.clone().unwrap_or_default();
        let ns = grid.n.unwrap_or_else(|| vec![self.problem.n]);
        let ds = grid.d.unwrap_or_else(|| vec![self.problem.d]);
        let eps = grid.epsilon.unwrap_or_else(|| vec![self.privacy.epsilon]);
        if ns.is_empty() || ds.is_empty() || eps.is_empty() {
            return Err(Error::arg("grid", "sweeps must be nonempty"));
        }
        if ns.contains(&0) || ds.contains(&0) {
            return Err(Error::arg("grid", "n and d entries must be positive"));
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::arg("grid", format!("epsilon entries must be positive, got {e}")));
        }
        let mut points = Vec::with_capacity(ns.len() * ds.len() * eps.len());
        for &n in &ns {
            for &d in &ds {
                let problem = self.resized_problem(n, d)?;
                for &epsilon in &eps {
                    let privacy = PrivacySpec {
                        epsilon,
                        ..self.privacy
                    }
                    .validated()?;
                    let point = GridPoint {
                        index: points.len() as u32,
                        problem: problem.clone(),
                        privacy,
                        mechanism: self.mechanism().resolve(epsilon),
                        estimator: self.estimator(),
                        loss: self.loss,
                    };
                    point.check_compatible()?;
                    points.push(point);
                }
            }
        }
        Ok(points)
    }

    fn resized_problem(&self, n: usize, d: usize) -> Result<ProblemSpec> {
        let base = &self.problem;
        base.validate()?;
        let mut p = base.clone();
        p.n = n;
        p.d = d;
        if d != base.d {
            p.theta = match base.family {
                Family::SparseGaussian => {
                    let mut t = base.theta.clone();
                    t.resize(d, 0.0);
                    t
                }
                Family::Correlated => {
                    let level = base.correlated_level()?;
                    let b = resize_cyclic(base.b_vector.as_deref().unwrap_or(&[]), d);
                    p.b_vector = Some(b.clone());
                    b.into_iter().map(|bj| bj * level).collect()
                }
                _ => resize_cyclic(&base.theta, d),
            };
            if base.family != Family::Correlated {
                p.b_vector = base.b_vector.as_deref().map(|b| resize_cyclic(b, d));
            }
            if let Some(k) = p.k {
                p.k = Some(k.min(d));
            }
        }
        p.validate()?;
        Ok(p)
    }
}

fn resize_cyclic(v: &[f64], d: usize) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    v.iter().copied().cycle().take(d).collect()
}

/// A single (n, d, ε) setting of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub index: u32,
    pub problem: ProblemSpec,
    pub privacy: PrivacySpec,
    pub mechanism: MechanismKind,
    pub estimator: EstimatorKind,
    pub loss: Loss,
}

impl GridPoint {
    fn incompatible(&self, why: &str) -> Error {
        Error::Incompatible(format!(
            "{} with mechanism {} and estimator {}: {why}",
            self.problem.family,
            self.mechanism.as_str(),
            self.estimator.as_str()
        ))
    }

    fn check_compatible(&self) -> Result<()> {
        use EstimatorKind as E;
        use MechanismKind as M;
        let ok = match self.problem.family {
            Family::Bernoulli => {
                self.estimator == E::BernoulliMean
                    && matches!(
                        self.mechanism,
                        M::RrSign | M::CoordinateSubsample | M::Linf | M::GaussianNoise
                    )
            }
            Family::Gaussian => {
                self.estimator == E::GaussianInversion
                    && matches!(self.mechanism, M::RrSign | M::CoordinateSubsample | M::Linf)
            }
            Family::SparseGaussian => {
                self.estimator == E::SparseTwoStage && self.mechanism == M::RrSign
            }
            Family::Correlated => {
                self.estimator == E::Correlated && self.mechanism == M::CorrelatedBit
            }
            Family::Logistic => {
                return Err(self.incompatible("no private logistic estimator is implemented; use `bound logistic`"))
            }
        };
        if !ok {
            return Err(self.incompatible("unsupported pairing"));
        }
        if self.mechanism == M::CoordinateSubsample && self.privacy.epsilon < 1.0 {
            return Err(self.incompatible("coordinate subsampling needs epsilon ≥ 1"));
        }
        if self.loss != Loss::Squared && self.problem.family != Family::Bernoulli {
            return Err(self.incompatible("only squared loss has a matched bound for this family"));
        }
        if self.problem.family == Family::SparseGaussian && self.problem.d < 2 {
            return Err(self.incompatible("the sparse bound needs d ≥ 2"));
        }
        Ok(())
    }

    pub fn epsilon_kl(&self) -> f64 {
        self.privacy.implied_epsilon_kl()
    }

    /// Samples drawn per replication: 2n for the two-stage estimator (n per
    /// stage), n otherwise.
    pub fn sample_count(&self) -> usize {
        if self.estimator == EstimatorKind::SparseTwoStage {
            2 * self.problem.n
        } else {
            self.problem.n
        }
    }

    pub fn lower_bound(&self) -> Result<LowerBoundReport> {
        let p = &self.problem;
        let (n, d, kl) = (self.sample_count(), p.d, self.epsilon_kl());
        let sigma2 = p.sigma * p.sigma;
        match p.family {
            Family::Bernoulli => corollary_bernoulli_bound(n, d, kl, self.loss),
            Family::Gaussian => corollary_gaussian_bound(n, d, sigma2, kl),
            Family::SparseGaussian => {
                corollary_sparse_gaussian_bound(n, d, p.k.unwrap_or(1), sigma2, kl)
            }
            Family::Correlated => correlated_bound(n, d, kl),
            Family::Logistic => Err(self.incompatible("not simulated")),
        }
    }

    fn release(&self, x: &[f64], rng: &mut SeededRng) -> Result<PrivateRelease> {
        let eps = self.privacy.epsilon;
        match self.mechanism {
            MechanismKind::RrSign => rr_sign_vector_mechanism(x, eps, rng),
            MechanismKind::CoordinateSubsample => coordinate_subsample_mechanism(x, eps, rng),
            MechanismKind::Linf | MechanismKind::Auto => linf_mechanism(x, eps, rng),
            MechanismKind::GaussianNoise => {
                let per_coord = self.epsilon_kl() / x.len() as f64;
                let sd = gaussian_noise_variance(2.0, per_coord).sqrt();
                let noise = Normal::new(0.0, sd).expect("finite sd");
                Ok(PrivateRelease {
                    values: x.iter().map(|v| Some(v + noise.sample(rng))).collect(),
                    magnitude_bound: f64::INFINITY,
                    unbias_factor: 1.0,
                    sampled_coords: None,
                })
            }
            MechanismKind::CorrelatedBit => correlated_bit_mechanism(x[0], eps, rng),
        }
    }

    /// One replication: draw data, privatize, estimate. Returns the
    /// estimate and whether some coordinate went unobserved.
    pub fn run_trial(&self, rng: &mut SeededRng) -> Result<(Vec<f64>, bool)> {
        let p = &self.problem;
        let n = p.n;
        match self.estimator {
            EstimatorKind::BernoulliMean => {
                let mut releases = Vec::with_capacity(n);
                if self.mechanism == MechanismKind::Linf {
                    let sampler = LinfSampler::new(p.d, self.privacy.epsilon)?;
                    for _ in 0..n {
                        let x = bernoulli_sign_sample(&p.theta, rng);
                        releases.push(sampler.sample(&x, rng)?);
                    }
                } else {
                    for _ in 0..n {
                        let x = bernoulli_sign_sample(&p.theta, rng);
                        releases.push(self.release(&x, rng)?);
                    }
                }
                let unseen = crate::estimators::coordinate_means(&releases, p.d)?
                    .observed
                    .contains(&0);
                Ok((bernoulli_mean_estimator(&releases, p.d)?, unseen))
            }
            EstimatorKind::GaussianInversion => {
                let mut releases = Vec::with_capacity(n);
                if self.mechanism == MechanismKind::Linf {
                    let sampler = LinfSampler::new(p.d, self.privacy.epsilon)?;
                    for _ in 0..n {
                        let x = gaussian_sample(&p.theta, p.sigma, rng);
                        releases.push(sampler.sample(&x, rng)?);
                    }
                } else {
                    for _ in 0..n {
                        let x = gaussian_sample(&p.theta, p.sigma, rng);
                        releases.push(self.release(&x, rng)?);
                    }
                }
                let est = gaussian_vector_estimator(&releases, p)?;
                let unseen = !est.unsampled.is_empty();
                Ok((est.theta, unseen))
            }
            EstimatorKind::SparseTwoStage => {
                let data_rng = rng.fork(0);
                let mut source =
                    LazyGaussianSample::new(p.theta.clone(), p.sigma, self.sample_count(), data_rng);
                let est = sparse_two_stage_estimator(&mut source, self.privacy.epsilon, p, rng)?;
                Ok((est.theta, false))
            }
            EstimatorKind::Correlated => {
                let b = p
                    .b_vector
                    .as_ref()
                    .ok_or_else(|| Error::arg("b_vector", "required for the correlated family"))?;
                let level = p.correlated_level()?;
                let prob_plus = 0.5 * (1.0 + level);
                let mut releases = Vec::with_capacity(n);
                for _ in 0..n {
                    let bit = if rng.random::<f64>() < prob_plus { 1.0 } else { -1.0 };
                    releases.push(self.release(&[bit], rng)?);
                }
                Ok((correlated_estimator(&releases, b)?, false))
            }
        }
    }
}

/// One CSV row. Columns, in order: family, n, d, epsilon, epsilon_kl,
/// mechanism, estimator, mean_loss, std_error, lower_bound_scaling,
/// lower_bound_instantiated (empty when not available), seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub epsilon_kl: f64,
    pub mechanism: String,
    pub estimator: String,
    pub mean_loss: f64,
    pub std_error: f64,
    pub lower_bound_scaling: f64,
    pub lower_bound_instantiated: Option<f64>,
    pub seed: u64,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "family",
    "n",
    "d",
    "epsilon",
    "epsilon_kl",
    "mechanism",
    "estimator",
    "mean_loss",
    "std_error",
    "lower_bound_scaling",
    "lower_bound_instantiated",
    "seed",
];

/// Monte Carlo risk at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub row: ResultRow,
    pub replications: usize,
    /// Mean per-coordinate loss.
    pub per_coordinate: Vec<f64>,
    /// Replications in which some coordinate was never released.
    pub unobserved_trials: usize,
    pub lower_bound: LowerBoundReport,
}

impl RiskEstimate {
    pub fn mean_loss(&self) -> f64 {
        self.row.mean_loss
    }

    pub fn std_error(&self) -> f64 {
        self.row.std_error
    }
}

fn summarize(point: &GridPoint, seed: u64, trials: Vec<(Vec<f64>, bool)>) -> Result<RiskEstimate> {
    let reps = trials.len();
    let d = point.problem.d;
    let theta = &point.problem.theta;
    let mut per_coordinate = vec![0.0; d];
    let mut losses = Vec::with_capacity(reps);
    let mut unobserved_trials = 0;
    for (est, unseen) in &trials {
        unobserved_trials += usize::from(*unseen);
        let mut total = 0.0;
        for ((acc, a), b) in per_coordinate.iter_mut().zip(est).zip(theta) {
            let l = point.loss.eval(a - b);
            *acc += l;
            total += l;
        }
        losses.push(total);
    }
    for acc in per_coordinate.iter_mut() {
        *acc /= reps as f64;
    }
    let mean = losses.iter().sum::<f64>() / reps as f64;
    let std_error = if reps > 1 {
        let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        (var / reps as f64).sqrt()
    } else {
        0.0
    };
    let lower_bound = point.lower_bound()?;
    Ok(RiskEstimate {
        row: ResultRow {
            family: point.problem.family,
            n: point.problem.n,
            d,
            epsilon: point.privacy.epsilon,
            epsilon_kl: point.epsilon_kl(),
            mechanism: point.mechanism.as_str().to_string(),
            estimator: point.estimator.as_str().to_string(),
            mean_loss: mean,
            std_error,
            lower_bound_scaling: lower_bound.scaling,
            lower_bound_instantiated: lower_bound.instantiated,
            seed,
        },
        replications: reps,
        per_coordinate,
        unobserved_trials,
        lower_bound,
    })
}

/// Runs every grid point. Replication r of grid point g draws from stream
/// (seed, g, r), and results are reduced in index order, so the output is
/// independent of the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RiskEstimate>> {
    let points = config.points()?;
    let reps = config.replications;
    let seed = config.seed;
    let work = || -> Result<Vec<RiskEstimate>> {
        let jobs: Vec<(usize, u32)> = (0..points.len())
            .flat_map(|g| (0..reps as u32).map(move |r| (g, r)))
            .collect();
        let results: Vec<Result<(Vec<f64>, bool)>> = jobs
            .par_iter()
            .map(|&(g, r)| {
                let point = &points[g];
                let mut rng = SeededRng::for_trial(seed, point.index, r);
                point.run_trial(&mut rng)
            })
            .collect();
        let mut results = results.into_iter();
        points
            .iter()
            .map(|point| {
                let trials = results.by_ref().take(reps).collect::<Result<Vec<_>>>()?;
                summarize(point, seed, trials)
            })
            .collect()
    };
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::arg("workers", e.to_string()))?
            .install(work),
        None => work(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Unknown {
                kind: "format",
                name: s.to_string(),
            }),
        }
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out).map_err(csv::Error::from)?;
        }
    }
    Ok(())
}

pub fn emit_results(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    write_results(rows, format, &mut writer).map_err(|e| match e {
        Error::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(source) => io_err(source),
            other => Error::Incompatible(format!("{other:?}")),
        },
        other => other,
    })?;
    writer.flush().map_err(io_err)
}

pub fn read_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn read_results_json(text: &str) -> Result<Vec<ResultRow>> {
    Ok(serde_json::from_str(text)?)
}

/// Verification suites.
pub const SUITES: [&str; 5] = ["channels", "sdpi", "info_budget", "assouad", "mechanisms"];

pub const DEFAULT_VERIFY_SEED: u64 = 0x5EED_1DB0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Caps the instance count of every check; `Some(0)` runs nothing.
    pub instances: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_VERIFY_SEED,
            instances: None,
        }
    }
}

impl VerifyOptions {
    fn count(&self, default: usize) -> usize {
        self.instances.map_or(default, |c| c.min(default))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<VerificationReport>,
    pub pass: bool,
    /// True when no check examined any instance.
    pub vacuous: bool,
}

pub fn verify_suite(name: &str, opts: VerifyOptions) -> Result<SuiteReport> {
    let seed = opts.seed;
    let checks = match name {
        "channels" => vec![
            audit_identity_check(opts.count(500), seed),
            renyi_conversion_check(opts.count(500), seed),
            projection_check(opts.count(500), seed),
        ],
        "sdpi" => {
            let mut checks = vec![
                oracles::verify_sdpi_bounded_likelihood(opts.count(1000), 1.0, seed),
                oracles::verify_sdpi_search_bernoulli(
                    &[0.1, 0.2, 0.5][..opts.count(3)],
                    2000,
                    seed,
                ),
            ];
            checks.extend(oracles::verify_pinsker_and_renyi(opts.count(500), seed));
            checks
        }
        "info_budget" => {
            let eps = [0.25, 0.5, 1.0, 2.0];
            vec![
                oracles::verify_pure_dp_budget(&eps[..opts.count(4)], 3, 3, seed),
                decomposition_check(opts.count(200), seed),
            ]
        }
        "assouad" => {
            let radii = default_packing_radii();
            vec![
                oracles::verify_assouad(&[0.25, 0.5, 1.0], &radii[..opts.count(radii.len())]),
                oracles::verify_hellinger(opts.count(300), seed),
            ]
        }
        "mechanisms" => vec![
            mechanism_privacy_check(opts.count(usize::MAX)),
            linf_closed_form_check(opts.count(12)),
            unbiasedness_check(opts.count(100_000), seed),
        ],
        _ => {
            return Err(Error::Unknown {
                kind: "suite",
                name: name.to_string(),
            })
        }
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        pass: checks.iter().all(|c| c.pass),
        vacuous: checks.iter().all(|c| c.instances == 0),
        checks,
    })
}

fn random_channel_stream(count: usize, seed: u64, tag: u64) -> impl Iterator<Item = (DiscreteChannel, f64)> {
    let mut rng = SeededRng::new(seed, tag);
    (0..count).map(move |_| {
        let k = rng.random_range(2..=4);
        let m = rng.random_range(2..=6);
        let eps = rng.random_range(0.1..2.0);
        (DiscreteChannel::random_with_violation(k, m, 0.3, &mut rng), eps)
    })
}

/// Zero δ at the channel's own pure level, and δ non-increasing in ε.
pub fn audit_identity_check(count: usize, seed: u64) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = random_channel_stream(count, seed, 1)
        .map(|(ch, eps)| {
            let at_pure = audit_approx_dp(&ch, audit_pure_dp(&ch));
            let growth = audit_approx_dp(&ch, eps + 0.5) - audit_approx_dp(&ch, eps);
            (0.0, at_pure.max(growth))
        })
        .collect();
    VerificationReport::tally("approx_audit_identities", 1e-15, pairs)
}

/// Rényi audits of ε-pure channels stay below the pure-to-Rényi conversion.
pub fn renyi_conversion_check(count: usize, seed: u64) -> VerificationReport {
    let mut rng = SeededRng::new(seed, 2);
    let pairs: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            let eps = rng.random_range(0.05..3.0);
            let alpha = rng.random_range(1.0..10.0);
            let ch = random_pure_channel(rng.random_range(2..=4), rng.random_range(2..=5), eps, &mut rng);
            let renyi = audit_renyi(&ch, alpha).expect("alpha ≥ 1");
            (dp_to_renyi_bound(eps, alpha), renyi)
        })
        .collect();
    VerificationReport::tally("renyi_within_pure_conversion", 1e-12, pairs)
}

/// Outcome of projecting one random (ε, δ) channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTrial {
    pub inputs: usize,
    pub outputs: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub bound: f64,
    /// Smallest max-row TV of any ε-pure channel (the LP optimum).
    pub achievable: f64,
    pub audited_epsilon: f64,
}

impl ProjectionTrial {
    pub fn meets_bound(&self) -> bool {
        self.achievable <= self.bound + 1e-9
    }

    pub fn meets_ratio(&self) -> bool {
        self.audited_epsilon <= self.epsilon + 1e-9
    }
}

/// Random channels with |X| ∈ {2, 3, 4}, |Z| ∈ 2..=6, ε ∈ [0.1, 2), and δ
/// set to the audited tightest value at ε. Channels already ε-pure are
/// left unchanged, as in `project_to_pure_dp`.
pub fn projection_trials(count: usize, seed: u64) -> Vec<ProjectionTrial> {
    random_channel_stream(count, seed, 3)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(ch, eps)| {
            let delta = audit_approx_dp(&ch, eps);
            let pure = audit_pure_dp(&ch);
            let (achievable, audited) = if pure <= eps {
                (0.0, pure)
            } else {
                match min_tv_pure_projection(&ch, eps) {
                    Ok(p) => (p.max_tv(), audit_pure_dp(&p.channel)),
                    Err(_) => (f64::INFINITY, f64::INFINITY),
                }
            };
            ProjectionTrial {
                inputs: ch.input_size(),
                outputs: ch.output_size(),
                epsilon: eps,
                delta,
                bound: projection_tv_bound(eps, delta),
                achievable,
                audited_epsilon: audited,
            }
        })
        .collect()
}

/// Projection to ε-pure within the per-row TV bound on random channels.
pub fn projection_check(count: usize, seed: u64) -> VerificationReport {
    let trials = projection_trials(count, seed);
    let mut report = VerificationReport::tally(
        "projection_tv_bound",
        1e-9,
        trials.iter().map(|t| (t.bound, t.achievable)),
    );
    report.pass &= trials.iter().all(ProjectionTrial::meets_ratio);
    report
}

/// Σ_j I(X_{·j}; Z | V) ≤ I(X; Z | V) on random product instances with
/// d ≤ 3 and n ≤ 2.
pub fn decomposition_check(count: usize, seed: u64) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededRng::new(seed, 4_000 + t as u64);
            let d = 1 + t % 3;
            let n = 1 + (t / 3) % 2;
            let dists: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    let probs: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                    (0..1usize << d)
                        .map(|x| {
                            (0..d)
                                .map(|j| if x >> j & 1 == 1 { probs[j] } else { 1.0 - probs[j] })
                                .product()
                        })
                        .collect()
                })
                .collect();
            let outputs = rng.random_range(2..=4);
            let channel = random_pure_channel(1 << d, outputs, rng.random_range(0.2..4.0), &mut rng);
            let joint = FiniteJoint::non_adaptive(vec![0.5, 0.5], dists, channel, n)
                .expect("small instance");
            let r = info_decomposition_check(&joint, d).expect("product instance");
            (r.total, r.coordinate_sum)
        })
        .collect();
    VerificationReport::tally("information_decomposition", oracles::DECOMPOSITION_TOLERANCE, pairs)
}

/// Epsilons at which mechanism channels are audited.
pub fn audit_epsilons() -> [f64; 4] {
    [0.25, 3f64.ln(), 1.0, 4.0]
}

/// Audited ε of every finite mechanism channel against its declared ε:
/// randomized response, the correlated bit, ℓ∞ for d ≤ 6, and coordinate
/// subsampling given its coordinate set.
pub fn mechanism_audits() -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    for eps in audit_epsilons() {
        out.push((format!("rr_sign eps={eps}"), eps, audit_pure_dp(&rr_sign_channel(eps))));
        out.push((format!("correlated_bit eps={eps}"), eps, audit_pure_dp(&rr_sign_channel(eps))));
        for d in 1..=6 {
            let ch = LinfSampler::new(d, eps)
                .and_then(|s| s.channel())
                .expect("small dimension");
            out.push((format!("linf d={d} eps={eps}"), eps, audit_pure_dp(&ch)));
        }
        if eps >= 1.0 {
            for count in 1..=(eps.floor() as usize).min(4) {
                let ch = coordinate_subsample_channel(count);
                out.push((
                    format!("coordinate_subsample count={count}"),
                    count as f64,
                    audit_pure_dp(&ch),
                ));
            }
        }
    }
    out
}

pub fn mechanism_privacy_check(limit: usize) -> VerificationReport {
    VerificationReport::tally(
        "mechanism_privacy",
        1e-9,
        mechanism_audits().into_iter().take(limit).map(|(_, eps, audited)| (eps, audited)),
    )
}

/// Closed-form ℓ∞ bias against enumeration over all 2^d sign vectors.
pub fn linf_closed_form_check(max_d: usize) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = (1..=max_d)
        .flat_map(|d| [0.1, 0.5, 1.0, 3.0].map(|e| (d, e)))
        .map(|(d, eps)| {
            let sampler = LinfSampler::new(d, eps).expect("valid");
            let mut drift = 0.0;
            let mut total = 0.0;
            for w in 0u32..(1 << d) {
                let inner = 2 * i64::from(w.count_ones()) - d as i64;
                let weight = if inner > 0 { eps.exp() } else { 1.0 };
                total += weight;
                drift += if w & 1 == 1 { weight } else { -weight };
            }
            (0.0, (drift / total - sampler.bias()).abs())
        })
        .collect();
    VerificationReport::tally("linf_closed_form", 1e-12, pairs)
}

/// Largest deviation of an empirical per-coordinate mean from its target,
/// in units of the allowed 4·b/√N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessCase {
    pub mechanism: String,
    pub d: usize,
    pub epsilon: f64,
    pub draws: usize,
    pub worst_deviation: f64,
    pub tolerance: f64,
}

/// Every mechanism over d ∈ {1, 4, 16} and the given ε. Inputs have
/// alternating signs; coordinate subsampling runs only where ε ≥ 1, and
/// the scalar mechanisms once per ε.
pub fn unbiasedness_cases(epsilons: &[f64], draws: usize, seed: u64) -> Vec<UnbiasednessCase> {
    #[derive(Clone, Copy)]
    enum Kind {
        Scalar,
        Bit,
        Vector,
        Subsample,
        Linf,
        Noise,
    }
    let mut configs = Vec::new();
    for &eps in epsilons {
        configs.push((Kind::Scalar, 1, eps));
        configs.push((Kind::Bit, 1, eps));
        configs.push((Kind::Noise, 1, eps));
        for d in [1usize, 4, 16] {
            configs.push((Kind::Vector, d, eps));
            configs.push((Kind::Linf, d, eps));
            if eps >= 1.0 {
                configs.push((Kind::Subsample, d, eps));
            }
        }
    }
    configs
        .into_par_iter()
        .enumerate()
        .map(|(c, (kind, d, eps))| {
            let mut rng = SeededRng::new(seed, 10_000 + c as u64);
            let x: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { 0.7 } else { -0.3 }).collect();
            let mut target: Vec<f64> = x.iter().map(|v| v.signum()).collect();
            let mut sums = vec![0.0; d];
            let mut scale = 0.0;
            let sampler = matches!(kind, Kind::Linf).then(|| LinfSampler::new(d, eps).expect("valid"));
            for _ in 0..draws {
                let r = match kind {
                    Kind::Scalar => rr_sign_mechanism(x[0], eps, &mut rng),
                    Kind::Bit => correlated_bit_mechanism(target[0], eps, &mut rng),
                    Kind::Vector => rr_sign_vector_mechanism(&x, eps, &mut rng),
                    Kind::Subsample => coordinate_subsample_mechanism(&x, eps, &mut rng),
                    Kind::Linf => sampler.as_ref().expect("built").sample(&x, &mut rng),
                    Kind::Noise => {
                        crate::mechanisms::gaussian_noise_mechanism(x[0], 2.0, eps, &mut rng)
                    }
                }
                .expect("valid mechanism input");
                for (s, v) in sums.iter_mut().zip(&r.values) {
                    *s += v.unwrap_or(0.0) / r.unbias_factor;
                }
                scale = if r.magnitude_bound.is_finite() {
                    r.magnitude_bound / r.unbias_factor
                } else {
                    gaussian_noise_variance(2.0, eps).sqrt()
                };
            }
            if matches!(kind, Kind::Noise) {
                target = x.clone();
            }
            let name = match kind {
                Kind::Scalar => "rr_sign",
                Kind::Bit => "correlated_bit",
                Kind::Vector => "rr_sign_vector",
                Kind::Subsample => "coordinate_subsample",
                Kind::Linf => "linf",
                Kind::Noise => "gaussian_noise",
            };
            let worst = sums
                .iter()
                .zip(&target)
                .map(|(s, t)| (s / draws as f64 - t).abs())
                .fold(0.0, f64::max);
            UnbiasednessCase {
                mechanism: name.to_string(),
                d,
                epsilon: eps,
                draws,
                worst_deviation: worst,
                tolerance: 4.0 * scale / (draws as f64).sqrt(),
            }
        })
        .collect()
}

pub fn unbiasedness_check(draws: usize, seed: u64) -> VerificationReport {
    if draws == 0 {
        return VerificationReport::tally("unbiasedness", 0.0, std::iter::empty());
    }
    let cases = unbiasedness_cases(&audit_epsilons(), draws, seed);
    VerificationReport::tally(
        "unbiasedness",
        0.0,
        cases.iter().map(|c| (c.tolerance, c.worst_deviation)),
    )
}

/// TV between the two outputs of `channel` on inputs `a` and `b`.
pub fn row_distance(channel: &DiscreteChannel, a: usize, b: usize) -> f64 {
    divergence::total_variation(channel.row(a), channel.row(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "problem": {"family": "bernoulli", "d": 4, "n": 2000, "theta": [0.3, 0.5, 0.7, 0.5]},
                "mechanism": "rr_sign",
                "estimator": "bernoulli_mean",
                "privacy": {"epsilon": 2.0},
                "replications": 20,
                "seed": 11
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let c = bernoulli_config();
        assert_eq!(c.loss, Loss::Squared);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let minimal = ExperimentConfig::from_json(
            r#"{"problem": {"family": "gaussian", "d": 2, "n": 10, "theta": [0, 0]},
                "privacy": {"epsilon": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(minimal.replications, 100);
        let points = minimal.points().unwrap();
        assert_eq!(points[0].mechanism, MechanismKind::Linf);
        assert_eq!(points[0].estimator, EstimatorKind::GaussianInversion);
    }

    #[test]
    fn grid_order_and_resizing() {
        let mut c = bernoulli_config();
        c.grid = Some(Grid {
            n: Some(vec![100, 200]),
            d: Some(vec![2, 8]),
            epsilon: Some(vec![1.0, 2.0, 4.0]),
        });
        let points = c.points().unwrap();
        assert_eq!(points.len(), 12);
        assert_eq!(points[0].problem.theta, vec![0.3, 0.5]);
        assert_eq!(points[3].problem.theta.len(), 8);
        assert_eq!(points[3].problem.theta[4], 0.3);
        let order: Vec<(usize, usize, f64)> = points
            .iter()
            .map(|p| (p.problem.n, p.problem.d, p.privacy.epsilon))
            .collect();
        assert_eq!(order[1], (100, 2, 2.0));
        assert_eq!(order[3], (100, 8, 1.0));
        assert_eq!(order[6], (200, 2, 1.0));
    }

    #[test]
    fn sparse_and_correlated_resizing() {
        let sparse = ExperimentConfig::from_json(
            r#"{"problem": {"family": "sparse_gaussian", "d": 8, "n": 100, "theta": [0.8, 0, 0, 0, 0, 0, 0, 0], "k": 1},
                "privacy": {"epsilon": 1}, "grid": {"d": [4, 16]}}"#,
        )
        .unwrap();
        let pts = sparse.points().unwrap();
        assert_eq!(pts[1].problem.theta.len(), 16);
        assert_eq!(pts[1].problem.theta[0], 0.8);
        assert_eq!(pts[1].problem.theta[1..].iter().sum::<f64>(), 0.0);

        let corr = ExperimentConfig::from_json(
            r#"{"problem": {"family": "correlated", "d": 2, "n": 100, "theta": [0.5, -0.5], "b_vector": [1, -1]},
                "privacy": {"epsilon": 1}, "grid": {"d": [5]}}"#,
        )
        .unwrap();
        let p = &corr.points().unwrap()[0].problem;
        assert_eq!(p.b_vector.as_deref(), Some(&[1.0, -1.0, 1.0, -1.0, 1.0][..]));
        assert_eq!(p.theta, vec![0.5, -0.5, 0.5, -0.5, 0.5]);
    }

    #[test]
    fn incompatible_pairings_rejected() {
        let mut c = bernoulli_config();
        c.estimator = Some(EstimatorKind::Correlated);
        assert!(matches!(c.points(), Err(Error::Incompatible(_))));

        let mut c = bernoulli_config();
        c.mechanism = Some(MechanismKind::CoordinateSubsample);
        c.privacy.epsilon = 0.5;
        assert!(matches!(c.points(), Err(Error::Incompatible(_))));

        let logistic = ExperimentConfig::from_json(
            r#"{"problem": {"family": "logistic", "d": 2, "n": 100, "theta": [0.1, -0.1]},
                "privacy": {"epsilon": 1}}"#,
        )
        .unwrap();
        assert!(matches!(logistic.points(), Err(Error::Incompatible(_))));

        let mut c = bernoulli_config();
        c.replications = 0;
        assert!(c.points().is_err());
    }

    #[test]
    fn runs_are_deterministic_across_workers() {
        let mut c = bernoulli_config();
        c.workers = Some(1);
        let a = run_experiment(&c).unwrap();
        c.workers = Some(3);
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert!(a[0].std_error() > 0.0);
        assert_eq!(a[0].replications, 20);
    }

    #[test]
    fn single_replication_has_zero_std_error() {
        let mut c = bernoulli_config();
        c.replications = 1;
        let r = run_experiment(&c).unwrap();
        assert_eq!(r[0].std_error(), 0.0);
        assert_eq!(r, run_experiment(&c).unwrap());
    }

    #[test]
    fn near_non_private_rate() {
        let c = ExperimentConfig::from_json(
            r#"{"problem": {"family": "bernoulli", "d": 4, "n": 10000, "theta": [0.5, 0.3, 0.7, 0.5]},
                "mechanism": "rr_sign", "privacy": {"epsilon": 50}, "replications": 200, "seed": 3}"#,
        )
        .unwrap();
        let r = run_experiment(&c).unwrap();
        let rate: f64 = [0.5f64, 0.3, 0.7, 0.5].iter().map(|t| t * (1.0 - t)).sum::<f64>() / 1e4;
        let ratio = r[0].mean_loss() / rate;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rows: Vec<ResultRow> = run_experiment(&bernoulli_config())
            .unwrap()
            .into_iter()
            .map(|r| r.row)
            .collect();
        let mut csv_bytes = Vec::new();
        write_results(&rows, OutputFormat::Csv, &mut csv_bytes).unwrap();
        let text = String::from_utf8(csv_bytes).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(read_results_csv(&text).unwrap(), rows);
        let mut json = Vec::new();
        write_results(&rows, OutputFormat::Json, &mut json).unwrap();
        assert_eq!(read_results_json(std::str::from_utf8(&json).unwrap()).unwrap(), rows);

        let mut empty = Vec::new();
        write_results(&[], OutputFormat::Csv, &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("out.csv");
        match emit_results(&[], OutputFormat::Csv, &bad) {
            Err(Error::Io { path, .. }) => assert_eq!(path, bad),
            other => panic!("expected an I/O error, got {other:?}"),
        }
    }

    #[test]
    fn suites() {
        let empty = verify_suite(
            "sdpi",
            VerifyOptions {
                seed: 1,
                instances: Some(0),
            },
        )
        .unwrap();
        assert!(empty.pass && empty.vacuous);
        assert!(empty.checks.iter().all(|c| c.instances == 0));
        assert!(matches!(
            verify_suite("nope", VerifyOptions::default()),
            Err(Error::Unknown { .. })
        ));
        let small = VerifyOptions {
            seed: 2,
            instances: Some(30),
        };
        for name in ["sdpi", "info_budget", "assouad"] {
            let r = verify_suite(name, small).unwrap();
            assert!(r.pass, "{name}: {:?}", r.checks);
            assert!(!r.vacuous);
        }
    }

    #[test]
    fn mechanism_audits_match_declared_budgets() {
        for (name, eps, audited) in mechanism_audits() {
            assert!((audited - eps).abs() <= 1e-9, "{name}: {audited}");
        }
    }
}
