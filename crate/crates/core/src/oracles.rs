//! Exact information-theoretic computations on small finite instances.
//!
//! A [`FiniteJoint`] describes V → X_{≤n} → Z with a finite latent V, i.i.d.
//! samples from a finite alphabet given V, and a sequential pipeline in
//! which Z_i may depend on X_i and on Z_{<i}. Everything is computed by
//! direct enumeration, in nats.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    assouad_testing_bound, braverman_hellinger_bound, info_budget_full_interactive,
    sdpi_bernoulli_pair, sdpi_bounded_likelihood,
};
use crate::accounting::kl_from_pure;
use crate::channels::{dirichlet_ones, DiscreteChannel};
use crate::divergence;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Largest joint support (|V|·|X|^n·|Z|^n) the oracles will enumerate.
pub const ATOM_LIMIT: u128 = 1_000_000;

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Channels used by one pipeline stage: a single channel, or one per
/// history of earlier outputs (indexed as in [`FiniteJoint`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    channels: Vec<DiscreteChannel>,
}

impl Stage {
    pub fn fixed(channel: DiscreteChannel) -> Self {
        Self {
            channels: vec![channel],
        }
    }

    pub fn adaptive(channels: Vec<DiscreteChannel>) -> Self {
        Self { channels }
    }

    fn channel(&self, history: usize) -> &DiscreteChannel {
        if self.channels.len() == 1 {
            &self.channels[0]
        } else {
            &self.channels[history]
        }
    }

    fn output_size(&self) -> usize {
        self.channels[0].output_size()
    }
}

/// V → X_{≤n} → Z with i.i.d. X_i given V.
///
/// Sample tuples and output tuples are indexed in mixed radix with the
/// first sample most significant; the history passed to stage i is the
/// index of (Z_1, ..., Z_{i−1}).
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteJoint {
    prior: Vec<f64>,
    sample_dists: Vec<Vec<f64>>,
    stages: Vec<Stage>,
}

fn check_distribution(name: &'static str, p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::arg(name, "entries must lie in [0, 1]"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::arg(name, format!("sums to {total}")));
    }
    Ok(())
}

impl FiniteJoint {
    pub fn new(prior: Vec<f64>, sample_dists: Vec<Vec<f64>>, stages: Vec<Stage>) -> Result<Self> {
        check_distribution("prior", &prior)?;
        if sample_dists.len() != prior.len() {
            return Err(Error::arg("sample_dists", "need one distribution per value of V"));
        }
        let alphabet = sample_dists[0].len();
        for p in &sample_dists {
            check_distribution("sample_dists", p)?;
            if p.len() != alphabet {
                return Err(Error::arg("sample_dists", "distributions must share an alphabet"));
            }
        }
        if stages.is_empty() {
            return Err(Error::arg("stages", "at least one sample is required"));
        }
        let mut histories = 1usize;
        for (i, stage) in stages.iter().enumerate() {
            let Some(first) = stage.channels.first() else {
                return Err(Error::arg("stages", format!("stage {i} has no channel")));
            };
            let outputs = first.output_size();
            if stage
                .channels
                .iter()
                .any(|c| c.input_size() != alphabet || c.output_size() != outputs)
            {
                return Err(Error::arg(
                    "stages",
                    format!("stage {i} channels must map {alphabet} inputs to {outputs} outputs"),
                ));
            }
            if stage.channels.len() != 1 && stage.channels.len() != histories {
                return Err(Error::arg(
                    "stages",
                    format!(
                        "stage {i} has {} channels; expected 1 or one per history ({histories})",
                        stage.channels.len()
                    ),
                ));
            }
            histories = histories.saturating_mul(outputs);
        }
        let joint = Self {
            prior,
            sample_dists,
            stages,
        };
        let atoms = joint.atoms();
        if atoms > ATOM_LIMIT {
            return Err(Error::TooLarge {
                atoms,
                limit: ATOM_LIMIT,
            });
        }
        Ok(joint)
    }

    /// n copies of the same channel, applied independently.
    pub fn non_adaptive(
        prior: Vec<f64>,
        sample_dists: Vec<Vec<f64>>,
        channel: DiscreteChannel,
        n: usize,
    ) -> Result<Self> {
        Self::new(prior, sample_dists, vec![Stage::fixed(channel); n])
    }

    pub fn n(&self) -> usize {
        self.stages.len()
    }

    pub fn latent_size(&self) -> usize {
        self.prior.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.sample_dists[0].len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn sample_tuple_count(&self) -> usize {
        self.alphabet_size().pow(self.n() as u32)
    }

    pub fn output_tuple_count(&self) -> usize {
        self.stages.iter().map(Stage::output_size).product()
    }

    pub fn atoms(&self) -> u128 {
        let mut atoms = self.prior.len() as u128;
        for stage in &self.stages {
            atoms = atoms
                .saturating_mul(self.alphabet_size() as u128)
                .saturating_mul(stage.output_size() as u128);
        }
        atoms
    }

    fn sample_tuple(&self, index: usize) -> Vec<usize> {
        let k = self.alphabet_size();
        let mut xs = vec![0; self.n()];
        let mut rest = index;
        for slot in xs.iter_mut().rev() {
            *slot = rest % k;
            rest /= k;
        }
        xs
    }

    /// P(X_{≤n} = tuple | V = v) for every sample tuple.
    pub fn sample_tuple_dist(&self, v: usize) -> Vec<f64> {
        (0..self.sample_tuple_count())
            .map(|t| {
                self.sample_tuple(t)
                    .iter()
                    .map(|&x| self.sample_dists[v][x])
                    .product()
            })
            .collect()
    }

    /// P(X_{≤n} = tuple) with V marginalized.
    pub fn sample_tuple_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sample_tuple_count()];
        for (v, &pv) in self.prior.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(self.sample_tuple_dist(v)) {
                *o += pv * p;
            }
        }
        out
    }

    /// P(Z = · | X_{≤n} = tuple), one row per sample tuple.
    pub fn outputs_given_samples(&self) -> Vec<Vec<f64>> {
        (0..self.sample_tuple_count())
            .map(|t| {
                let xs = self.sample_tuple(t);
                let mut probs = vec![1.0];
                for (stage, &x) in self.stages.iter().zip(&xs) {
                    let m = stage.output_size();
                    let mut next = vec![0.0; probs.len() * m];
                    for (h, &p) in probs.iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        let row = stage.channel(h).row(x);
                        for (z, &q) in row.iter().enumerate() {
                            next[h * m + z] = p * q;
                        }
                    }
                    probs = next;
                }
                probs
            })
            .collect()
    }
}

/// Which mutual information to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InformationTarget {
    /// I(X_{≤n}; Z)
    SamplesOutputs,
    /// I(V; Z)
    LatentOutputs,
    /// I(X_{≤n}; Z | V)
    SamplesOutputsGivenLatent,
    /// I(X_{≤n}; Z | V = v)
    SamplesOutputsGivenValue(usize),
}

/// I(A; Z) for A with distribution `pa` and Z | A given by `cond` rows.
pub fn mutual_information(pa: &[f64], cond: &[Vec<f64>]) -> f64 {
    let m = cond.first().map_or(0, Vec::len);
    let mut pz = vec![0.0; m];
    for (&p, row) in pa.iter().zip(cond) {
        for (acc, &q) in pz.iter_mut().zip(row) {
            *acc += p * q;
        }
    }
    let mut total = 0.0;
    for (&p, row) in pa.iter().zip(cond) {
        if p == 0.0 {
            continue;
        }
        for (&q, &marg) in row.iter().zip(&pz) {
            if q > 0.0 {
                total += p * q * (q / marg).ln();
            }
        }
    }
    total.max(0.0)
}

/// I(A; Z) from a joint table indexed [a][z].
pub fn mutual_information_of_joint(joint: &[Vec<f64>]) -> f64 {
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let cond: Vec<Vec<f64>> = joint
        .iter()
        .zip(&pa)
        .map(|(r, &p)| {
            if p > 0.0 {
                r.iter().map(|x| x / p).collect()
            } else {
                vec![0.0; r.len()]
            }
        })
        .collect();
    mutual_information(&pa, &cond)
}

pub fn exact_mutual_information(joint: &FiniteJoint, target: InformationTarget) -> Result<f64> {
    let cond = joint.outputs_given_samples();
    Ok(match target {
        InformationTarget::SamplesOutputs => {
            mutual_information(&joint.sample_tuple_marginal(), &cond)
        }
        InformationTarget::LatentOutputs => {
            mutual_information(joint.prior(), &pipeline_marginal(joint))
        }
        InformationTarget::SamplesOutputsGivenLatent => joint
            .prior()
            .iter()
            .enumerate()
            .map(|(v, &pv)| pv * mutual_information(&joint.sample_tuple_dist(v), &cond))
            .sum(),
        InformationTarget::SamplesOutputsGivenValue(v) => {
            if v >= joint.latent_size() {
                return Err(Error::arg("v", format!("latent value {v} out of range")));
            }
            mutual_information(&joint.sample_tuple_dist(v), &cond)
        }
    })
}

/// Distribution of the output tuple given each value of V.
pub fn pipeline_marginal(joint: &FiniteJoint) -> Vec<Vec<f64>> {
    let cond = joint.outputs_given_samples();
    (0..joint.latent_size())
        .map(|v| {
            let mut m = vec![0.0; joint.output_tuple_count()];
            for (&p, row) in joint.sample_tuple_dist(v).iter().zip(&cond) {
                for (acc, &q) in m.iter_mut().zip(row) {
                    *acc += p * q;
                }
            }
            m
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    pub tv: f64,
    pub hellinger_squared: f64,
    pub kl: f64,
    pub renyi: f64,
    pub alpha: f64,
}

pub fn exact_divergences(p: &[f64], q: &[f64], alpha: f64) -> Result<Divergences> {
    if p.len() != q.len() {
        return Err(Error::arg("q", "distributions must share an index set"));
    }
    if alpha.is_nan() || alpha < 1.0 {
        return Err(Error::arg("alpha", format!("must be ≥ 1, got {alpha}")));
    }
    Ok(Divergences {
        tv: divergence::total_variation(p, q),
        hellinger_squared: divergence::hellinger_squared(p, q),
        kl: divergence::kl(p, q),
        renyi: divergence::renyi(p, q, alpha),
        alpha,
    })
}

/// ½ Σ_j (1 − TV(M_{+j}, M_{−j})): the smallest achievable sum of
/// per-coordinate testing errors.
pub fn exact_assouad_testing_risk(marginals: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    marginals
        .iter()
        .map(|(plus, minus)| 0.5 * (1.0 - divergence::total_variation(plus, minus)))
        .sum()
}

/// Dirichlet(α, ..., α) draw.
pub fn dirichlet<R: Rng + ?Sized>(size: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    if alpha == 1.0 {
        return dirichlet_ones(size, rng);
    }
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    loop {
        let draws: Vec<f64> = (0..size).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.into_iter().map(|g| g / total).collect();
        }
    }
}

fn random_channel<R: Rng + ?Sized>(
    inputs: usize,
    outputs: usize,
    alpha: f64,
    rng: &mut R,
) -> DiscreteChannel {
    let rows = (0..inputs).map(|_| dirichlet(outputs, alpha, rng)).collect();
    DiscreteChannel::new(rows).unwrap_or_else(|_| {
        DiscreteChannel::constant(inputs, vec![1.0 / outputs as f64; outputs]).expect("uniform")
    })
}

/// Random channel with every likelihood ratio in [e^{−ε}, e^ε]: entries
/// c_z·u_{xz} with u ∈ [1, e^{ε/2}], then rows normalized.
pub fn random_pure_channel<R: Rng + ?Sized>(
    inputs: usize,
    outputs: usize,
    epsilon: f64,
    rng: &mut R,
) -> DiscreteChannel {
    let base = dirichlet_ones(outputs, rng);
    let spread = 0.5 * epsilon;
    let rows: Vec<Vec<f64>> = (0..inputs)
        .map(|_| {
            let raw: Vec<f64> = base
                .iter()
                .map(|c| c * (spread * rng.random::<f64>()).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        })
        .collect();
    DiscreteChannel::new(rows).expect("normalized rows")
}

/// Deterministic or near-deterministic channels that random rows rarely
/// approach: identity, erasures, thresholds, and rare indicator flags.
fn extreme_channels(inputs: usize, max_outputs: usize) -> Vec<DiscreteChannel> {
    let mut out = Vec::new();
    if inputs <= max_outputs {
        out.push(
            DiscreteChannel::new(
                (0..inputs)
                    .map(|x| (0..inputs).map(|z| f64::from(u8::from(z == x))).collect())
                    .collect(),
            )
            .expect("identity"),
        );
    }
    if inputs < max_outputs {
        for erase in [0.1, 0.5, 0.9, 0.999] {
            let rows = (0..inputs)
                .map(|x| {
                    let mut row = vec![0.0; inputs + 1];
                    row[x] = 1.0 - erase;
                    row[inputs] = erase;
                    row
                })
                .collect();
            out.push(DiscreteChannel::new(rows).expect("erasure"));
        }
    }
    for t in 1..inputs {
        let rows = (0..inputs)
            .map(|x| if x >= t { vec![0.0, 1.0] } else { vec![1.0, 0.0] })
            .collect();
        out.push(DiscreteChannel::new(rows).expect("threshold"));
    }
    for flagged in 0..inputs {
        for rate in [1e-2, 1e-4, 1e-6] {
            let rows = (0..inputs)
                .map(|x| if x == flagged { vec![1.0 - rate, rate] } else { vec![1.0, 0.0] })
                .collect();
            out.push(DiscreteChannel::new(rows).expect("flag"));
        }
    }
    out
}

/// Result of a randomized search for the SDPI constant of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpiSearch {
    /// Largest observed I(V; Z)/I(X; Z); a lower estimate of β.
    pub ratio: f64,
    pub channels_evaluated: usize,
    pub channels_skipped: usize,
}

fn latent_and_sample_information(
    prior: &[f64],
    dists: &[&[f64]],
    channel: &DiscreteChannel,
) -> (f64, f64) {
    let mixture: Vec<f64> = (0..dists[0].len())
        .map(|x| prior.iter().zip(dists).map(|(pv, d)| pv * d[x]).sum())
        .collect();
    let sample_info = mutual_information(&mixture, channel.rows());
    let latent_rows: Vec<Vec<f64>> = dists
        .iter()
        .map(|d| {
            (0..channel.output_size())
                .map(|z| d.iter().enumerate().map(|(x, p)| p * channel.prob(z, x)).sum())
                .collect()
        })
        .collect();
    (mutual_information(prior, &latent_rows), sample_info)
}

/// Maximize I(V; Z)/I(X; Z) over channels X → Z, with V uniform on two
/// values and X | V ∼ `p_minus` or `p_plus`. Output sizes 2..=`output_size`
/// are searched with random Dirichlet rows (flat and sparse), plus extreme
/// channels. Channels with I(X; Z) = 0 are skipped.
pub fn sdpi_constant_search(
    p_minus: &[f64],
    p_plus: &[f64],
    output_size: usize,
    trials: usize,
    rng: &mut SeededRng,
) -> Result<SdpiSearch> {
    check_distribution("p_minus", p_minus)?;
    check_distribution("p_plus", p_plus)?;
    if p_minus.len() != p_plus.len() {
        return Err(Error::arg("p_plus", "distributions must share an alphabet"));
    }
    if p_minus.len() > 8 {
        return Err(Error::arg("p_minus", "alphabet limited to 8 symbols"));
    }
    if output_size < 2 {
        return Err(Error::arg("output_size", "must be at least 2"));
    }
    if trials == 0 {
        return Err(Error::arg("trials", "must be at least 1"));
    }
    let k = p_minus.len();
    let prior = [0.5, 0.5];
    let dists = [p_minus, p_plus];
    let evaluate = |channel: &DiscreteChannel| -> Option<f64> {
        let (latent, sample) = latent_and_sample_information(&prior, &dists, channel);
        (sample > 1e-300).then(|| latent / sample)
    };
    let base = rng.next_u64();
    let random: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = SeededRng::new(base, t as u64);
            let outputs = 2 + t % (output_size - 1);
            let alpha = if t % 2 == 0 { 1.0 } else { 0.2 };
            evaluate(&random_channel(k, outputs, alpha, &mut r))
        })
        .collect();
    let extremes: Vec<Option<f64>> = extreme_channels(k, output_size).iter().map(evaluate).collect();
    let all: Vec<Option<f64>> = random.into_iter().chain(extremes).collect();
    let evaluated = all.iter().flatten().count();
    Ok(SdpiSearch {
        ratio: all.iter().flatten().copied().fold(0.0, f64::max),
        channels_evaluated: evaluated,
        channels_skipped: all.len() - evaluated,
    })
}

/// Result of one verification check. `worst_slack` is the smallest
/// (bound − value) over instances; negative means a violation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub instances: usize,
    pub worst_slack: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
}

impl VerificationReport {
    /// Accumulates (bound, value) pairs; an instance passes when
    /// value ≤ bound + tolerance.
    pub fn tally(
        check: &str,
        tolerance: f64,
        pairs: impl IntoIterator<Item = (f64, f64)>,
    ) -> Self {
        let mut instances = 0;
        let mut worst: Option<f64> = None;
        let mut max_ratio: Option<f64> = None;
        let mut pass = true;
        for (bound, value) in pairs {
            instances += 1;
            let slack = bound - value;
            worst = Some(worst.map_or(slack, |w: f64| w.min(slack)));
            if bound > 0.0 {
                let r = value / bound;
                max_ratio = Some(max_ratio.map_or(r, |m: f64| m.max(r)));
            }
            pass &= value <= bound + tolerance;
        }
        Self {
            check: check.to_string(),
            instances,
            worst_slack: worst,
            pass,
            max_ratio,
        }
    }
}

/// Product distribution check and Σ_j I(X_{·j}; Z | V) ≤ I(X_{≤n}; Z | V)
/// for samples in {0, 1}^d (bit j of a symbol is coordinate j).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub per_coordinate: Vec<f64>,
    pub coordinate_sum: f64,
    pub total: f64,
    pub pass: bool,
}

pub const DECOMPOSITION_TOLERANCE: f64 = 1e-10;

pub fn info_decomposition_check(joint: &FiniteJoint, d: usize) -> Result<DecompositionReport> {
    if d == 0 || joint.alphabet_size() != 1 << d {
        return Err(Error::arg(
            "d",
            format!("sample alphabet has {} symbols, not 2^{d}", joint.alphabet_size()),
        ));
    }
    for dist in &joint.sample_dists {
        let coord_probs: Vec<f64> = (0..d)
            .map(|j| dist.iter().enumerate().filter(|(x, _)| x >> j & 1 == 1).map(|(_, p)| p).sum())
            .collect();
        for (x, &p) in dist.iter().enumerate() {
            let product: f64 = (0..d)
                .map(|j| if x >> j & 1 == 1 { coord_probs[j] } else { 1.0 - coord_probs[j] })
                .product();
            if (product - p).abs() > 1e-12 {
                return Err(Error::arg("sample_dists", "coordinates are not independent given V"));
            }
        }
    }
    let n = joint.n();
    let cond = joint.outputs_given_samples();
    let total =
        exact_mutual_information(joint, InformationTarget::SamplesOutputsGivenLatent)?;
    let mut per_coordinate = Vec::with_capacity(d);
    for j in 0..d {
        let mut info = 0.0;
        for (v, &pv) in joint.prior().iter().enumerate() {
            let mut table = vec![vec![0.0; joint.output_tuple_count()]; 1 << n];
            for (t, &p) in joint.sample_tuple_dist(v).iter().enumerate() {
                let coords = joint
                    .sample_tuple(t)
                    .iter()
                    .fold(0usize, |acc, &x| (acc << 1) | (x >> j & 1));
                for (acc, &q) in table[coords].iter_mut().zip(&cond[t]) {
                    *acc += p * q;
                }
            }
            info += pv * mutual_information_of_joint(&table);
        }
        per_coordinate.push(info);
    }
    let coordinate_sum: f64 = per_coordinate.iter().sum();
    Ok(DecompositionReport {
        pass: coordinate_sum <= total + DECOMPOSITION_TOLERANCE,
        per_coordinate,
        coordinate_sum,
        total,
    })
}

fn binary_prior<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    let a = rng.random_range(0.05..0.95);
    vec![a, 1.0 - a]
}

/// Pair of distributions with |log P₊/P₋| ≤ `b`: P₋ Dirichlet, P₊ ∝ P₋·e^u
/// with u ∈ [−b/2, b/2].
pub fn random_bounded_pair<R: Rng + ?Sized>(size: usize, b: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let minus = dirichlet_ones(size, rng);
    let raw: Vec<f64> = minus
        .iter()
        .map(|p| p * (b * (rng.random::<f64>() - 0.5)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    (minus, raw.into_iter().map(|p| p / total).collect())
}

fn max_abs_log_ratio(p: &[f64], q: &[f64]) -> f64 {
    divergence::max_log_ratio(p, q).max(divergence::max_log_ratio(q, p))
}

/// I(V; Z) ≤ 2(e^b − 1)²·I(X; Z) over random priors, bounded-ratio pairs
/// with b ≤ `b_max`, and random channels with up to |X| + 2 outputs.
pub fn verify_sdpi_bounded_likelihood(instances: usize, b_max: f64, seed: u64) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = (0..instances)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededRng::new(seed, t as u64);
            let k = rng.random_range(2..=6);
            let b = rng.random_range(0.0..=b_max);
            let (minus, plus) = random_bounded_pair(k, b, &mut rng);
            let prior = binary_prior(&mut rng);
            let outputs = rng.random_range(2..=k + 2);
            let alpha = if t % 2 == 0 { 1.0 } else { 0.2 };
            let channel = random_channel(k, outputs, alpha, &mut rng);
            let b_actual = max_abs_log_ratio(&minus, &plus);
            let cap = 2.0 * b_actual.exp_m1().powi(2);
            let (latent, sample) =
                latent_and_sample_information(&prior, &[&minus, &plus], &channel);
            (cap * sample, latent)
        })
        .collect();
    VerificationReport::tally("sdpi_bounded_likelihood", 1e-10, pairs)
}

/// sdpi_constant_search stays below the Bernoulli-pair cap 2δ²/(1 − δ)².
pub fn verify_sdpi_search_bernoulli(deltas: &[f64], trials: usize, seed: u64) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let mut rng = SeededRng::new(seed, i as u64);
            let minus = [0.5, 0.5];
            let plus = [0.5 * (1.0 - delta), 0.5 * (1.0 + delta)];
            let cap = 2.0 * delta * delta / (1.0 - delta).powi(2);
            let found = sdpi_constant_search(&minus, &plus, 4, trials, &mut rng)
                .map_or(f64::INFINITY, |s| s.ratio);
            (cap, found)
        })
        .collect();
    VerificationReport::tally("sdpi_search_bernoulli", 0.0, pairs)
}

/// TV² ≤ ½·KL and Rényi monotonicity in α on random pairs.
pub fn verify_pinsker_and_renyi(instances: usize, seed: u64) -> Vec<VerificationReport> {
    let samples: Vec<(f64, f64, f64)> = (0..instances)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededRng::new(seed, t as u64);
            let k = rng.random_range(2..=8);
            let p = dirichlet(k, 0.5, &mut rng);
            let q = dirichlet_ones(k, &mut rng);
            let tv = divergence::total_variation(&p, &q);
            let kl = divergence::kl(&p, &q);
            let alphas = [1.0, 1.5, 2.0, 3.0, 5.0, 10.0];
            let renyi: Vec<f64> = alphas.iter().map(|&a| divergence::renyi(&p, &q, a)).collect();
            let worst_drop = renyi
                .windows(2)
                .map(|w| w[0] - w[1])
                .fold(f64::NEG_INFINITY, f64::max);
            (tv, kl, worst_drop)
        })
        .collect();
    vec![
        VerificationReport::tally(
            "pinsker",
            1e-12,
            samples.iter().map(|&(tv, kl, _)| (0.5 * kl, tv * tv)),
        ),
        VerificationReport::tally(
            "renyi_monotone_in_order",
            1e-12,
            samples.iter().map(|&(_, _, drop)| (0.0, drop)),
        ),
    ]
}

/// Random sequential ε-pure pipelines on binary data, n ≤ `max_n`: a shared
/// randomized response, independent random pure channels per sample, and
/// history-dependent random pure channels.
pub fn pure_pipelines(epsilon: f64, max_n: usize, per_shape: usize, seed: u64) -> Vec<FiniteJoint> {
    let mut rng = SeededRng::new(seed, epsilon.to_bits());
    let mut out = Vec::new();
    for n in 1..=max_n {
        for rep in 0..per_shape {
            let prior = binary_prior(&mut rng);
            let dists: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    let p = rng.random::<f64>();
                    vec![1.0 - p, p]
                })
                .collect();
            if rep == 0 {
                out.push(
                    FiniteJoint::non_adaptive(
                        prior.clone(),
                        dists.clone(),
                        DiscreteChannel::randomized_response(epsilon),
                        n,
                    )
                    .expect("small pipeline"),
                );
            }
            let outputs = 2 + rep % 2;
            let independent = (0..n)
                .map(|_| Stage::fixed(random_pure_channel(2, outputs, epsilon, &mut rng)))
                .collect();
            out.push(FiniteJoint::new(prior.clone(), dists.clone(), independent).expect("small"));
            let mut histories = 1;
            let mut adaptive = Vec::with_capacity(n);
            for _ in 0..n {
                adaptive.push(Stage::adaptive(
                    (0..histories)
                        .map(|_| random_pure_channel(2, outputs, epsilon, &mut rng))
                        .collect(),
                ));
                histories *= outputs;
            }
            out.push(FiniteJoint::new(prior, dists, adaptive).expect("small pipeline"));
        }
    }
    out
}

/// I(X_{≤n}; Z | V) ≤ n·min{ε, ε²/log 2} on random pure pipelines.
pub fn verify_pure_dp_budget(epsilons: &[f64], max_n: usize, per_shape: usize, seed: u64) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = epsilons
        .iter()
        .flat_map(|&eps| {
            pure_pipelines(eps, max_n, per_shape, seed)
                .into_iter()
                .map(move |j| (eps, j))
        })
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(eps, joint)| {
            let info =
                exact_mutual_information(&joint, InformationTarget::SamplesOutputsGivenLatent)
                    .expect("valid target");
            (info_budget_full_interactive(joint.n(), kl_from_pure(eps)), info)
        })
        .collect();
    VerificationReport::tally("pure_dp_information_budget", 1e-10, pairs)
}

/// H²(M₋₁, M₁) ≤ (7/2)(e^b + 1)·β·min_v I(X_{≤n}; Z | V = v) on 1- and
/// 2-sample pipelines, with β the bounded-likelihood cap.
pub fn verify_hellinger(instances: usize, seed: u64) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = (0..instances)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededRng::new(seed, t as u64);
            let n = 1 + t % 2;
            let k = rng.random_range(2..=3);
            let (minus, plus) = random_bounded_pair(k, rng.random_range(0.0..1.0), &mut rng);
            let b = max_abs_log_ratio(&minus, &plus);
            let sdpi = sdpi_bounded_likelihood(b).expect("nonnegative");
            let eps = rng.random_range(0.1..3.0);
            let channel = if t % 3 == 0 {
                random_channel(k, rng.random_range(2..=4), 1.0, &mut rng)
            } else {
                random_pure_channel(k, rng.random_range(2..=4), eps, &mut rng)
            };
            let joint = FiniteJoint::non_adaptive(vec![0.5, 0.5], vec![minus, plus], channel, n)
                .expect("small pipeline");
            let info = (0..2)
                .map(|v| {
                    exact_mutual_information(&joint, InformationTarget::SamplesOutputsGivenValue(v))
                        .expect("valid latent")
                })
                .fold(f64::INFINITY, f64::min);
            let m = pipeline_marginal(&joint);
            let h2 = divergence::hellinger_squared(&m[0], &m[1]);
            (braverman_hellinger_bound(sdpi, info), h2)
        })
        .collect();
    VerificationReport::tally("hellinger_bound", 1e-12, pairs)
}

/// Exact ½(1 − TV) ≥ the Assouad bound for one sample, one coordinate,
/// packing Ber(½) against Ber((1 + δ)/2), and randomized response at ε.
pub fn assouad_single_coordinate(epsilon: f64, delta: f64) -> (f64, f64) {
    let rr = DiscreteChannel::randomized_response(epsilon);
    let joint = FiniteJoint::non_adaptive(
        vec![0.5, 0.5],
        vec![vec![0.5, 0.5], vec![0.5 * (1.0 - delta), 0.5 * (1.0 + delta)]],
        rr,
        1,
    )
    .expect("tiny pipeline");
    let m = pipeline_marginal(&joint);
    let exact = exact_assouad_testing_risk(&[(m[1].clone(), m[0].clone())]);
    let b = -(-delta).ln_1p();
    let sdpi = sdpi_bounded_likelihood(b).expect("nonnegative");
    let bound = assouad_testing_bound(1, sdpi, info_budget_full_interactive(1, kl_from_pure(epsilon)), 0.0);
    (exact, bound)
}

pub fn verify_assouad(epsilons: &[f64], deltas: &[f64]) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = epsilons
        .iter()
        .flat_map(|&e| deltas.iter().map(move |&d| assouad_single_coordinate(e, d)))
        .collect();
    VerificationReport::tally("assouad_single_coordinate", 1e-12, pairs)
}

/// Packing radii where the Bernoulli-pair SDPI cap is informative.
pub fn default_packing_radii() -> Vec<f64> {
    (1..=19).map(|i| f64::from(i) * 0.05).collect()
}

/// Cross-check of the two SDPI routes for the Bernoulli pair: the pair's
/// closed form coincides with the bounded-likelihood cap.
pub fn bernoulli_caps_agree(delta: f64) -> bool {
    let pair = sdpi_bernoulli_pair(delta).expect("delta < 1");
    let general = sdpi_bounded_likelihood(pair.llr_bound).expect("nonnegative");
    (pair.beta - general.beta).abs() < 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::binary_entropy;

    fn uniform_bit_joint(channel: DiscreteChannel) -> FiniteJoint {
        FiniteJoint::non_adaptive(vec![1.0], vec![vec![0.5, 0.5]], channel, 1).unwrap()
    }

    #[test]
    fn mutual_information_values() {
        let independent = uniform_bit_joint(DiscreteChannel::constant(2, vec![0.3, 0.7]).unwrap());
        assert_eq!(
            exact_mutual_information(&independent, InformationTarget::SamplesOutputs).unwrap(),
            0.0
        );
        let identity =
            uniform_bit_joint(DiscreteChannel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let mi = exact_mutual_information(&identity, InformationTarget::SamplesOutputs).unwrap();
        assert!((mi - 2f64.ln()).abs() < 1e-15);
        let bsc =
            uniform_bit_joint(DiscreteChannel::new(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap());
        let mi = exact_mutual_information(&bsc, InformationTarget::SamplesOutputs).unwrap();
        assert!((mi - (2f64.ln() - binary_entropy(0.25))).abs() < 1e-15);
        assert!((mi - 0.130_812).abs() < 1e-6);
    }

    #[test]
    fn divergence_values() {
        let same = exact_divergences(&[0.3, 0.7], &[0.3, 0.7], 2.0).unwrap();
        assert_eq!((same.tv, same.hellinger_squared, same.kl, same.renyi), (0.0, 0.0, 0.0, 0.0));
        let disjoint = exact_divergences(&[1.0, 0.0], &[0.0, 1.0], 2.0).unwrap();
        assert_eq!((disjoint.tv, disjoint.hellinger_squared), (1.0, 1.0));
        assert_eq!(disjoint.kl, f64::INFINITY);
        let b = exact_divergences(&[0.25, 0.75], &[0.75, 0.25], 1.0).unwrap();
        assert!((b.tv - 0.5).abs() < 1e-15);
        assert!((b.kl - 0.549_306_144_334_054_9).abs() < 1e-15);
    }

    #[test]
    fn pipeline_marginals() {
        let eps: f64 = 1.0;
        let keep = eps.exp() / (1.0 + eps.exp());
        let rr = DiscreteChannel::randomized_response(eps);
        let joint = FiniteJoint::non_adaptive(
            vec![0.5, 0.5],
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            rr.clone(),
            1,
        )
        .unwrap();
        let m = pipeline_marginal(&joint);
        assert!((m[0][1] - (0.8 * (1.0 - keep) + 0.2 * keep)).abs() < 1e-15);
        assert!((m[1][1] - (0.3 * (1.0 - keep) + 0.7 * keep)).abs() < 1e-15);

        let flat = FiniteJoint::non_adaptive(
            vec![0.5, 0.5],
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            DiscreteChannel::constant(2, vec![0.4, 0.6]).unwrap(),
            2,
        )
        .unwrap();
        let m = pipeline_marginal(&flat);
        for (a, b) in m[0].iter().zip(&m[1]) {
            assert!((a - b).abs() < 1e-15);
        }

        let two = FiniteJoint::non_adaptive(
            vec![0.5, 0.5],
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            rr,
            2,
        )
        .unwrap();
        let single = pipeline_marginal(&joint);
        let pair = pipeline_marginal(&two);
        for v in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    assert!((pair[v][a * 2 + b] - single[v][a] * single[v][b]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn adaptive_stage_uses_history() {
        let copy = DiscreteChannel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let flip = DiscreteChannel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        // Second output flips X_2 exactly when Z_1 = 1.
        let joint = FiniteJoint::new(
            vec![1.0],
            vec![vec![0.0, 1.0]],
            vec![Stage::fixed(copy.clone()), Stage::adaptive(vec![copy, flip])],
        )
        .unwrap();
        let m = pipeline_marginal(&joint);
        assert_eq!(m[0], vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn oversized_instances_rejected() {
        let rr = DiscreteChannel::randomized_response(1.0);
        let err = FiniteJoint::non_adaptive(vec![0.5, 0.5], vec![vec![0.5, 0.5]; 2], rr, 20);
        assert!(matches!(err, Err(Error::TooLarge { .. })));
    }

    #[test]
    fn sdpi_search_respects_caps() {
        let mut rng = SeededRng::new(3, 0);
        let same = sdpi_constant_search(&[0.3, 0.7], &[0.3, 0.7], 4, 200, &mut rng).unwrap();
        assert!(same.ratio < 1e-12);
        for delta in [0.1, 0.2, 0.5] {
            let s = sdpi_constant_search(
                &[0.5, 0.5],
                &[0.5 * (1.0 - delta), 0.5 * (1.0 + delta)],
                4,
                2000,
                &mut rng,
            )
            .unwrap();
            let cap = 2.0 * delta * delta / (1.0 - delta).powi(2);
            assert!(s.ratio <= cap, "delta={delta}: {} > {cap}", s.ratio);
            assert!(s.ratio > 0.0);
        }
    }

    #[test]
    fn assouad_risk_values() {
        let same = vec![(vec![0.5, 0.5], vec![0.5, 0.5]); 3];
        assert_eq!(exact_assouad_testing_risk(&same), 1.5);
        let apart = vec![(vec![1.0, 0.0], vec![0.0, 1.0]); 3];
        assert_eq!(exact_assouad_testing_risk(&apart), 0.0);

        let eps: f64 = 1.0;
        let (exact, bound) = assouad_single_coordinate(eps, 0.5);
        // M₊(1) − M₋(1) = (δ/2)(2·keep − 1)
        let keep = eps.exp() / (1.0 + eps.exp());
        let tv = 0.25 * (2.0 * keep - 1.0);
        assert!((exact - 0.5 * (1.0 - tv)).abs() < 1e-15);
        assert!(exact >= bound);
    }

    #[test]
    fn decomposition_cases() {
        let rr = DiscreteChannel::randomized_response(1.0);
        let one = FiniteJoint::non_adaptive(vec![0.5, 0.5], vec![vec![0.4, 0.6], vec![0.7, 0.3]], rr.clone(), 2)
            .unwrap();
        let r = info_decomposition_check(&one, 1).unwrap();
        assert!((r.coordinate_sum - r.total).abs() < 1e-12);

        // Two coordinates, each released through its own randomized response.
        let product_dist = |a: f64, b: f64| vec![(1.0 - a) * (1.0 - b), a * (1.0 - b), (1.0 - a) * b, a * b];
        let dists = vec![product_dist(0.2, 0.7), product_dist(0.6, 0.4)];
        let separate = rr.product(&rr);
        // product() indexes pairs most-significant first; sample bit 0 is
        // the least significant, so reorder to match.
        let rows = (0..4)
            .map(|x: usize| {
                let swapped = ((x & 1) << 1) | (x >> 1);
                let row = separate.row(swapped);
                (0..4).map(|z: usize| row[((z & 1) << 1) | (z >> 1)]).collect()
            })
            .collect();
        let per_coord = DiscreteChannel::new(rows).unwrap();
        let joint = FiniteJoint::non_adaptive(vec![0.5, 0.5], dists.clone(), per_coord, 1).unwrap();
        let r = info_decomposition_check(&joint, 2).unwrap();
        assert!((r.coordinate_sum - r.total).abs() < 1e-10);
        assert!(r.pass);

        // Parity-biased release mixes coordinates.
        let parity = DiscreteChannel::new(
            (0..4)
                .map(|x: u32| if x.count_ones() % 2 == 0 { vec![0.8, 0.2] } else { vec![0.2, 0.8] })
                .collect(),
        )
        .unwrap();
        let joint = FiniteJoint::non_adaptive(vec![0.5, 0.5], dists, parity, 1).unwrap();
        let r = info_decomposition_check(&joint, 2).unwrap();
        assert!(r.pass);
        assert!(r.coordinate_sum < r.total - 1e-6);
    }

    #[test]
    fn decomposition_rejects_dependent_coordinates() {
        let rr = DiscreteChannel::constant(4, vec![0.5, 0.5]).unwrap();
        let joint =
            FiniteJoint::non_adaptive(vec![1.0], vec![vec![0.5, 0.0, 0.0, 0.5]], rr, 1).unwrap();
        assert!(info_decomposition_check(&joint, 2).is_err());
    }

    #[test]
    fn random_pure_channels_are_pure() {
        let mut rng = SeededRng::new(4, 0);
        for _ in 0..200 {
            let eps = rng.random_range(0.05..3.0);
            let ch = random_pure_channel(3, 4, eps, &mut rng);
            assert!(crate::channels::audit_pure_dp(&ch) <= eps + 1e-12);
        }
    }

    #[test]
    fn small_verifications_pass() {
        assert!(verify_sdpi_bounded_likelihood(200, 1.0, 1).pass);
        assert!(verify_pure_dp_budget(&[0.5, 1.0], 2, 2, 1).pass);
        assert!(verify_hellinger(100, 1).pass);
        assert!(verify_assouad(&[0.25, 0.5, 1.0], &default_packing_radii()).pass);
        for r in verify_pinsker_and_renyi(200, 1) {
            assert!(r.pass, "{}", r.check);
        }
        let empty = verify_sdpi_bounded_likelihood(0, 1.0, 1);
        assert!(empty.pass);
        assert_eq!(empty.instances, 0);
        assert_eq!(empty.worst_slack, None);
        assert!(bernoulli_caps_agree(0.3));
    }
}
