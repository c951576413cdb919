//! Sampleable locally private releases.
//!
//! Every mechanism returns a [`PrivateRelease`] carrying the released vector
//! and the metadata an estimator needs to debias it. All randomness comes
//! from an explicit [`SeededRng`].

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::channels::DiscreteChannel;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// One privatized observation.
///
/// `values[j]` is `None` for coordinates the mechanism did not release.
/// For every released coordinate, `E[Z_j · 1{released} | input] =
/// unbias_factor · target_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateRelease {
    pub values: Vec<Option<f64>>,
    pub magnitude_bound: f64,
    pub unbias_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_coords: Option<Vec<usize>>,
}

impl PrivateRelease {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The released value of a one-coordinate release.
    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.values.len(), 1);
        self.values[0].expect("scalar release is always observed")
    }
}

/// sign(x) with sign(0) = +1.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Magnitude (e^ε + 1)/(e^ε − 1) of a debiased randomized-response release.
pub fn rr_magnitude(epsilon: f64) -> f64 {
    1.0 / (0.5 * epsilon).tanh()
}

fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(name, format!("must be finite, got {x}")))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::arg(name, format!("must be > 0, got {v}")))
    }
}

fn rr_draw(bit: f64, epsilon: f64, rng: &mut SeededRng) -> f64 {
    let keep = 1.0 / (1.0 + (-epsilon).exp());
    let b = rr_magnitude(epsilon);
    if rng.random::<f64>() < keep {
        b * bit
    } else {
        -b * bit
    }
}

/// Randomized response on sign(x), rescaled so that E[Z | x] = sign(x).
pub fn rr_sign_mechanism(x: f64, epsilon: f64, rng: &mut SeededRng) -> Result<PrivateRelease> {
    check_positive("epsilon", epsilon)?;
    check_finite("x", x)?;
    let z = rr_draw(sign(x), epsilon, rng);
    Ok(PrivateRelease {
        values: vec![Some(z)],
        magnitude_bound: rr_magnitude(epsilon),
        unbias_factor: 1.0,
        sampled_coords: None,
    })
}

/// Two-symbol channel induced by [`rr_sign_mechanism`]; input and output
/// index 0 is the negative sign.
pub fn rr_sign_channel(epsilon: f64) -> DiscreteChannel {
    DiscreteChannel::randomized_response(epsilon)
}

/// Randomized response applied to each coordinate's sign at budget ε/d, so
/// the whole vector is ε-private by composition.
pub fn rr_sign_vector_mechanism(
    x: &[f64],
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<PrivateRelease> {
    check_positive("epsilon", epsilon)?;
    if x.is_empty() {
        return Err(Error::arg("x", "dimension must be at least 1"));
    }
    let per_coord = epsilon / x.len() as f64;
    let mut values = Vec::with_capacity(x.len());
    for &xj in x {
        check_finite("x", xj)?;
        values.push(Some(rr_draw(sign(xj), per_coord, rng)));
    }
    Ok(PrivateRelease {
        values,
        magnitude_bound: rr_magnitude(per_coord),
        unbias_factor: 1.0,
        sampled_coords: None,
    })
}

/// Release ⌊ε⌋ ∧ d uniformly chosen coordinates (without replacement), each
/// through randomized response at budget 1. The chosen set is public.
pub fn coordinate_subsample_mechanism(
    x: &[f64],
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<PrivateRelease> {
    if epsilon.is_nan() || epsilon < 1.0 {
        return Err(Error::arg("epsilon", format!("must be ≥ 1, got {epsilon}")));
    }
    let d = x.len();
    if d == 0 {
        return Err(Error::arg("x", "dimension must be at least 1"));
    }
    for &xj in x {
        check_finite("x", xj)?;
    }
    let count = subsample_size(epsilon, d);
    let mut chosen = index::sample(rng, d, count).into_vec();
    chosen.sort_unstable();
    let mut values = vec![None; d];
    for &j in &chosen {
        values[j] = Some(rr_draw(sign(x[j]), 1.0, rng));
    }
    Ok(PrivateRelease {
        values,
        magnitude_bound: rr_magnitude(1.0),
        unbias_factor: count as f64 / d as f64,
        sampled_coords: Some(chosen),
    })
}

/// Number of coordinates released by the subsampling mechanism.
pub fn subsample_size(epsilon: f64, d: usize) -> usize {
    (epsilon.floor() as usize).min(d)
}

/// Channel of the subsampling mechanism conditioned on a chosen set of
/// `count` coordinates: a product of budget-1 randomized responses.
pub fn coordinate_subsample_channel(count: usize) -> DiscreteChannel {
    let rr = rr_sign_channel(1.0);
    (1..count).fold(rr.clone(), |acc, _| acc.product(&rr))
}

/// The ℓ∞-style mechanism on sign vectors.
///
/// Given v = sgn(x) ∈ {−1, 1}^d, a sign vector W is drawn with probability
/// proportional to e^ε when ⟨W, v⟩ > 0 and to 1 otherwise, and Z = W/m is
/// released, where m = E[W_j v_j] is computed exactly. For odd d this puts
/// mass e^ε/(1+e^ε) on the open halfspace; ties ⟨W, v⟩ = 0 (even d) sit in
/// the low-weight set. Every pair of outcome probabilities is within a factor
/// e^ε, so the release is ε-private for all d.
#[derive(Clone, Debug)]
pub struct LinfSampler {
    d: usize,
    epsilon: f64,
    /// P(W agrees with v on exactly k coordinates), k = 0..=d.
    agree_probs: Vec<f64>,
    bias: f64,
}

impl LinfSampler {
    pub fn new(d: usize, epsilon: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::arg("d", "dimension must be at least 1"));
        }
        check_positive("epsilon", epsilon)?;
        let df = d as f64;
        // c_k = C(d, k) / 2^d
        let c: Vec<f64> = (0..=d)
            .map(|k| (ln_binomial(d as u64, k as u64) - df * std::f64::consts::LN_2).exp())
            .collect();
        let upper = |k: usize| 2 * k > d;
        let upper_mass: f64 = (0..=d).filter(|&k| upper(k)).map(|k| c[k]).sum();
        let tilt = (-epsilon).exp();
        let denom = upper_mass + (1.0 - upper_mass) * tilt;
        let agree_probs = (0..=d)
            .map(|k| if upper(k) { c[k] / denom } else { c[k] * tilt / denom })
            .collect();
        // Σ_k c_k (2k − d)/d vanishes, so only the upper half contributes
        // and the e^{-ε} part enters through 1 − e^{-ε}.
        let upper_drift: f64 = (0..=d)
            .filter(|&k| upper(k))
            .map(|k| c[k] * (2.0 * k as f64 - df) / df)
            .sum();
        let bias = upper_drift * -(-epsilon).exp_m1() / denom;
        Ok(Self {
            d,
            epsilon,
            agree_probs,
            bias,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// m = E[W_j v_j].
    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn magnitude_bound(&self) -> f64 {
        1.0 / self.bias
    }

    fn draw_agreements(&self, rng: &mut SeededRng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.agree_probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.d
    }

    pub fn sample(&self, x: &[f64], rng: &mut SeededRng) -> Result<PrivateRelease> {
        if x.len() != self.d {
            return Err(Error::arg(
                "x",
                format!("expected dimension {}, got {}", self.d, x.len()),
            ));
        }
        for &xj in x {
            check_finite("x", xj)?;
        }
        let agreements = self.draw_agreements(rng);
        let mut w: Vec<f64> = x.iter().map(|&xj| -sign(xj)).collect();
        for j in index::sample(rng, self.d, agreements) {
            w[j] = -w[j];
        }
        let scale = self.magnitude_bound();
        Ok(PrivateRelease {
            values: w.into_iter().map(|wj| Some(wj * scale)).collect(),
            magnitude_bound: scale,
            unbias_factor: 1.0,
            sampled_coords: None,
        })
    }

    /// Probability of a particular W that agrees with v on `agreements`
    /// coordinates.
    pub fn outcome_prob(&self, agreements: usize) -> f64 {
        let ln_count = ln_binomial(self.d as u64, agreements as u64);
        self.agree_probs[agreements] / ln_count.exp()
    }

    /// Full 2^d × 2^d channel from sign vectors to W; bit j of an index set
    /// means coordinate j is +1.
    pub fn channel(&self) -> Result<DiscreteChannel> {
        if self.d > 12 {
            return Err(Error::TooLarge {
                atoms: 1u128 << (2 * self.d),
                limit: 1u128 << 24,
            });
        }
        let size = 1usize << self.d;
        let rows = (0..size)
            .map(|v| {
                (0..size)
                    .map(|w| {
                        let disagreements = (v ^ w).count_ones() as usize;
                        self.outcome_prob(self.d - disagreements)
                    })
                    .collect::<Vec<_>>()
            })
            .map(|mut row: Vec<f64>| {
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
                row
            })
            .collect();
        DiscreteChannel::new(rows)
    }
}

pub fn linf_mechanism(x: &[f64], epsilon: f64, rng: &mut SeededRng) -> Result<PrivateRelease> {
    LinfSampler::new(x.len(), epsilon)?.sample(x, rng)
}

/// Noise variance sensitivity²/(2 ε_kl) that makes the Gaussian release
/// ε_kl-KL-private for inputs in an interval of width `sensitivity`.
pub fn gaussian_noise_variance(sensitivity: f64, epsilon_kl: f64) -> f64 {
    sensitivity * sensitivity / (2.0 * epsilon_kl)
}

/// KL divergence between N(a, s²) and N(a + shift, s²).
pub fn shifted_gaussian_kl(shift: f64, variance: f64) -> f64 {
    shift * shift / (2.0 * variance)
}

/// Z = x + N(0, s²) with s² from [`gaussian_noise_variance`]. The release is
/// unbounded, so `magnitude_bound` is infinite.
pub fn gaussian_noise_mechanism(
    x: f64,
    sensitivity: f64,
    epsilon_kl: f64,
    rng: &mut SeededRng,
) -> Result<PrivateRelease> {
    check_positive("sensitivity", sensitivity)?;
    check_positive("epsilon_kl", epsilon_kl)?;
    check_finite("x", x)?;
    let sd = gaussian_noise_variance(sensitivity, epsilon_kl).sqrt();
    let noise = Normal::new(0.0, sd).expect("finite positive sd");
    Ok(PrivateRelease {
        values: vec![Some(x + noise.sample(rng))],
        magnitude_bound: f64::INFINITY,
        unbias_factor: 1.0,
        sampled_coords: None,
    })
}

/// Randomized response on a single known-structure bit B_i ∈ {−1, +1}.
pub fn correlated_bit_mechanism(
    bit: f64,
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<PrivateRelease> {
    if bit != 1.0 && bit != -1.0 {
        return Err(Error::arg("bit", format!("must be ±1, got {bit}")));
    }
    rr_sign_mechanism(bit, epsilon, rng)
}
