//! Minimax lower-bound machinery: SDPI constants, Assouad testing bounds,
//! information budgets and closed-form bounds for each problem family.
//!
//! Closed forms carry no unknown absolute constants (they are set to 1). The
//! Bernoulli bound is additionally instantiated by optimizing the Assouad
//! chain over the packing radius.

use serde::{Deserialize, Serialize};

use crate::divergence::binary_entropy;
use crate::error::{Error, Result};
use crate::estimators::Family;

/// Upper bound on a strong data processing constant together with the
/// log-likelihood-ratio bound of the testing pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpiEstimate {
    pub beta: f64,
    pub llr_bound: f64,
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::arg(name, format!("must be ≥ 0, got {v}")))
    }
}

fn check_pos(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::arg(name, format!("must be > 0, got {v}")))
    }
}

/// β ≤ 2(e^b − 1)², clamped to 1, for a pair with |log dP₁/dP₋₁| ≤ b.
pub fn sdpi_bounded_likelihood(llr_bound: f64) -> Result<SdpiEstimate> {
    check_nonneg("llr_bound", llr_bound)?;
    let beta = (2.0 * llr_bound.exp_m1().powi(2)).min(1.0);
    Ok(SdpiEstimate { beta, llr_bound })
}

/// Ber(½) against Ber((1 + δ)/2): β ≤ 2δ²/(1 − δ)² and b = −log(1 − δ).
pub fn sdpi_bernoulli_pair(delta: f64) -> Result<SdpiEstimate> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::arg("delta", format!("must lie in [0, 1), got {delta}")));
    }
    let beta = (2.0 * delta * delta / (1.0 - delta).powi(2)).min(1.0);
    Ok(SdpiEstimate {
        beta,
        llr_bound: -(-delta).ln_1p(),
    })
}

/// Packing of the hypercube {−1, 1}^d with Hamming separation `delta_sep`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationSpec {
    pub delta_sep: f64,
    pub dimension: usize,
}

impl SeparationSpec {
    pub fn new(delta_sep: f64, dimension: usize) -> Result<Self> {
        check_pos("delta_sep", delta_sep)?;
        if dimension == 0 {
            return Err(Error::arg("dimension", "must be at least 1"));
        }
        Ok(Self {
            delta_sep,
            dimension,
        })
    }
}

/// Lower bound on Σ_j P(V̂_j ≠ V_j):
/// max{(d/2)(1 − √(7(e^b + 1)·β·info/d) − slack), 0}.
pub fn assouad_testing_bound(d: usize, sdpi: SdpiEstimate, info_budget: f64, slack: f64) -> f64 {
    let df = d as f64;
    let radicand = 7.0 * (sdpi.llr_bound.exp() + 1.0) * sdpi.beta * info_budget / df;
    let raw = 0.5 * df * (1.0 - radicand.sqrt() - slack);
    if raw.is_nan() {
        return 0.0;
    }
    raw.clamp(0.0, df)
}

/// M_n ≥ δ · Σ_j P(V̂_j ≠ V_j).
pub fn assouad_minimax_bound(sep: SeparationSpec, testing_bound: f64) -> f64 {
    sep.delta_sep * testing_bound
}

/// I(X_{≤n}; Z | V) ≤ n·ε_kl.
pub fn info_budget_full_interactive(n: usize, epsilon_kl: f64) -> f64 {
    n as f64 * epsilon_kl
}

/// I(X_{≤n}; Z | V) ≤ n·min{9ε, 75ε²} for approximately private releases
/// meeting the small-δ parameter conditions.
pub fn info_budget_approx_dp(n: usize, epsilon: f64) -> f64 {
    n as f64 * (9.0 * epsilon).min(75.0 * epsilon * epsilon)
}

/// Per-sample mutual information bounds for (ε, δ)-private releases over a
/// finite alphabet. A slot is `None` when its precondition fails.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaInfoBound {
    pub p_eta: f64,
    /// 6ε + p_η log|X| + h₂(p_η), available when p_η ≤ 1.
    pub coarse: Option<f64>,
    /// The refined small-ε form, available when
    /// η(2e^{6ε}/(e^{3ε} − 1) + 1) ≤ ½ and p_η ≤ 1.
    pub refined: Option<f64>,
}

pub fn info_bound_eta(
    epsilon: f64,
    delta: f64,
    eta: f64,
    alphabet_size: usize,
) -> Result<EtaInfoBound> {
    check_pos("epsilon", epsilon)?;
    check_nonneg("delta", delta)?;
    check_pos("eta", eta)?;
    if alphabet_size < 2 {
        return Err(Error::arg("alphabet_size", "must be at least 2"));
    }
    let e3 = (3.0 * epsilon).exp();
    let e3m1 = (3.0 * epsilon).exp_m1();
    let p_eta = 2.0 * (delta / eta + eta * e3 / e3m1 + delta * epsilon.exp() / epsilon.exp_m1());
    let tail = |p: f64| p * (alphabet_size as f64).ln() + binary_entropy(p);
    let coarse = (p_eta <= 1.0).then(|| 6.0 * epsilon + tail(p_eta));
    let e6 = (6.0 * epsilon).exp();
    let small_eta = eta * (2.0 * e6 / e3m1 + 1.0) <= 0.5;
    let refined = (small_eta && p_eta <= 1.0).then(|| {
        6.0 * epsilon * (6.0 * epsilon).exp_m1()
            + 3.0 * eta * (e3 + 3.0 * eta * (12.0 * epsilon).exp() / (e3m1 * e3m1))
            + tail(p_eta)
    });
    Ok(EtaInfoBound {
        p_eta,
        coarse,
        refined,
    })
}

/// Per-coordinate loss ℓ for coordinate-separable losses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Squared,
    Absolute,
}

impl Loss {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Loss::Squared => t * t,
            Loss::Absolute => t.abs(),
        }
    }

    /// Σ_j ℓ(a_j − b_j).
    pub fn total(self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| self.eval(x - y)).sum()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Absolute => "absolute",
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Loss::Squared),
            "absolute" => Ok(Loss::Absolute),
            _ => Err(Error::Unknown {
                kind: "loss",
                name: s.to_string(),
            }),
        }
    }
}

/// Inputs and intermediate quantities behind a lower bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundIngredients {
    pub n: usize,
    pub d: usize,
    pub epsilon_kl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Packing radius: the two per-coordinate means differ by this / 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packing_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_sep: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llr_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub testing_bound: Option<f64>,
}

/// An evaluated lower bound. `scaling` is the constant-free closed form;
/// `instantiated` is the optimized Assouad chain where one is available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub setting: Family,
    pub formula_id: String,
    pub scaling: f64,
    pub instantiated: Option<f64>,
    pub ingredients: BoundIngredients,
}

impl LowerBoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check_common(n: usize, d: usize, epsilon_kl: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    if d == 0 {
        return Err(Error::arg("d", "must be at least 1"));
    }
    check_pos("epsilon_kl", epsilon_kl)
}

/// The Assouad chain for the Bernoulli packing with radius `delta`: means ½
/// and (1 + δ)/2 per coordinate, separation ℓ(δ/4).
fn bernoulli_chain(n: usize, d: usize, epsilon_kl: f64, loss: Loss, delta: f64) -> (f64, f64) {
    let sdpi = sdpi_bernoulli_pair(delta).expect("delta in [0, 1)");
    let testing = assouad_testing_bound(d, sdpi, info_budget_full_interactive(n, epsilon_kl), 0.0);
    (loss.eval(delta / 4.0) * testing, testing)
}

/// Maximizer of the Bernoulli chain over the packing radius: a log-spaced
/// grid followed by golden-section refinement in the best grid cell.
fn optimize_bernoulli_radius(n: usize, d: usize, epsilon_kl: f64, loss: Loss) -> f64 {
    let value = |delta: f64| bernoulli_chain(n, d, epsilon_kl, loss, delta).0;
    let (lo, hi): (f64, f64) = (1e-12, 1.0 - 1e-12);
    let points = 2000;
    let grid: Vec<f64> = (0..=points)
        .map(|i| {
            let t = i as f64 / points as f64;
            // log-spaced in δ, plus a linear component to resolve δ near 1
            0.5 * ((lo.ln() + t * (hi.ln() - lo.ln())).exp() + lo + t * (hi - lo))
        })
        .collect();
    let best = (0..grid.len())
        .max_by(|&a, &b| value(grid[a]).total_cmp(&value(grid[b])))
        .expect("nonempty grid");
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(points)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut e = a + ratio * (b - a);
    for _ in 0..200 {
        if value(c) >= value(e) {
            b = e;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        e = a + ratio * (b - a);
        if b - a < 1e-15 {
            break;
        }
    }
    let refined = 0.5 * (a + b);
    if value(refined) >= value(grid[best]) {
        refined
    } else {
        grid[best]
    }
}

/// Bernoulli means on {0, 1}^d under coordinate-separable loss.
///
/// Scaling form: d·ℓ(√(d/(nε_kl)) ∧ 1). Instantiated: the best value of
/// ℓ(δ/4)·(d/2)(1 − √(7(e^b + 1)β·nε_kl/d)) over the packing radius δ.
pub fn corollary_bernoulli_bound(
    n: usize,
    d: usize,
    epsilon_kl: f64,
    loss: Loss,
) -> Result<LowerBoundReport> {
    check_common(n, d, epsilon_kl)?;
    let rate = (d as f64 / (n as f64 * epsilon_kl)).sqrt().min(1.0);
    let scaling = d as f64 * loss.eval(rate);
    let delta = optimize_bernoulli_radius(n, d, epsilon_kl, loss);
    let (instantiated, testing) = bernoulli_chain(n, d, epsilon_kl, loss, delta);
    let sdpi = sdpi_bernoulli_pair(delta)?;
    Ok(LowerBoundReport {
        setting: Family::Bernoulli,
        formula_id: format!("bernoulli_{}", loss.as_str()),
        scaling,
        instantiated: Some(instantiated),
        ingredients: BoundIngredients {
            n,
            d,
            epsilon_kl,
            packing_delta: Some(delta),
            delta_sep: Some(loss.eval(delta / 4.0)),
            beta: Some(sdpi.beta),
            llr_bound: Some(sdpi.llr_bound),
            info_budget: Some(info_budget_full_interactive(n, epsilon_kl)),
            testing_bound: Some(testing),
            ..Default::default()
        },
    })
}

/// N(θ, σ²I), θ ∈ [−1, 1]^d, squared loss:
/// min{d, max{(d/ε_kl)(dσ²/n), dσ²/n}}.
pub fn corollary_gaussian_bound(
    n: usize,
    d: usize,
    sigma2: f64,
    epsilon_kl: f64,
) -> Result<LowerBoundReport> {
    check_common(n, d, epsilon_kl)?;
    check_pos("sigma2", sigma2)?;
    let (nf, df) = (n as f64, d as f64);
    let base = df * sigma2 / nf;
    let scaling = df.min((df / epsilon_kl * base).max(base));
    Ok(LowerBoundReport {
        setting: Family::Gaussian,
        formula_id: "gaussian_squared".into(),
        scaling,
        instantiated: None,
        ingredients: BoundIngredients {
            n,
            d,
            epsilon_kl,
            sigma2: Some(sigma2),
            ..Default::default()
        },
    })
}

/// k-sparse N(θ, σ²I), squared loss:
/// min{k, max{(d/ε_kl)(kσ²/n), kσ² log(d/k)/n}}. Requires d ≥ 2k.
pub fn corollary_sparse_gaussian_bound(
    n: usize,
    d: usize,
    k: usize,
    sigma2: f64,
    epsilon_kl: f64,
) -> Result<LowerBoundReport> {
    check_common(n, d, epsilon_kl)?;
    check_pos("sigma2", sigma2)?;
    if k == 0 || d < 2 * k {
        return Err(Error::arg("k", format!("need 1 ≤ k and d ≥ 2k, got k = {k}, d = {d}")));
    }
    let (nf, df, kf) = (n as f64, d as f64, k as f64);
    let private = df / epsilon_kl * kf * sigma2 / nf;
    let classical = kf * sigma2 * (df / kf).ln() / nf;
    Ok(LowerBoundReport {
        setting: Family::SparseGaussian,
        formula_id: "sparse_gaussian_squared".into(),
        scaling: kf.min(private.max(classical)),
        instantiated: None,
        ingredients: BoundIngredients {
            n,
            d,
            epsilon_kl,
            sigma2: Some(sigma2),
            k: Some(k),
            ..Default::default()
        },
    })
}

/// Excess logistic risk: (d/n)(d/ε_kl).
pub fn corollary_logistic_bound(n: usize, d: usize, epsilon_kl: f64) -> Result<LowerBoundReport> {
    check_common(n, d, epsilon_kl)?;
    let df = d as f64;
    Ok(LowerBoundReport {
        setting: Family::Logistic,
        formula_id: "logistic_excess_risk".into(),
        scaling: df * df / (n as f64 * epsilon_kl),
        instantiated: None,
        ingredients: BoundIngredients {
            n,
            d,
            epsilon_kl,
            ..Default::default()
        },
    })
}

/// Shared-bit data X = b·B with b known: estimating θ = b(2p − 1) reduces to
/// a one-dimensional Bernoulli mean, so the squared-loss scaling is
/// 4d·min{1/(nε_kl), 1}.
pub fn correlated_bound(n: usize, d: usize, epsilon_kl: f64) -> Result<LowerBoundReport> {
    check_common(n, d, epsilon_kl)?;
    let one_dim = corollary_bernoulli_bound(n, 1, epsilon_kl, Loss::Squared)?;
    let scale = 4.0 * d as f64;
    Ok(LowerBoundReport {
        setting: Family::Correlated,
        formula_id: "correlated_squared".into(),
        scaling: scale * one_dim.scaling,
        instantiated: one_dim.instantiated.map(|v| scale * v),
        ingredients: BoundIngredients {
            d,
            ..one_dim.ingredients
        },
    })
}

/// H²(M₋₁, M₁) ≤ (7/2)(e^b + 1)·β·info, clamped to 1.
pub fn braverman_hellinger_bound(sdpi: SdpiEstimate, info: f64) -> f64 {
    (3.5 * (sdpi.llr_bound.exp() + 1.0) * sdpi.beta * info).clamp(0.0, 1.0)
}
