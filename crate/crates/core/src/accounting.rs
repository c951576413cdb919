//! Privacy-parameter conversions and protocol budget checks.
//!
//! All logarithms are natural, including the `log²|X|` terms of the
//! approximate-privacy parameter conditions.

use std::collections::HashSet;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Privacy regime for a single release or a whole protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renyi_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_kl: Option<f64>,
}

impl PrivacySpec {
    pub fn pure(epsilon: f64) -> Result<Self> {
        Self {
            epsilon,
            delta: 0.0,
            renyi_order: None,
            epsilon_kl: None,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::arg("epsilon", format!("must be ≥ 0, got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::arg("delta", format!("must lie in [0, 1], got {}", self.delta)));
        }
        if let Some(alpha) = self.renyi_order {
            if alpha.is_nan() || alpha < 1.0 {
                return Err(Error::arg("renyi_order", format!("must be ≥ 1, got {alpha}")));
            }
        }
        if let Some(kl) = self.epsilon_kl {
            if kl.is_nan() || kl < 0.0 {
                return Err(Error::arg("epsilon_kl", format!("must be ≥ 0, got {kl}")));
            }
        }
        Ok(self)
    }

    /// Average-KL privacy level implied by this spec: the explicit value when
    /// given, `min{ε, ε²/log 2}` for pure privacy, and `min{9ε, 75ε²}` when
    /// δ > 0.
    pub fn implied_epsilon_kl(&self) -> f64 {
        if let Some(kl) = self.epsilon_kl {
            return kl;
        }
        if self.delta > 0.0 {
            (9.0 * self.epsilon).min(75.0 * self.epsilon * self.epsilon)
        } else {
            kl_from_pure(self.epsilon)
        }
    }
}

/// Rényi level implied by ε-pure privacy at order α:
/// `min{2(α−1)ε² + min{2, e^ε−1}·ε, ε}`.
pub fn dp_to_renyi_bound(epsilon: f64, alpha: f64) -> f64 {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    assert!(alpha >= 1.0, "Rényi order must be at least 1");
    let quadratic = 2.0 * (alpha - 1.0) * epsilon * epsilon + epsilon.exp_m1().min(2.0) * epsilon;
    quadratic.min(epsilon)
}

/// `min{ε, ε²/log 2}`: the KL level implied by ε-pure privacy.
pub fn kl_from_pure(epsilon: f64) -> f64 {
    epsilon.min(epsilon * epsilon / LN_2)
}

/// Average of `min{ε_i, ε_i²/log 2}` over participants.
pub fn dp_to_kl_average(epsilons: &[f64]) -> Result<f64> {
    if epsilons.is_empty() {
        return Err(Error::arg("epsilons", "need at least one participant"));
    }
    if let Some(bad) = epsilons.iter().find(|e| e.is_nan() || **e < 0.0) {
        return Err(Error::arg("epsilons", format!("negative entry {bad}")));
    }
    Ok(epsilons.iter().map(|&e| kl_from_pure(e)).sum::<f64>() / epsilons.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Clause {
    fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }
}

/// Clause-by-clause evaluation of the approximate-privacy parameter conditions.
#[derive(Clone, Debug, Serialize)]
pub struct ParameterCheck {
    pub clauses: Vec<Clause>,
}

impl ParameterCheck {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> Vec<&'static str> {
        self.clauses
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.name)
            .collect()
    }
}

/// x·log(1/x), continuously extended by 0 at x = 0.
fn x_log_inv(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Checks, all as non-strict inequalities:
///
/// * `delta_small`: δ ≤ min{ε, 1}/256
/// * `delta_log`: δ·M·log(1/(δ·M)) ≤ ε², where M = max{1/ε, 1}
/// * `delta_alphabet`: δ ≤ min{ε, ε²}/log²|X|
/// * `delta_alphabet_small_eps` (only when ε ≤ 1/6): δ ≤ ε⁵/(64 log²|X|)
/// * `delta_log_small_eps` (only when ε ≤ 1/6): δ·log²(ε/δ) ≤ ε⁵/16
pub fn check_assumption_a1prime(
    epsilon: f64,
    delta: f64,
    alphabet_size: usize,
) -> Result<ParameterCheck> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::arg("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::arg("delta", format!("must be ≥ 0, got {delta}")));
    }
    if alphabet_size < 2 {
        return Err(Error::arg("alphabet_size", "must be at least 2"));
    }
    let log_x = (alphabet_size as f64).ln();
    let log_x_sq = log_x * log_x;
    let scaled = delta * (1.0 / epsilon).max(1.0);

    let mut clauses = vec![
        Clause::new("delta_small", delta, epsilon.min(1.0) / 256.0),
        Clause::new("delta_log", x_log_inv(scaled), epsilon * epsilon),
        Clause::new(
            "delta_alphabet",
            delta,
            epsilon.min(epsilon * epsilon) / log_x_sq,
        ),
    ];
    if epsilon <= 1.0 / 6.0 {
        let eps5 = epsilon.powi(5);
        let log_ratio_sq = if delta == 0.0 {
            0.0
        } else {
            delta * (epsilon / delta).ln().powi(2)
        };
        clauses.push(Clause::new(
            "delta_alphabet_small_eps",
            delta,
            eps5 / (64.0 * log_x_sq),
        ));
        clauses.push(Clause::new("delta_log_small_eps", log_ratio_sq, eps5 / 16.0));
    }
    Ok(ParameterCheck { clauses })
}

/// One participant-round privacy level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub i: usize,
    pub t: usize,
    pub eps: f64,
    pub delta: f64,
}

/// Per-(participant, round) privacy levels of a protocol. Participants are
/// indexed `0..n`; the round count is the largest round index present.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionLedger {
    entries: Vec<LedgerEntry>,
    n: usize,
    alphabet_size: Option<usize>,
}

impl CompositionLedger {
    pub fn new(entries: Vec<LedgerEntry>, n: usize, alphabet_size: Option<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "need at least one participant"));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.i >= n {
                return Err(Error::arg("i", format!("participant {} out of range 0..{n}", e.i)));
            }
            if !seen.insert((e.i, e.t)) {
                return Err(Error::arg("entries", format!("duplicate entry ({}, {})", e.i, e.t)));
            }
            if e.eps.is_nan() || e.eps < 0.0 {
                return Err(Error::arg("eps", format!("must be ≥ 0, got {}", e.eps)));
            }
            if !(0.0..=1.0).contains(&e.delta) {
                return Err(Error::arg("delta", format!("must lie in [0, 1], got {}", e.delta)));
            }
        }
        if alphabet_size == Some(0) {
            return Err(Error::arg("alphabet_size", "must be positive"));
        }
        Ok(Self {
            entries,
            n,
            alphabet_size,
        })
    }

    /// Parse the JSON array form `[{"i": .., "t": .., "eps": .., "delta": ..}, ...]`.
    pub fn from_json(text: &str, n: usize, alphabet_size: Option<usize>) -> Result<Self> {
        Self::new(serde_json::from_str(text)?, n, alphabet_size)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.entries).expect("ledger serializes")
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> Option<usize> {
        self.alphabet_size
    }

    pub fn rounds(&self) -> usize {
        self.entries.iter().map(|e| e.t).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetCheck {
    pub delta_sum: f64,
    pub kl_sum: f64,
    pub kl_limit: f64,
    pub delta_ok: bool,
    pub kl_ok: bool,
}

impl BudgetCheck {
    pub fn passed(&self) -> bool {
        self.delta_ok && self.kl_ok
    }
}

/// Σδ ≤ Δ ≤ ½ and Σ min{ε²/log 2, ε} ≤ n·ε_kl, with the per-entry levels
/// taken as fixed.
pub fn check_compositional_budget(
    ledger: &CompositionLedger,
    epsilon_kl: f64,
    total_delta: f64,
) -> BudgetCheck {
    let delta_sum: f64 = ledger.entries.iter().map(|e| e.delta).sum();
    let kl_sum: f64 = ledger.entries.iter().map(|e| kl_from_pure(e.eps)).sum();
    let kl_limit = ledger.n as f64 * epsilon_kl;
    BudgetCheck {
        delta_sum,
        kl_sum,
        kl_limit,
        delta_ok: delta_sum <= total_delta && total_delta <= 0.5,
        kl_ok: kl_sum <= kl_limit,
    }
}
