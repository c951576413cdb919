//! Divergences and entropies between finite distributions, in nats.
//!
//! Distributions are slices indexed by a shared alphabet. Where a divergence
//! is infinite because `p` charges a point `q` does not, `f64::INFINITY` is
//! returned rather than a clamped value.

/// Shannon entropy H(p).
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Binary entropy h₂(p).
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Squared Hellinger distance with the ½ normalization, so it lies in [0, 1].
pub fn hellinger_squared(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let h = 0.5
        * p.iter()
            .zip(q)
            .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
            .sum::<f64>();
    h.clamp(0.0, 1.0)
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    acc.max(0.0)
}

/// Rényi divergence of order `alpha ≥ 1`; order 1 is the KL divergence.
pub fn renyi(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    debug_assert!(alpha >= 1.0);
    if alpha == 1.0 {
        return kl(p, q);
    }
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).powf(alpha - 1.0);
        }
    }
    if acc.is_infinite() {
        return f64::INFINITY;
    }
    (acc.ln() / (alpha - 1.0)).max(0.0)
}

/// Hockey-stick divergence Σ max{p − e^ε q, 0}.
pub fn hockey_stick(p: &[f64], q: &[f64], epsilon: f64) -> f64 {
    let scale = epsilon.exp();
    p.iter()
        .zip(q)
        .map(|(&a, &b)| (a - scale * b).max(0.0))
        .sum()
}

/// Largest log-ratio log(p(z)/q(z)) over the support of `p`, with 0/0 read as
/// ratio 1.
pub fn max_log_ratio(p: &[f64], q: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max((a / b).ln());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_pair_closed_forms() {
        let p = [0.25, 0.75];
        let q = [0.75, 0.25];
        assert!((total_variation(&p, &q) - 0.5).abs() < 1e-15);
        assert!((kl(&p, &q) - 0.5 * 3f64.ln()).abs() < 1e-15);
        let h2 = 1.0 - 2.0 * (0.25f64 * 0.75).sqrt();
        assert!((hellinger_squared(&p, &q) - h2).abs() < 1e-15);
    }

    #[test]
    fn support_violations_are_infinite() {
        assert_eq!(kl(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert_eq!(renyi(&[0.5, 0.5], &[1.0, 0.0], 2.0), f64::INFINITY);
        assert_eq!(max_log_ratio(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert_eq!(kl(&[1.0, 0.0], &[0.5, 0.5]), 2f64.ln());
    }

    #[test]
    fn renyi_order_two_closed_form() {
        // D_2(p||q) = ln Σ p²/q
        let p = [0.2, 0.3, 0.5];
        let q = [0.4, 0.4, 0.2];
        let expected = (0.04 / 0.4 + 0.09 / 0.4 + 0.25 / 0.2f64).ln();
        assert!((renyi(&p, &q, 2.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn renyi_approaches_kl() {
        let p = [0.2, 0.3, 0.5];
        let q = [0.4, 0.4, 0.2];
        assert!((renyi(&p, &q, 1.0 + 1e-7) - kl(&p, &q)).abs() < 1e-6);
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-15);
    }
}
