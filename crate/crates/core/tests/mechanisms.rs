use ldplab::channels::audit_pure_dp;
use ldplab::harness::{audit_epsilons, mechanism_audits, unbiasedness_cases};
use ldplab::mechanisms::{linf_mechanism, LinfSampler};
use ldplab::SeededRng;

#[test]
fn empirical_means_match_targets_on_full_grid() {
    let cases = unbiasedness_cases(&audit_epsilons(), 100_000, 4242);
    assert!(cases.iter().any(|c| c.mechanism.starts_with("coordinate_subsample")));
    for c in &cases {
        assert!(
            c.worst_deviation <= c.tolerance,
            "{} d={} eps={}: deviation {} over {}",
            c.mechanism,
            c.d,
            c.epsilon,
            c.worst_deviation,
            c.tolerance
        );
    }
    for d in [1, 4, 16] {
        for eps in audit_epsilons() {
            assert!(cases.iter().any(|c| c.d == d && c.epsilon == eps && c.mechanism == "linf"));
        }
    }
}

#[test]
fn finite_mechanisms_pass_pure_audit() {
    for (name, eps, audited) in mechanism_audits() {
        assert!(audited <= eps + 1e-9, "{name}: audited {audited}");
    }
}

#[test]
fn linf_even_dimension_is_private_and_unbiased() {
    let sampler = LinfSampler::new(4, 0.5).unwrap();
    assert!(audit_pure_dp(&sampler.channel().unwrap()) <= 0.5 + 1e-9);
    let v = [1.0, -1.0, -1.0, 1.0];
    let draws = 100_000;
    let mut rng = SeededRng::new(17, 0);
    let mut sums = [0.0; 4];
    let mut bound = 0.0;
    for _ in 0..draws {
        let r = linf_mechanism(&v, 0.5, &mut rng).unwrap();
        bound = r.magnitude_bound;
        for (s, z) in sums.iter_mut().zip(&r.values) {
            *s += z.unwrap();
        }
    }
    let tol = 4.0 * bound / (draws as f64).sqrt();
    for (s, t) in sums.iter().zip(v) {
        assert!((s / draws as f64 - t).abs() <= tol);
    }
}
