//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every criterion reports even when an earlier one fails.

use std::process::ExitCode;
use std::time::Instant;

use ldplab::estimators::{sparse_two_stage_estimator, LazyGaussianSample};
use ldplab::harness::{
    emit_results, mechanism_audits, projection_trials, run_experiment, unbiasedness_cases,
    ExperimentConfig, OutputFormat, ResultRow,
};
use ldplab::mechanisms::rr_magnitude;
use ldplab::oracles::{
    default_packing_radii, verify_assouad, verify_pure_dp_budget, verify_sdpi_bounded_likelihood,
    verify_sdpi_search_bernoulli,
};
use ldplab::{Family, ProblemSpec, SeededRng};

const SEED: u64 = 20_240_517;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mechanism_privacy() -> Outcome {
    let audits: Vec<_> = mechanism_audits()
        .into_iter()
        .filter(|(name, _, _)| !name.starts_with("coordinate_subsample"))
        .collect();
    let worst = audits
        .iter()
        .map(|(_, eps, audited)| audited - eps)
        .fold(f64::NEG_INFINITY, f64::max);
    let failures: Vec<&str> = audits
        .iter()
        .filter(|(_, eps, audited)| *audited > eps + 1e-9)
        .map(|(name, _, _)| name.as_str())
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{} channels audited, worst excess over declared ε {worst:.2e}{}",
            audits.len(),
            if failures.is_empty() { String::new() } else { format!("; failing: {failures:?}") }
        ),
    )
}

fn unbiasedness() -> Outcome {
    let cases = unbiasedness_cases(&[0.25, 1.0, 4.0], 100_000, SEED);
    let worst = cases
        .iter()
        .max_by(|a, b| (a.worst_deviation / a.tolerance).total_cmp(&(b.worst_deviation / b.tolerance)))
        .expect("nonempty grid");
    let bad = cases.iter().filter(|c| c.worst_deviation > c.tolerance).count();
    outcome(
        bad == 0,
        format!(
            "{} (mechanism, d, ε) cases, {bad} outside 4b/√N; worst {} d={} ε={} at {:.2} of tolerance",
            cases.len(),
            worst.mechanism,
            worst.d,
            worst.epsilon,
            worst.worst_deviation / worst.tolerance
        ),
    )
}

fn channel_projection() -> Outcome {
    let trials = projection_trials(500, SEED);
    let ratio_bad = trials.iter().filter(|t| !t.meets_ratio()).count();
    let tv_bad: Vec<_> = trials.iter().filter(|t| !t.meets_bound()).collect();
    let breakdown: Vec<String> = (2..=4)
        .map(|k| {
            let total = trials.iter().filter(|t| t.inputs == k).count();
            let bad = tv_bad.iter().filter(|t| t.inputs == k).count();
            format!("|X|={k}: {bad}/{total}")
        })
        .collect();
    let nontrivial = trials.iter().filter(|t| t.delta > 0.0).count();
    let worst = trials
        .iter()
        .filter(|t| t.bound > 0.0)
        .map(|t| t.achievable / t.bound)
        .fold(0.0, f64::max);
    outcome(
        ratio_bad == 0 && tv_bad.is_empty(),
        format!(
            "500 channels ({nontrivial} with δ > 0); ratio violations {ratio_bad}; TV-bound violations {} ({}); smallest achievable TV reaches {worst:.3}× the bound",
            tv_bad.len(),
            breakdown.join(", ")
        ),
    )
}

fn sdpi() -> Outcome {
    let triples = verify_sdpi_bounded_likelihood(1000, 1.0, SEED);
    let search = verify_sdpi_search_bernoulli(&[0.1, 0.2, 0.5], 5000, SEED);
    outcome(
        triples.pass && search.pass,
        format!(
            "1000 triples worst slack {:.2e} (max ratio to cap {:.3}); Bernoulli search max ratio to cap {:.3}",
            triples.worst_slack.unwrap_or(f64::NAN),
            triples.max_ratio.unwrap_or(0.0),
            search.max_ratio.unwrap_or(0.0)
        ),
    )
}

fn information_budget() -> Outcome {
    let r = verify_pure_dp_budget(&[0.25, 0.5, 1.0, 2.0], 3, 6, SEED);
    outcome(
        r.pass,
        format!(
            "{} pipelines (n ≤ 3, adaptive and not), worst slack {:.2e}, max exact/budget {:.4}",
            r.instances,
            r.worst_slack.unwrap_or(f64::NAN),
            r.max_ratio.unwrap_or(0.0)
        ),
    )
}

fn mse_table(config: &ExperimentConfig) -> Vec<ResultRow> {
    run_experiment(config)
        .expect("valid experiment")
        .into_iter()
        .map(|r| r.row)
        .collect()
}

fn bernoulli_scaling() -> Outcome {
    let config = ExperimentConfig::from_json(
        r#"{
            "problem": {"family": "bernoulli", "d": 4, "n": 10000, "theta": [0.5, 0.5, 0.5, 0.5]},
            "mechanism": "auto",
            "privacy": {"epsilon": 1.0},
            "replications": 200,
            "seed": 20240517,
            "grid": {"d": [4, 16], "epsilon": [0.5, 1, 2, 4]}
        }"#,
    )
    .expect("valid config");
    let rows = mse_table(&config);
    let mse = |d: usize, e: f64| {
        rows.iter()
            .find(|r| r.d == d && r.epsilon == e)
            .expect("grid point")
            .mean_loss
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for e in [0.5, 1.0, 2.0, 4.0] {
        let r = mse(16, e) / mse(4, e);
        pass &= (8.0..=32.0).contains(&r);
        parts.push(format!("d16/d4@ε={e}: {r:.1}"));
    }
    for d in [4, 16] {
        for e in [1.0, 2.0] {
            let r = mse(d, e) / mse(d, 2.0 * e);
            pass &= (1.3..=4.5).contains(&r);
            parts.push(format!("ε{e}/ε{}@d={d}: {r:.2}", 2.0 * e));
        }
    }
    outcome(pass, parts.join(", "))
}

fn gaussian_concentration() -> Outcome {
    let config = ExperimentConfig::from_json(
        r#"{"problem": {"family": "gaussian", "d": 1, "n": 10000, "theta": [0.5], "sigma": 1},
            "mechanism": "rr_sign", "privacy": {"epsilon": 1}, "replications": 1000}"#,
    )
    .expect("valid config");
    let point = config.points().expect("valid point").remove(0);
    let mut errors: Vec<f64> = (0..1000)
        .map(|r| {
            let mut rng = SeededRng::for_trial(SEED, 0, r);
            let (est, _) = point.run_trial(&mut rng).expect("trial runs");
            (est[0] - 0.5).abs()
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    let q99 = errors[(0.99 * errors.len() as f64).ceil() as usize - 1];
    let b = rr_magnitude(1.0);
    let limit = 10.0 * (b * b * 100f64.ln() / 1e4).sqrt();
    outcome(
        q99 <= limit,
        format!("0.99-quantile of |θ̂ − θ| = {q99:.4}, limit {limit:.4}"),
    )
}

fn sparse_risk(d: usize, n: usize, reps: u32, grid: u32) -> (f64, f64) {
    let mut theta = vec![0.0; d];
    theta[0] = 0.8;
    let spec = ProblemSpec {
        family: Family::SparseGaussian,
        d,
        n,
        theta: theta.clone(),
        sigma: 1.0,
        k: Some(1),
        b_vector: None,
    };
    let mut hits = 0;
    let mut risk = 0.0;
    for r in 0..reps {
        let rng = SeededRng::for_trial(SEED, grid, r);
        let mut source = LazyGaussianSample::new(theta.clone(), 1.0, 2 * n, rng.fork(0));
        let mut mech_rng = rng;
        let est = sparse_two_stage_estimator(&mut source, 1.0, &spec, &mut mech_rng)
            .expect("valid instance");
        hits += usize::from(est.selected == 0);
        risk += est
            .theta
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>();
    }
    (hits as f64 / f64::from(reps), risk / f64::from(reps))
}

fn sparse_two_stage() -> Outcome {
    let (recovery, _) = sparse_risk(8, 8000, 200, 0);
    let (_, small) = sparse_risk(8, 1_000_000, 100, 1);
    let (_, large) = sparse_risk(64, 1_000_000, 100, 2);
    let ratio = small / large;
    outcome(
        recovery >= 0.99 && (0.25..=4.0).contains(&ratio),
        format!("support recovery {recovery:.3} at n=8000; risk(d=8)/risk(d=64) at n=10^6 = {ratio:.3}"),
    )
}

fn correlated_scaling() -> Outcome {
    let config = ExperimentConfig::from_json(
        r#"{"problem": {"family": "correlated", "d": 4, "n": 10000,
                        "theta": [0.5, -0.5, 0.5, -0.5], "b_vector": [1, -1, 1, -1]},
            "privacy": {"epsilon": 1}, "replications": 500, "seed": 20240517,
            "grid": {"d": [4, 64]}}"#,
    )
    .expect("valid config");
    let rows = mse_table(&config);
    let ratio = rows[1].mean_loss / rows[0].mean_loss;
    outcome(
        (8.0..=32.0).contains(&ratio),
        format!("MSE(d=64)/MSE(d=4) = {ratio:.2}"),
    )
}

fn assouad() -> Outcome {
    let r = verify_assouad(&[0.25, 0.5, 1.0], &default_packing_radii());
    outcome(
        r.pass,
        format!(
            "{} (ε, δ) pairs, worst exact-minus-bound {:.3e}, max bound/exact {:.3}",
            r.instances,
            r.worst_slack.unwrap_or(f64::NAN),
            r.max_ratio.unwrap_or(0.0)
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut config = ExperimentConfig::from_json(
        r#"{"problem": {"family": "gaussian", "d": 4, "n": 2000, "theta": [0.3, -0.2, 0.6, 0.0]},
            "privacy": {"epsilon": 2}, "replications": 40, "seed": 99,
            "grid": {"d": [2, 4], "epsilon": [0.5, 2]}}"#,
    )
    .expect("valid config");
    let mut files = Vec::new();
    for (i, workers) in [1, 1, 8].into_iter().enumerate() {
        config.workers = Some(workers);
        let rows: Vec<ResultRow> = run_experiment(&config)
            .expect("runs")
            .into_iter()
            .map(|r| r.row)
            .collect();
        let path = dir.path().join(format!("run{i}.csv"));
        emit_results(&rows, OutputFormat::Csv, &path).expect("writes");
        files.push(std::fs::read(&path).expect("reads"));
    }
    let same = files.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same,
        format!("two 1-worker runs and one 8-worker run, {} bytes each, identical: {same}", files[0].len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("mechanism privacy audits", mechanism_privacy),
        ("unbiasedness", unbiasedness),
        ("channel projection", channel_projection),
        ("SDPI inequality", sdpi),
        ("information budget", information_budget),
        ("Bernoulli risk scaling", bernoulli_scaling),
        ("Gaussian estimator concentration", gaussian_concentration),
        ("sparse two-stage", sparse_two_stage),
        ("correlated linear-in-d scaling", correlated_scaling),
        ("Assouad consistency", assouad),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "AC-{:02} {} {name}: {} [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
