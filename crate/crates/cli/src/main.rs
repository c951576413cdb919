use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use ldplab::accounting::PrivacySpec;
use ldplab::bounds::{
    corollary_bernoulli_bound, corollary_gaussian_bound, corollary_logistic_bound,
    corollary_sparse_gaussian_bound, correlated_bound, Loss,
};
use ldplab::channels::{audit_approx_dp, audit_pure_dp, audit_renyi, project_to_pure_dp};
use ldplab::divergence::total_variation;
use ldplab::harness::{
    emit_results, run_experiment, verify_suite, write_results, ExperimentConfig, OutputFormat,
    ResultRow, SuiteReport, VerifyOptions, DEFAULT_VERIFY_SEED, SUITES,
};
use ldplab::{DiscreteChannel, Error, Family};

const SEED_VAR: &str = "LDP_LAB_SEED";

/// Locally private estimation lab: channel audits, lower bounds,
/// simulations and verification suites.
#[derive(Parser)]
#[command(name = "ldplab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a channel's pure, approximate and Rényi privacy.
    Audit {
        channel: PathBuf,
        /// Report the tightest δ at this ε.
        #[arg(long)]
        eps: Option<f64>,
        /// Rényi orders to audit.
        #[arg(long, num_args = 1.., default_values_t = [2.0])]
        alpha: Vec<f64>,
    },
    /// Replace an (ε, δ)-private channel by a nearby ε-pure one.
    Project {
        channel: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        /// Write the projected channel here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the minimax lower bound for a problem family.
    Bound {
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Privacy level ε; converted to a KL level unless --eps-kl is given.
        #[arg(long, required_unless_present = "eps_kl")]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        eps_kl: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "squared")]
        loss: Loss,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a verification suite (or `all`).
    Verify {
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Cap on instances per check.
        #[arg(long)]
        instances: Option<usize>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    /// A check ran and did not hold.
    Check(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TvBoundUnattainable { .. } | Error::NotApproximatelyPrivate { .. } => {
                Failure::Check(e.to_string())
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_VAR} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

fn print_json(value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_stdout(text.as_bytes())
}

/// A closed pipe (as with `| head`) is not an error.
fn write_stdout(bytes: &[u8]) -> Result<(), Failure> {
    match io::stdout().lock().write_all(bytes) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn audit(path: &Path, eps: Option<f64>, alphas: &[f64]) -> Result<(), Failure> {
    let channel = DiscreteChannel::from_json(&read(path)?)?;
    let mut report = json!({
        "inputs": channel.input_size(),
        "outputs": channel.output_size(),
        "pure_epsilon": number(audit_pure_dp(&channel)),
    });
    if let Some(e) = eps {
        if !(e >= 0.0) {
            return Err(Failure::Usage(format!("--eps must be ≥ 0, got {e}")));
        }
        report["epsilon"] = json!(e);
        report["approx_delta"] = json!(audit_approx_dp(&channel, e));
    }
    let mut renyi = serde_json::Map::new();
    for &a in alphas {
        renyi.insert(a.to_string(), number(audit_renyi(&channel, a)?));
    }
    report["renyi"] = Value::Object(renyi);
    print_json(&report)
}

fn project(path: &Path, eps: f64, delta: f64, out: Option<&Path>) -> Result<(), Failure> {
    let channel = DiscreteChannel::from_json(&read(path)?)?;
    let projected = project_to_pure_dp(&channel, eps, delta)?;
    let row_tv: Vec<f64> = (0..channel.input_size())
        .map(|x| total_variation(channel.row(x), projected.row(x)))
        .collect();
    match out {
        Some(p) => {
            std::fs::write(p, projected.to_json() + "\n")
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            print_json(&json!({
                "written": p.display().to_string(),
                "audited_epsilon": number(audit_pure_dp(&projected)),
                "row_tv": row_tv,
            }))
        }
        None => print_json(&json!({
            "channel": serde_json::from_str::<Value>(&projected.to_json()).expect("valid json"),
            "audited_epsilon": number(audit_pure_dp(&projected)),
            "row_tv": row_tv,
        })),
    }
}

#[allow(clippy::too_many_arguments)]
fn bound(
    family: Family,
    n: usize,
    d: usize,
    eps: Option<f64>,
    delta: f64,
    eps_kl: Option<f64>,
    sigma2: f64,
    k: usize,
    loss: Loss,
) -> Result<(), Failure> {
    let kl = match eps_kl {
        Some(v) => v,
        None => PrivacySpec {
            epsilon: eps.expect("clap requires --eps without --eps-kl"),
            delta,
            renyi_order: None,
            epsilon_kl: None,
        }
        .validated()?
        .implied_epsilon_kl(),
    };
    if loss != Loss::Squared && family != Family::Bernoulli {
        return Err(Failure::Usage(format!(
            "only squared loss is available for {family}"
        )));
    }
    let report = match family {
        Family::Bernoulli => corollary_bernoulli_bound(n, d, kl, loss),
        Family::Gaussian => corollary_gaussian_bound(n, d, sigma2, kl),
        Family::SparseGaussian => corollary_sparse_gaussian_bound(n, d, k, sigma2, kl),
        Family::Correlated => correlated_bound(n, d, kl),
        Family::Logistic => corollary_logistic_bound(n, d, kl),
    }?;
    write_stdout((report.to_json() + "\n").as_bytes())
}

fn simulate(
    path: &Path,
    out: Option<&Path>,
    format: OutputFormat,
    seed: Option<u64>,
    replications: Option<usize>,
    workers: Option<usize>,
) -> Result<(), Failure> {
    let text = read(path)?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let config_has_seed = raw.get("seed").is_some();
    config.seed = match seed {
        Some(s) => s,
        None if config_has_seed => config.seed,
        None => env_seed()?.unwrap_or(0),
    };
    if let Some(r) = replications {
        config.replications = r;
    }
    if workers.is_some() {
        config.workers = workers;
    }
    let rows: Vec<ResultRow> = run_experiment(&config)?.into_iter().map(|r| r.row).collect();
    match out {
        Some(p) => emit_results(&rows, format, p)?,
        None => {
            let mut buf = Vec::new();
            write_results(&rows, format, &mut buf)?;
            write_stdout(&buf)?;
        }
    }
    Ok(())
}

fn print_suite(report: &SuiteReport) {
    for c in &report.checks {
        let slack = c
            .worst_slack
            .map_or_else(|| "-".to_string(), |s| format!("{s:.3e}"));
        let ratio = c
            .max_ratio
            .map_or_else(String::new, |r| format!(" max_ratio={r:.4}"));
        println!(
            "{} {}/{}: instances={} worst_slack={slack}{ratio}",
            if c.pass { "PASS" } else { "FAIL" },
            report.suite,
            c.check,
            c.instances,
        );
    }
    if report.vacuous {
        println!("note {}: no instances examined (vacuous pass)", report.suite);
    }
}

fn verify(suite: &str, seed: Option<u64>, instances: Option<usize>, as_json: bool) -> Result<(), Failure> {
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_VERIFY_SEED),
    };
    let opts = VerifyOptions { seed, instances };
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut reports = Vec::new();
    for name in names {
        reports.push(verify_suite(name, opts).map_err(|e| match e {
            Error::Unknown { .. } => Failure::Usage(format!(
                "{e}; expected one of {} or all",
                SUITES.join(", ")
            )),
            other => other.into(),
        })?);
    }
    if as_json {
        print_json(&serde_json::to_value(&reports).expect("reports serialize"))?;
    } else {
        reports.iter().for_each(print_suite);
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.suite.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("verification failed: {}", failed.join(", "))))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Audit {
            channel,
            eps,
            alpha,
        } => audit(&channel, eps, &alpha),
        Command::Project {
            channel,
            eps,
            delta,
            out,
        } => project(&channel, eps, delta, out.as_deref()),
        Command::Bound {
            family,
            n,
            d,
            eps,
            delta,
            eps_kl,
            sigma2,
            k,
            loss,
        } => bound(family, n, d, eps, delta, eps_kl, sigma2, k, loss),
        Command::Simulate {
            config,
            out,
            format,
            seed,
            replications,
            workers,
        } => simulate(&config, out.as_deref(), format, seed, replications, workers),
        Command::Verify {
            suite,
            seed,
            instances,
            json,
        } => verify(&suite, seed, instances, json),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("ldplab: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("ldplab: {msg}");
            ExitCode::from(2)
        }
    }
}
