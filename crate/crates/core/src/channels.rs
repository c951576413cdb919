//! Finite privacy channels: representation, privacy audits, and projection of
//! approximately private channels onto purely private ones.
//!
//! A [`DiscreteChannel`] is a row-stochastic matrix `q(z | x)`; row order fixes
//! the input symbol indices. All audits are exact over the finite alphabets.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::divergence;
use crate::error::{Error, Result};

/// Row sums must equal one to within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Slack allowed when re-auditing a projected channel.
pub const PROJECTION_TOLERANCE: f64 = 1e-9;

/// Row-stochastic conditional probability table `q(z | x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelFile", into = "ChannelFile")]
pub struct DiscreteChannel {
    rows: Vec<Vec<f64>>,
}

/// On-disk form: `{"inputs": k, "outputs": m, "rows": [[...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFile {
    pub inputs: usize,
    pub outputs: usize,
    pub rows: Vec<Vec<f64>>,
}

impl TryFrom<ChannelFile> for DiscreteChannel {
    type Error = Error;

    fn try_from(file: ChannelFile) -> Result<Self> {
        if file.rows.len() != file.inputs {
            return Err(Error::InvalidChannel(format!(
                "declared {} inputs but found {} rows",
                file.inputs,
                file.rows.len()
            )));
        }
        if let Some(row) = file.rows.iter().find(|r| r.len() != file.outputs) {
            return Err(Error::InvalidChannel(format!(
                "declared {} outputs but a row has {} entries",
                file.outputs,
                row.len()
            )));
        }
        DiscreteChannel::new(file.rows)
    }
}

impl From<DiscreteChannel> for ChannelFile {
    fn from(channel: DiscreteChannel) -> Self {
        ChannelFile {
            inputs: channel.input_size(),
            outputs: channel.output_size(),
            rows: channel.rows,
        }
    }
}

impl DiscreteChannel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidChannel("no input symbols".into()));
        };
        let outputs = first.len();
        if outputs == 0 {
            return Err(Error::InvalidChannel("no output symbols".into()));
        }
        for (x, row) in rows.iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::InvalidChannel(format!(
                    "row {x} has {} entries, expected {outputs}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidChannel(format!(
                    "row {x} has entry {bad} outside [0, 1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidChannel(format!(
                    "row {x} sums to {total}"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Channel that ignores its input.
    pub fn constant(inputs: usize, row: Vec<f64>) -> Result<Self> {
        Self::new(vec![row; inputs])
    }

    /// Binary randomized response with flip probability 1/(e^ε + 1).
    pub fn randomized_response(epsilon: f64) -> Self {
        let keep = 1.0 / (1.0 + (-epsilon).exp());
        Self {
            rows: vec![vec![keep, 1.0 - keep], vec![1.0 - keep, keep]],
        }
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, z: usize, x: usize) -> f64 {
        self.rows[x][z]
    }

    /// Channel applying `self` and `other` independently to the two halves of
    /// a pair input. Pair `(a, b)` has index `a * other.input_size() + b`, and
    /// outputs are indexed the same way.
    pub fn product(&self, other: &DiscreteChannel) -> DiscreteChannel {
        let rows = self
            .rows
            .iter()
            .flat_map(|ra| {
                other.rows.iter().map(move |rb| {
                    ra.iter()
                        .flat_map(|&pa| rb.iter().map(move |&pb| pa * pb))
                        .collect()
                })
            })
            .collect();
        DiscreteChannel { rows }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel serializes")
    }

    /// Random channel with Dirichlet(1) rows, after which a fraction of one
    /// row's mass (up to `max_shift`) is moved onto a single output, creating
    /// a controlled privacy violation.
    pub fn random_with_violation<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        max_shift: f64,
        rng: &mut R,
    ) -> Self {
        let mut rows: Vec<Vec<f64>> = (0..inputs)
            .map(|_| dirichlet_ones(outputs, rng))
            .collect();
        let x = rng.random_range(0..inputs);
        let z = rng.random_range(0..outputs);
        let shift = rng.random::<f64>() * max_shift;
        for p in rows[x].iter_mut() {
            *p *= 1.0 - shift;
        }
        rows[x][z] += shift;
        for row in rows.iter_mut() {
            renormalize(row);
        }
        Self { rows }
    }

    fn ordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.input_size();
        (0..k).flat_map(move |x| (0..k).filter(move |&y| y != x).map(move |y| (x, y)))
    }
}

pub(crate) fn dirichlet_ones<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Vec<f64> {
    let mut row: Vec<f64> = (0..size).map(|_| Exp1.sample(rng)).collect();
    renormalize(&mut row);
    row
}

fn renormalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    for p in row.iter_mut() {
        *p /= total;
    }
}

/// Tightest ε with q(z|x) ≤ e^ε q(z|x') for every x, x', z. Infinite when some
/// output is possible under one input and impossible under another.
pub fn audit_pure_dp(channel: &DiscreteChannel) -> f64 {
    channel
        .ordered_pairs()
        .map(|(x, y)| divergence::max_log_ratio(channel.row(x), channel.row(y)))
        .fold(0.0, f64::max)
}

/// Tightest δ at the given ε: the largest hockey-stick divergence over
/// ordered input pairs.
pub fn audit_approx_dp(channel: &DiscreteChannel, epsilon: f64) -> f64 {
    channel
        .ordered_pairs()
        .map(|(x, y)| divergence::hockey_stick(channel.row(x), channel.row(y), epsilon))
        .fold(0.0, f64::max)
        .min(1.0)
}

/// Largest Rényi divergence of order `alpha` between any two rows.
pub fn audit_renyi(channel: &DiscreteChannel, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 1.0 {
        return Err(Error::arg("alpha", format!("Rényi order must be ≥ 1, got {alpha}")));
    }
    Ok(channel
        .ordered_pairs()
        .map(|(x, y)| divergence::renyi(channel.row(x), channel.row(y), alpha))
        .fold(0.0, f64::max))
}

/// Per-row total-variation radius within which an (ε, δ) channel has an
/// ε-pure counterpart: ½(δ/(1+e^ε) + δ/(1+e^ε−δ)).
pub fn projection_tv_bound(epsilon: f64, delta: f64) -> f64 {
    let e = epsilon.exp();
    0.5 * (delta / (1.0 + e) + delta / (1.0 + e - delta))
}

/// Pairwise smoothing of two rows. On outputs where one row exceeds e^ε times
/// the other, the combined mass is split in ratio e^ε : 1; elsewhere each row
/// keeps its own mass. Both rows are then renormalized.
pub fn pairwise_smoothing(qx: &[f64], qy: &[f64], epsilon: f64) -> (Vec<f64>, Vec<f64>) {
    let e = epsilon.exp();
    let hi = e / (e + 1.0);
    let lo = 1.0 / (e + 1.0);
    let mut sx = Vec::with_capacity(qx.len());
    let mut sy = Vec::with_capacity(qy.len());
    for (&a, &b) in qx.iter().zip(qy) {
        let total = a + b;
        if a > e * b {
            sx.push(total * hi);
            sy.push(total * lo);
        } else if b > e * a {
            sx.push(total * lo);
            sy.push(total * hi);
        } else {
            sx.push(a);
            sy.push(b);
        }
    }
    renormalize(&mut sx);
    renormalize(&mut sy);
    (sx, sy)
}

/// Row x of the result is the uniform average over partners x' of the
/// pairwise-smoothed row x against x'. The x' = x term is row x itself.
///
/// Each row stays within [`projection_tv_bound`] of the original, but the
/// averaged rows are not in general ε-pure: mixing in the unmodified row
/// reintroduces the violating mass. [`project_to_pure_dp`] is the
/// construction with a guarantee.
pub fn averaged_pairwise_construction(
    channel: &DiscreteChannel,
    epsilon: f64,
) -> DiscreteChannel {
    let k = channel.input_size();
    let m = channel.output_size();
    let weight = 1.0 / k as f64;
    let rows = (0..k)
        .map(|x| {
            let mut acc = vec![0.0; m];
            for y in 0..k {
                let smoothed;
                let row = if y == x {
                    channel.row(x)
                } else {
                    smoothed = pairwise_smoothing(channel.row(x), channel.row(y), epsilon).0;
                    &smoothed
                };
                for (a, p) in acc.iter_mut().zip(row) {
                    *a += weight * p;
                }
            }
            renormalize(&mut acc);
            acc
        })
        .collect();
    DiscreteChannel { rows }
}

/// Result of [`min_tv_pure_projection`].
#[derive(Clone, Debug)]
pub struct PureProjection {
    pub channel: DiscreteChannel,
    /// TV distance between each original row and its projection.
    pub row_tv: Vec<f64>,
}

impl PureProjection {
    pub fn max_tv(&self) -> f64 {
        self.row_tv.iter().copied().fold(0.0, f64::max)
    }
}

/// The ε-pure channel closest to `channel` in max-row total variation,
/// found by linear programming.
pub fn min_tv_pure_projection(channel: &DiscreteChannel, epsilon: f64) -> Result<PureProjection> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::arg("epsilon", format!("must be ≥ 0, got {epsilon}")));
    }
    let k = channel.input_size();
    let m = channel.output_size();
    let scale = epsilon.exp();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let radius = lp.add_var(1.0, (0.0, 1.0));
    let probs: Vec<Vec<_>> = (0..k)
        .map(|_| (0..m).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect())
        .collect();
    let gaps: Vec<Vec<_>> = (0..k)
        .map(|_| (0..m).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect())
        .collect();

    for x in 0..k {
        lp.add_constraint(probs[x].iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
        for z in 0..m {
            let q = channel.prob(z, x);
            lp.add_constraint([(probs[x][z], 1.0), (gaps[x][z], -1.0)], ComparisonOp::Le, q);
            lp.add_constraint([(probs[x][z], -1.0), (gaps[x][z], -1.0)], ComparisonOp::Le, -q);
        }
        lp.add_constraint(
            gaps[x]
                .iter()
                .map(|&v| (v, 0.5))
                .chain(std::iter::once((radius, -1.0))),
            ComparisonOp::Le,
            0.0,
        );
        for y in (0..k).filter(|&y| y != x) {
            for z in 0..m {
                lp.add_constraint(
                    [(probs[x][z], 1.0), (probs[y][z], -scale)],
                    ComparisonOp::Le,
                    0.0,
                );
            }
        }
    }

    let solution = lp
        .solve()
        .map_err(|e| Error::LinearProgram(e.to_string()))?;

    let mut rows: Vec<Vec<f64>> = probs
        .iter()
        .map(|row| row.iter().map(|&v| solution[v].max(0.0)).collect())
        .collect();
    // Solver noise can leave a column with a near-zero entry next to larger
    // ones; the ratio constraint forces such a column to vanish entirely.
    for z in 0..m {
        let smallest = rows.iter().map(|r| r[z]).fold(f64::INFINITY, f64::min);
        if smallest < 1e-13 {
            for row in rows.iter_mut() {
                row[z] = 0.0;
            }
        }
    }
    for row in rows.iter_mut() {
        renormalize(row);
    }
    let projected = DiscreteChannel { rows };
    if audit_pure_dp(&projected) > epsilon + PROJECTION_TOLERANCE {
        return Err(Error::LinearProgram(
            "solution violates the ratio constraint after cleanup".into(),
        ));
    }
    let row_tv = (0..k)
        .map(|x| divergence::total_variation(channel.row(x), projected.row(x)))
        .collect();
    Ok(PureProjection {
        channel: projected,
        row_tv,
    })
}

/// Replace an (ε, δ)-private channel by an ε-pure one whose rows each lie
/// within [`projection_tv_bound`] of the originals.
///
/// Channels that are already ε-pure (including every channel passing the
/// precondition with δ = 0) are returned unchanged. Otherwise the closest
/// ε-pure channel in max-row TV is computed; if even that one is farther
/// than the bound, [`Error::TvBoundUnattainable`] reports by how much.
pub fn project_to_pure_dp(
    channel: &DiscreteChannel,
    epsilon: f64,
    delta: f64,
) -> Result<DiscreteChannel> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::arg("epsilon", format!("must be ≥ 0, got {epsilon}")));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::arg("delta", format!("must be ≥ 0, got {delta}")));
    }
    if delta >= 1.0 + epsilon.exp() {
        return Err(Error::arg("delta", "must be below 1 + e^epsilon"));
    }
    let actual = audit_approx_dp(channel, epsilon);
    if actual > delta + ROW_SUM_TOLERANCE {
        return Err(Error::NotApproximatelyPrivate {
            epsilon,
            delta,
            actual,
        });
    }
    if audit_pure_dp(channel) <= epsilon {
        return Ok(channel.clone());
    }

    let bound = projection_tv_bound(epsilon, delta);
    let projection = min_tv_pure_projection(channel, epsilon)?;
    let achievable = projection.max_tv();
    if achievable > bound + PROJECTION_TOLERANCE {
        return Err(Error::TvBoundUnattainable {
            epsilon,
            bound,
            achievable,
        });
    }
    Ok(projection.channel)
}
