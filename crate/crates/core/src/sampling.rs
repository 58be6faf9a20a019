//! Monte-Carlo path sampling from a routing policy and link-failure stress tests.
//!
//! Every sample or trial `k` draws from its own ChaCha20 stream: the generator
//! is seeded with `seed` via `seed_from_u64` and switched to stream `k`. Results
//! therefore do not depend on how trials are scheduled.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, ArrayView1};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::solver::RoutingPolicy;

/// Two-sided 95% normal quantile used for confidence half-widths.
pub const Z_95: f64 = 1.959963984540054;

fn stream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_index(weights: ArrayView1<f64>, u: f64) -> Option<usize> {
    let total: f64 = weights.sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last
}

fn sample_path(policy: &RoutingPolicy, rng: &mut ChaCha20Rng) -> Result<Vec<usize>> {
    let mut path = Vec::with_capacity(policy.horizon() + 1);
    let mut state = draw_index(policy.source.view(), rng.random::<f64>())
        .ok_or_else(|| BridgeError::Input("source distribution has no mass".into()))?;
    path.push(state);
    for (t, pi) in policy.transitions.iter().enumerate() {
        state = draw_index(pi.row(state), rng.random::<f64>()).ok_or_else(|| {
            BridgeError::Internal(format!(
                "sampled path reached vertex {} at t = {t}, which has no outgoing mass",
                state + 1
            ))
        })?;
        path.push(state);
    }
    Ok(path)
}

/// Empirical entropy of a set of outcome counts, with a delta-method half-width.
fn empirical_entropy<'a>(counts: impl Iterator<Item = &'a usize>, total: usize) -> (f64, f64) {
    let t = total as f64;
    let (mut h, mut second) = (0.0, 0.0);
    for &c in counts {
        let f = c as f64 / t;
        let l = f.ln();
        h -= f * l;
        second += f * l * l;
    }
    let var = (second - h * h).max(0.0) / t;
    (h, Z_95 * var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCount {
    /// 1-based vertices.
    pub path: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub count: usize,
    pub seed: u64,
    /// `(N+1) x n` visit frequencies.
    pub empirical_marginals: Array2<f64>,
    /// Shannon entropy of the empirical path distribution, in nats.
    pub path_entropy: f64,
    pub distinct_paths: usize,
    /// Most frequent paths, ties broken lexicographically.
    pub top_paths: Vec<PathCount>,
}

/// Draws `count` independent paths from the policy's path measure.
pub fn sample_policy(
    policy: &RoutingPolicy,
    count: usize,
    seed: u64,
    top: usize,
) -> Result<SampleSummary> {
    if count == 0 {
        return Err(BridgeError::Input("sample count must be positive".into()));
    }
    let n = policy.n();
    let mut visits = Array2::<f64>::zeros((policy.horizon() + 1, n));
    let mut paths: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for k in 0..count {
        let path = sample_path(policy, &mut stream(seed, k as u64))?;
        for (t, &x) in path.iter().enumerate() {
            visits[[t, x]] += 1.0;
        }
        *paths.entry(path).or_default() += 1;
    }
    visits /= count as f64;
    let (path_entropy, _) = empirical_entropy(paths.values(), count);
    let mut ranked: Vec<(&Vec<usize>, &usize)> = paths.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let top_paths = ranked
        .into_iter()
        .take(top)
        .map(|(p, &c)| PathCount {
            path: p.iter().map(|v| v + 1).collect(),
            count: c,
        })
        .collect();
    Ok(SampleSummary {
        count,
        seed,
        empirical_marginals: visits,
        path_entropy,
        distinct_paths: paths.len(),
        top_paths,
    })
}

/// How links fail in a robustness trial.
#[derive(Debug, Clone, PartialEq)]
pub enum FailureModel {
    /// Each edge fails independently with this probability.
    Independent(f64),
    /// Exactly these 0-based edges are down.
    Explicit(Vec<(usize, usize)>),
}

impl FailureModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            FailureModel::Independent(q) if !(0.0..=1.0).contains(q) => Err(BridgeError::Input(
                format!("failure probability {q} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub trials: usize,
    pub seed: u64,
    /// Fraction of sampled paths that avoid every failed edge.
    pub delivered_fraction: f64,
    pub delivered_half_width: f64,
    /// Empirical entropy of the sampled path distribution.
    pub path_diversity: f64,
    pub diversity_half_width: f64,
}

/// Monte-Carlo delivered-mass fraction and path diversity under a failure model.
pub fn robustness_trials(
    policy: &RoutingPolicy,
    model: &FailureModel,
    trials: usize,
    seed: u64,
) -> Result<RobustnessReport> {
    model.validate()?;
    if trials == 0 {
        return Err(BridgeError::Input("trial count must be positive".into()));
    }
    let failed_set: BTreeSet<(usize, usize)> = match model {
        FailureModel::Explicit(edges) => edges.iter().copied().collect(),
        FailureModel::Independent(_) => BTreeSet::new(),
    };
    let mut delivered = 0usize;
    let mut paths: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for k in 0..trials {
        let mut rng = stream(seed, k as u64);
        let path = sample_path(policy, &mut rng)?;
        let survives = match model {
            FailureModel::Explicit(_) => {
                path.windows(2).all(|w| !failed_set.contains(&(w[0], w[1])))
            }
            FailureModel::Independent(q) => {
                // one failure draw per distinct edge on the path, in order of first use
                let mut seen = BTreeSet::new();
                let mut ok = true;
                for w in path.windows(2) {
                    if seen.insert((w[0], w[1])) && rng.random::<f64>() < *q {
                        ok = false;
                    }
                }
                ok
            }
        };
        if survives {
            delivered += 1;
        }
        *paths.entry(path).or_default() += 1;
    }
    let frac = delivered as f64 / trials as f64;
    let (path_diversity, diversity_half_width) = empirical_entropy(paths.values(), trials);
    Ok(RobustnessReport {
        trials,
        seed,
        delivered_fraction: frac,
        delivered_half_width: Z_95 * (frac * (1.0 - frac) / trials as f64).sqrt(),
        path_diversity,
        diversity_half_width,
    })
}

/// Probability that a policy path avoids every edge in `failed`, by forward propagation.
pub fn exact_delivered_fraction(policy: &RoutingPolicy, failed: &[(usize, usize)]) -> f64 {
    let failed: BTreeSet<(usize, usize)> = failed.iter().copied().collect();
    let mut mass: Array1<f64> = policy.source.clone();
    for pi in &policy.transitions {
        let mut kept = pi.clone();
        for &(i, j) in &failed {
            if i < kept.nrows() && j < kept.ncols() {
                kept[[i, j]] = 0.0;
            }
        }
        mass = kept.t().dot(&mass);
    }
    mass.sum()
}
