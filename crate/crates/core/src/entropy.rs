//! Relative entropy on vectors, kernels and Markov path measures.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::graph::PriorSchedule;

/// Order-independent sum: terms sorted by magnitude, Neumaier-compensated.
pub fn stable_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut v: Vec<f64> = terms.into_iter().collect();
    if v.iter().any(|x| x.is_infinite() || x.is_nan()) {
        return v.iter().sum();
    }
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn entropy_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

fn check_nonnegative(name: &str, v: impl IntoIterator<Item = f64>) -> Result<()> {
    for (i, x) in v.into_iter().enumerate() {
        if !(x >= 0.0) {
            return Err(BridgeError::Domain(format!(
                "{name}({}) = {x} is negative",
                i + 1
            )));
        }
    }
    Ok(())
}

/// `sum_i p_i log(p_i / q_i)` with `0 log 0 = 0`; `q` need not be normalized.
/// Infinite when `p` charges a point where `q` vanishes.
pub fn relative_entropy(p: &Array1<f64>, q: &Array1<f64>) -> Result<f64> {
    if p.len() != q.len() {
        return Err(BridgeError::Input(format!(
            "length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_nonnegative("p", p.iter().copied())?;
    check_nonnegative("q", q.iter().copied())?;
    Ok(stable_sum(
        p.iter().zip(q.iter()).map(|(&a, &b)| entropy_term(a, b)),
    ))
}

/// A Markov law on paths: initial weights and one kernel per step.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPathMeasure {
    initial: Array1<f64>,
    transitions: Vec<Array2<f64>>,
}

impl MarkovPathMeasure {
    pub fn new(initial: Array1<f64>, transitions: Vec<Array2<f64>>) -> Result<Self> {
        let n = initial.len();
        if n == 0 || transitions.is_empty() {
            return Err(BridgeError::Input(
                "path measure needs states and at least one step".into(),
            ));
        }
        check_nonnegative("initial", initial.iter().copied())?;
        for (t, m) in transitions.iter().enumerate() {
            if m.dim() != (n, n) {
                return Err(BridgeError::Input(format!(
                    "transition {t} has shape {:?}, expected ({n}, {n})",
                    m.dim()
                )));
            }
            check_nonnegative("transition", m.iter().copied())?;
        }
        Ok(Self {
            initial,
            transitions,
        })
    }

    /// The prior path measure with initial reference weights `mu0`.
    pub fn from_prior(prior: &PriorSchedule) -> Self {
        Self {
            initial: prior.mu0().clone(),
            transitions: prior.kernels().to_vec(),
        }
    }

    /// The prior kernels, row-normalized, started from `nu0`.
    pub fn prior_as_policy(prior: &PriorSchedule, nu0: Array1<f64>) -> Result<Self> {
        let transitions = prior
            .kernels()
            .iter()
            .map(|m| {
                let mut m = m.clone();
                for mut row in m.rows_mut() {
                    let s = row.sum();
                    if s > 0.0 {
                        row /= s;
                    }
                }
                m
            })
            .collect();
        Self::new(nu0, transitions)
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn horizon(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial(&self) -> &Array1<f64> {
        &self.initial
    }

    pub fn transitions(&self) -> &[Array2<f64>] {
        &self.transitions
    }

    /// Flow `p_0 = initial`, `p_{k+1}(j) = sum_i p_k(i) m_ij(k)`.
    pub fn marginals(&self) -> Vec<Array1<f64>> {
        let mut out = Vec::with_capacity(self.horizon() + 1);
        out.push(self.initial.clone());
        for m in &self.transitions {
            let next = m.t().dot(out.last().expect("nonempty"));
            out.push(next);
        }
        out
    }

    pub fn terminal_marginal(&self) -> Array1<f64> {
        self.marginals().pop().expect("nonempty")
    }

    /// Mass of a single path.
    pub fn path_mass(&self, path: &[usize]) -> f64 {
        path.windows(2)
            .enumerate()
            .fold(self.initial[path[0]], |acc, (t, w)| {
                acc * self.transitions[t][[w[0], w[1]]]
            })
    }
}

/// First transition where the law charges an edge the reference forbids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportViolation {
    /// `None` for a violation in the initial marginal.
    pub step: Option<usize>,
    pub from: usize,
    pub to: usize,
}

/// Stepwise decomposition of a path-measure divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceBreakdown {
    pub initial: f64,
    /// `sum_x p_k(x) D(pi_x(k) || m_x(k))` for each step `k`.
    pub steps: Vec<f64>,
    pub total: f64,
    pub violation: Option<SupportViolation>,
}

/// Relative entropy of `law` with respect to `reference`, without path enumeration.
pub fn path_measure_divergence(
    law: &MarkovPathMeasure,
    reference: &MarkovPathMeasure,
) -> Result<DivergenceBreakdown> {
    if law.n() != reference.n() || law.horizon() != reference.horizon() {
        return Err(BridgeError::Input(format!(
            "shape mismatch: {} states x {} steps vs {} states x {} steps",
            law.n(),
            law.horizon(),
            reference.n(),
            reference.horizon()
        )));
    }
    let mut violation = None;
    let initial = relative_entropy(&law.initial, &reference.initial)?;
    if initial.is_infinite() {
        let i = law
            .initial
            .iter()
            .zip(reference.initial.iter())
            .position(|(&p, &q)| p > 0.0 && q == 0.0)
            .unwrap_or(0);
        violation = Some(SupportViolation {
            step: None,
            from: i,
            to: i,
        });
    }
    let flows = law.marginals();
    let mut steps = Vec::with_capacity(law.horizon());
    for (k, (pi, m)) in law
        .transitions
        .iter()
        .zip(reference.transitions.iter())
        .enumerate()
    {
        let mut terms = Vec::new();
        for (x, &mass) in flows[k].iter().enumerate() {
            // zero-mass states contribute nothing
            if mass == 0.0 {
                continue;
            }
            for (y, (&a, &b)) in pi.row(x).iter().zip(m.row(x).iter()).enumerate() {
                let term = entropy_term(a, b);
                if term.is_infinite() && violation.is_none() {
                    violation = Some(SupportViolation {
                        step: Some(k),
                        from: x,
                        to: y,
                    });
                }
                terms.push(mass * term);
            }
        }
        steps.push(stable_sum(terms));
    }
    let total = stable_sum(std::iter::once(initial).chain(steps.iter().copied()));
    Ok(DivergenceBreakdown {
        initial,
        steps,
        total,
        violation,
    })
}

/// Brute-force divergence over every state sequence; only for tiny instances.
pub fn enumerated_divergence(
    law: &MarkovPathMeasure,
    reference: &MarkovPathMeasure,
    cap: usize,
) -> Result<f64> {
    let n = law.n();
    let len = law.horizon() + 1;
    let count = (n as f64).powi(len as i32);
    if count > cap as f64 {
        return Err(BridgeError::Resource(format!(
            "{count} sequences exceed the enumeration cap of {cap}"
        )));
    }
    let mut terms = Vec::new();
    let mut path = vec![0usize; len];
    loop {
        let p = law.path_mass(&path);
        if p > 0.0 {
            terms.push(entropy_term(p, reference.path_mass(&path)));
        }
        // odometer increment
        let mut pos = len;
        loop {
            if pos == 0 {
                return Ok(stable_sum(terms));
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
        }
    }
}

/// `D(P || M) + eta D(p_N || nu_N)` with its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub divergence: DivergenceBreakdown,
    /// `D(p_N || nu_N)`, unweighted.
    pub terminal: f64,
    pub eta: f64,
    pub total: f64,
}

pub fn objective_j(
    law: &MarkovPathMeasure,
    reference: &MarkovPathMeasure,
    nu_n: &Array1<f64>,
    eta: f64,
) -> Result<Objective> {
    if !(eta >= 0.0) {
        return Err(BridgeError::Domain(format!(
            "eta = {eta} must be nonnegative"
        )));
    }
    let divergence = path_measure_divergence(law, reference)?;
    let terminal = relative_entropy(&law.terminal_marginal(), nu_n)?;
    let weighted = if eta == 0.0 {
        0.0
    } else if eta.is_infinite() {
        // hard constraint: anything but a tiny mismatch is infeasible
        if terminal <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        eta * terminal
    };
    let total = divergence.total + weighted;
    Ok(Objective {
        divergence,
        terminal,
        eta,
        total,
    })
}
