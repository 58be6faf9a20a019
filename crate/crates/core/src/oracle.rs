//! Independent reference solver for the static form of the relaxed bridge.
//!
//! The dynamic problem reduces to choosing an endpoint coupling `p(x_0, x_N)`
//! with first marginal `nu0`, minimizing
//! `D(p || m0N) + eta D(column sums of p || nuN)` where `m0N(i, j) = mu0(i) K_ij`.
//! The optimal path measure then follows the prior's bridges between the
//! chosen endpoints. This module shares nothing with the potential-based
//! solver: it runs mirror descent (exponentiated gradient) on the product of
//! scaled simplices.

use ndarray::{Array1, Array2};

use crate::entropy::{relative_entropy, stable_sum};
use crate::error::{BridgeError, Result};
use crate::graph::{product_kernel, PriorSchedule};

/// Largest instance the oracle accepts.
pub const ORACLE_MAX_STATES: usize = 8;
const ROW_SUM_TOL: f64 = 1e-9;
const UNDERFLOW_CLAMP: f64 = 1e-300;
// beyond a unit step the line search only chases rounding noise
const MAX_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StaticInstance {
    pub coupling_prior: Array2<f64>,
    pub nu0: Array1<f64>,
    pub nu_n: Array1<f64>,
    pub eta: f64,
}

impl StaticInstance {
    pub fn new(
        coupling_prior: Array2<f64>,
        nu0: Array1<f64>,
        nu_n: Array1<f64>,
        eta: f64,
    ) -> Result<Self> {
        let n = nu0.len();
        if coupling_prior.dim() != (n, n) || nu_n.len() != n {
            return Err(BridgeError::Input("static instance shapes disagree".into()));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(BridgeError::Input(format!(
                "eta = {eta} must be finite and nonnegative"
            )));
        }
        if coupling_prior.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(BridgeError::Input(
                "coupling prior must be finite and nonnegative".into(),
            ));
        }
        for (i, row) in coupling_prior.rows().into_iter().enumerate() {
            if nu0[i] > 0.0 && row.sum() == 0.0 {
                return Err(BridgeError::Infeasible(format!(
                    "row {} of the coupling prior is zero but nu0 charges it",
                    i + 1
                )));
            }
        }
        Ok(Self {
            coupling_prior,
            nu0,
            nu_n,
            eta,
        })
    }

    /// `m0N(i, j) = mu0(i) K_ij` from the prior's product kernel.
    pub fn from_prior(
        prior: &PriorSchedule,
        nu0: Array1<f64>,
        nu_n: Array1<f64>,
        eta: f64,
    ) -> Result<Self> {
        let mut m = product_kernel(prior).matrix;
        for (i, mut row) in m.rows_mut().into_iter().enumerate() {
            row *= prior.mu0()[i];
        }
        Self::new(m, nu0, nu_n, eta)
    }

    pub fn n(&self) -> usize {
        self.nu0.len()
    }

    fn allowed(&self, i: usize, j: usize) -> bool {
        self.coupling_prior[[i, j]] > 0.0 && (self.eta == 0.0 || self.nu_n[j] > 0.0)
    }
}

fn column_sums(p: &Array2<f64>) -> Array1<f64> {
    p.columns()
        .into_iter()
        .map(|c| stable_sum(c.iter().copied()))
        .collect()
}

fn coupling_divergence(p: &Array2<f64>, m: &Array2<f64>) -> f64 {
    stable_sum(p.iter().zip(m.iter()).map(|(&a, &b)| {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    }))
}

fn objective_unchecked(p: &Array2<f64>, inst: &StaticInstance) -> f64 {
    let first = coupling_divergence(p, &inst.coupling_prior);
    if inst.eta == 0.0 {
        return first;
    }
    let terminal = relative_entropy(&column_sums(p), &inst.nu_n).unwrap_or(f64::INFINITY);
    first + inst.eta * terminal
}

/// `D(p || m0N) + eta D(p_N || nuN)` for a coupling with row sums `nu0`.
pub fn static_objective(p: &Array2<f64>, inst: &StaticInstance) -> Result<f64> {
    let n = inst.n();
    if p.dim() != (n, n) {
        return Err(BridgeError::Input(format!(
            "coupling has shape {:?}, expected ({n}, {n})",
            p.dim()
        )));
    }
    if p.iter().any(|v| !(*v >= 0.0)) {
        return Err(BridgeError::Input("coupling has a negative entry".into()));
    }
    for (i, row) in p.rows().into_iter().enumerate() {
        let s = row.sum();
        if (s - inst.nu0[i]).abs() > ROW_SUM_TOL {
            return Err(BridgeError::Input(format!(
                "row {} of the coupling sums to {s}, expected nu0 = {}",
                i + 1,
                inst.nu0[i]
            )));
        }
    }
    Ok(objective_unchecked(p, inst))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub coupling: Array2<f64>,
    pub value: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

// Gradient up to per-row constants: log(p/m) + eta log(q/nuN).
fn gradient(p: &Array2<f64>, inst: &StaticInstance) -> Array2<f64> {
    let q = column_sums(p);
    let mut g = Array2::<f64>::zeros(p.dim());
    for ((i, j), v) in g.indexed_iter_mut() {
        if p[[i, j]] > 0.0 {
            *v = (p[[i, j]] / inst.coupling_prior[[i, j]]).ln();
            if inst.eta > 0.0 {
                *v += inst.eta * (q[j] / inst.nu_n[j]).ln();
            }
        }
    }
    g
}

// Mass-weighted deviation of the gradient from its row average; zero exactly
// at a minimizer with full support on the allowed entries.
fn kkt_residual(p: &Array2<f64>, g: &Array2<f64>, nu0: &Array1<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..p.nrows() {
        if nu0[i] == 0.0 {
            continue;
        }
        let mean = stable_sum(p.row(i).iter().zip(g.row(i).iter()).map(|(a, b)| a * b)) / nu0[i];
        total += stable_sum(
            p.row(i)
                .iter()
                .zip(g.row(i).iter())
                .map(|(a, b)| a * (b - mean).abs()),
        );
    }
    total
}

fn mirror_step(p: &Array2<f64>, g: &Array2<f64>, step: f64, inst: &StaticInstance) -> Array2<f64> {
    let n = inst.n();
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        if inst.nu0[i] == 0.0 {
            continue;
        }
        let logs: Vec<Option<f64>> = (0..n)
            .map(|j| (p[[i, j]] > 0.0).then(|| p[[i, j]].ln() - step * g[[i, j]]))
            .collect();
        let top = logs
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let weights: Vec<f64> = logs
            .iter()
            .map(|l| l.map_or(0.0, |l| (l - top).exp()))
            .collect();
        let z = stable_sum(weights.iter().copied());
        for j in 0..n {
            out[[i, j]] = inst.nu0[i] * weights[j] / z;
        }
    }
    out
}

/// Row-conditional prior restricted to the allowed support, or a caller-supplied start.
fn initial_coupling(inst: &StaticInstance, start: Option<&Array2<f64>>) -> Result<Array2<f64>> {
    let n = inst.n();
    let mut p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        if inst.nu0[i] == 0.0 {
            continue;
        }
        let weights: Vec<f64> = (0..n)
            .map(|j| {
                if !inst.allowed(i, j) {
                    0.0
                } else {
                    start.map_or(inst.coupling_prior[[i, j]], |s| s[[i, j]])
                }
            })
            .collect();
        let z: f64 = weights.iter().sum();
        if !(z > 0.0) {
            return Err(BridgeError::Infeasible(format!(
                "row {} has no endpoint inside the support of nuN",
                i + 1
            )));
        }
        for j in 0..n {
            p[[i, j]] = inst.nu0[i] * weights[j] / z;
        }
    }
    Ok(p)
}

/// Minimizes the static objective by exponentiated gradient with backtracking.
///
/// The objective is `(1 + eta)`-smooth relative to the entropy on couplings
/// of fixed mass, so a step of `1 / (1 + eta)` always passes the line search.
pub fn solve_static_oracle(
    inst: &StaticInstance,
    start: Option<&Array2<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<OracleSolution> {
    let n = inst.n();
    if n > ORACLE_MAX_STATES {
        return Err(BridgeError::Resource(format!(
            "oracle handles at most {ORACLE_MAX_STATES} states, got {n}"
        )));
    }
    if let Some(s) = start {
        if s.dim() != (n, n) || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(BridgeError::Input(
                "oracle start must be a positive n x n matrix".into(),
            ));
        }
    }
    let min_step = 1.0 / (1.0 + inst.eta);
    let mut p = initial_coupling(inst, start)?;
    let mut value = objective_unchecked(&p, inst);
    let mut step = min_step;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let g = gradient(&p, inst);
        residual = kkt_residual(&p, &g, &inst.nu0);
        if residual < tol {
            p.mapv_inplace(|v| if v < UNDERFLOW_CLAMP { 0.0 } else { v });
            return Ok(OracleSolution {
                value: objective_unchecked(&p, inst),
                coupling: p,
                iterations: it,
                kkt_residual: residual,
            });
        }
        step = (step * 2.0).min(MAX_STEP);
        loop {
            let candidate = mirror_step(&p, &g, step, inst);
            let cand_value = objective_unchecked(&candidate, inst);
            let linear = stable_sum(
                g.iter()
                    .zip(candidate.iter().zip(p.iter()))
                    .map(|(gv, (c, o))| gv * (c - o)),
            );
            let bound = value + linear + coupling_divergence(&candidate, &p) / step;
            if cand_value <= bound || step <= min_step {
                p = candidate;
                value = cand_value;
                break;
            }
            step = (step * 0.5).max(min_step);
        }
    }
    Err(BridgeError::Convergence {
        iterations: max_iter,
        last_residual: residual,
        residuals: vec![residual],
    })
}
