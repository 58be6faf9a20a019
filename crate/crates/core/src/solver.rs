//! Fixed-point solver for the generalized Schrödinger system and assembly of
//! the optimal routing policy.
//!
//! For a penalty weight `eta` the unknowns are potentials `phi(t)` and
//! co-potentials `phi_hat(t)` with
//!
//! ```text
//! phi(t)       = M(t) phi(t+1)
//! phi_hat(t+1) = M(t)^T phi_hat(t)
//! phi(0) phi_hat(0)                      = nu0
//! phi(N)^((eta+1)/eta) phi_hat(N)         = nuN
//! ```
//!
//! The terminal co-potential is the fixed point of [`ComposedMap::apply_c`],
//! which is homogeneous of degree `p = eta / (eta + 1)` and contracts the
//! Hilbert metric by at least `p`.

use log::{debug, info, trace, warn};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::entropy::MarkovPathMeasure;
use crate::error::{BridgeError, Result};
use crate::graph::{product_kernel, PositivityMode, PriorSchedule, ProductKernel};
use crate::hilbert::{
    birkhoff_ratio, hilbert_distance, ComposedMap, PositiveVector, PROBABILITY_TOL,
};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Successive-residual ratios are only recorded while the earlier residual
/// is above this level; below it they are dominated by rounding.
pub const CONTRACTION_NOISE_FLOOR: f64 = 1e-9;
/// Unroutable mass below this is treated as rounding in the hard-bridge feasibility test.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// `phi(t, i)` and `phi_hat(t, i)` for `t = 0..=N`, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSchedules {
    pub phi: Array2<f64>,
    pub phi_hat: Array2<f64>,
}

/// Maximum violations of the Schrödinger system, all relative to the local scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemResiduals {
    pub backward: f64,
    pub forward: f64,
    pub initial: f64,
    /// Terminal boundary condition; `None` when `eta = 0`, where it is vacuous.
    pub terminal: Option<f64>,
}

impl SystemResiduals {
    pub fn max(&self) -> f64 {
        [
            self.backward,
            self.forward,
            self.initial,
            self.terminal.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() / scale
}

impl PotentialSchedules {
    pub fn horizon(&self) -> usize {
        self.phi.nrows() - 1
    }

    pub fn phi_at(&self, t: usize) -> Array1<f64> {
        self.phi.row(t).to_owned()
    }

    pub fn phi_hat_at(&self, t: usize) -> Array1<f64> {
        self.phi_hat.row(t).to_owned()
    }

    /// Residuals of the recursions and the boundary conditions for weight `eta`.
    pub fn residuals(
        &self,
        prior: &PriorSchedule,
        nu0: &Array1<f64>,
        nu_n: &Array1<f64>,
        eta: f64,
    ) -> SystemResiduals {
        let n_steps = self.horizon();
        let mut backward = 0.0f64;
        let mut forward = 0.0f64;
        for t in 0..n_steps {
            let m = prior.kernel(t);
            let back = m.dot(&self.phi.row(t + 1));
            let fwd = m.t().dot(&self.phi_hat.row(t));
            for i in 0..prior.n() {
                backward = backward.max(relative_gap(self.phi[[t, i]], back[i]));
                forward = forward.max(relative_gap(self.phi_hat[[t + 1, i]], fwd[i]));
            }
        }
        let initial = (0..prior.n())
            .map(|i| (self.phi[[0, i]] * self.phi_hat[[0, i]] - nu0[i]).abs())
            .fold(0.0, f64::max);
        let terminal = (eta > 0.0).then(|| {
            let exponent = if eta.is_infinite() {
                1.0
            } else {
                (eta + 1.0) / eta
            };
            (0..prior.n())
                .map(|j| {
                    let phi = self.phi[[n_steps, j]];
                    (phi.powf(exponent) * self.phi_hat[[n_steps, j]] - nu_n[j]).abs()
                })
                .fold(0.0, f64::max)
        });
        SystemResiduals {
            backward,
            forward,
            initial,
            terminal,
        }
    }
}

/// Optimal time-varying transition matrices with the marginal flow they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingPolicy {
    pub transitions: Vec<Array2<f64>>,
    /// `(N+1) x n`, row `t` is `p*(t)`.
    pub marginals: Array2<f64>,
    pub source: Array1<f64>,
    /// `(t, i)` pairs with `phi(t, i) = 0`, emitted as zero rows.
    pub inactive_states: Vec<(usize, usize)>,
    /// `max |p*(t,i) - phi(t,i) phi_hat(t,i)|`.
    pub factorization_residual: f64,
}

impl RoutingPolicy {
    pub fn horizon(&self) -> usize {
        self.transitions.len()
    }

    pub fn n(&self) -> usize {
        self.source.len()
    }

    pub fn marginal(&self, t: usize) -> Array1<f64> {
        self.marginals.row(t).to_owned()
    }

    pub fn terminal_marginal(&self) -> Array1<f64> {
        self.marginal(self.horizon())
    }

    pub fn to_path_measure(&self) -> MarkovPathMeasure {
        MarkovPathMeasure::new(self.source.clone(), self.transitions.clone())
            .expect("policy shapes are consistent by construction")
    }

    /// Endpoint coupling `p(x_0, x_N)`.
    pub fn endpoint_coupling(&self) -> Array2<f64> {
        let n = self.n();
        let through = self
            .transitions
            .iter()
            .fold(Array2::<f64>::eye(n), |acc, pi| acc.dot(pi));
        let mut coupling = through;
        for (i, mut row) in coupling.rows_mut().into_iter().enumerate() {
            row *= self.source[i];
        }
        coupling
    }
}

/// Diagnostics of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Hilbert distance between the last two normalized iterates.
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    /// Ratios of successive residuals.
    pub measured_contraction: Vec<f64>,
    /// `eta / (eta + 1)`, or 1 for the hard bridge.
    pub guaranteed_bound: f64,
    pub birkhoff_ratio: f64,
    pub positivity_mode: PositivityMode,
    /// `lambda` with `C(ray) = lambda ray` for the unit 1-norm ray.
    pub eigenvalue: f64,
    /// `max_i |x_i - C(x)_i| / max(1, max_i x_i)` at the rescaled fixed point.
    pub fixed_point_residual: f64,
    pub converged: bool,
}

/// Output of a bridge solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSolution {
    pub potentials: PotentialSchedules,
    pub policy: RoutingPolicy,
    pub report: SolveReport,
}

/// Fixed ray of the composite map.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedRay {
    /// Unit 1-norm representative.
    pub ray: PositiveVector,
    /// `C(ray) = eigenvalue * ray`, measured as the 1-norm of the image.
    pub eigenvalue: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Iterates `y <- C(y) / |C(y)|_1` until consecutive iterates are within `tol` in the Hilbert metric.
pub fn fixed_point_iterate(
    map: &ComposedMap,
    x0: &PositiveVector,
    tol: f64,
    max_iter: usize,
) -> Result<FixedRay> {
    if map.exponent() >= 1.0 {
        return Err(BridgeError::Domain(
            "fixed-point iteration needs a strictly contracting exponent below 1".into(),
        ));
    }
    iterate_ray(map, x0, tol, max_iter, |_, _| true)
}

// `accept` gets a final say once the Hilbert residual is below tol.
fn iterate_ray(
    map: &ComposedMap,
    x0: &PositiveVector,
    tol: f64,
    max_iter: usize,
    mut accept: impl FnMut(&PositiveVector, &PositiveVector) -> bool,
) -> Result<FixedRay> {
    if x0.len() != map.n() {
        return Err(BridgeError::Input(format!(
            "start vector has length {}, expected {}",
            x0.len(),
            map.n()
        )));
    }
    let (mut y, _) = x0.normalized();
    let mut residuals = Vec::new();
    for it in 1..=max_iter {
        let image = match map.apply_c(&y) {
            Ok(image) => image,
            // the start vector passed, so a later failure means the ray left the float range
            Err(e) if it > 1 => {
                warn!("iterate left the floating-point range at iteration {it}: {e}");
                return Err(BridgeError::Convergence {
                    iterations: it - 1,
                    last_residual: residuals.last().copied().unwrap_or(f64::NAN),
                    residuals,
                });
            }
            Err(e) => return Err(e),
        };
        let residual = hilbert_distance(&y, &image)?;
        residuals.push(residual);
        trace!("iteration {it}: hilbert residual {residual:e}");
        if residual < tol && accept(&y, &image) {
            let eigenvalue = image.as_array().sum();
            return Ok(FixedRay {
                ray: y,
                eigenvalue,
                residuals,
                iterations: it,
            });
        }
        y = image.normalized().0;
    }
    Err(BridgeError::Convergence {
        iterations: max_iter,
        last_residual: residuals.last().copied().unwrap_or(f64::NAN),
        residuals,
    })
}

/// Scales a fixed ray into the fixed point of the degree-`p` map.
///
/// With `C(ray) = lambda ray` and `C(c x) = c^p C(x)`, the point `c ray` is
/// fixed iff `c^p lambda = c`, i.e. `c = lambda^(1/(1-p)) = lambda^(eta+1)`.
pub fn eigen_rescale(ray: &PositiveVector, eigenvalue: f64, eta: f64) -> Result<PositiveVector> {
    if !(eigenvalue > 0.0 && eigenvalue.is_finite()) {
        return Err(BridgeError::Domain(format!(
            "eigenvalue {eigenvalue} must be positive"
        )));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(BridgeError::Domain(format!(
            "eta = {eta} must be positive and finite"
        )));
    }
    ray.scaled(rescale_factor(eigenvalue, eta))
}

fn rescale_factor(eigenvalue: f64, eta: f64) -> f64 {
    ((eta + 1.0) * eigenvalue.ln()).exp()
}

/// Backward recursion from `phi(N)`, then `phi_hat(0) = nu0 / phi(0)` and the forward recursion.
pub fn propagate_potentials(
    prior: &PriorSchedule,
    phi_n: &Array1<f64>,
    nu0: &Array1<f64>,
) -> Result<PotentialSchedules> {
    let n = prior.n();
    let horizon = prior.horizon();
    if phi_n.len() != n || nu0.len() != n {
        return Err(BridgeError::Input(
            "boundary vectors do not match the prior size".into(),
        ));
    }
    if phi_n.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(BridgeError::Domain(
            "terminal potential must be finite and nonnegative".into(),
        ));
    }
    let mut phi = Array2::<f64>::zeros((horizon + 1, n));
    phi.row_mut(horizon).assign(phi_n);
    for t in (0..horizon).rev() {
        let next = prior.kernel(t).dot(&phi.row(t + 1));
        phi.row_mut(t).assign(&next);
    }
    let mut phi_hat = Array2::<f64>::zeros((horizon + 1, n));
    for i in 0..n {
        if nu0[i] > 0.0 {
            let p0 = phi[[0, i]];
            if !(p0 > 0.0) {
                return Err(BridgeError::Degeneracy(format!(
                    "phi(0, {}) = 0 while nu0 charges vertex {}",
                    i + 1,
                    i + 1
                )));
            }
            phi_hat[[0, i]] = nu0[i] / p0;
        }
    }
    for t in 0..horizon {
        let next = prior.kernel(t).t().dot(&phi_hat.row(t));
        phi_hat.row_mut(t + 1).assign(&next);
    }
    Ok(PotentialSchedules { phi, phi_hat })
}

/// Transitions `pi_ij(t) = m_ij(t) phi(t+1, j) / phi(t, i)` and the flow they carry from `nu0`.
pub fn assemble_policy(
    prior: &PriorSchedule,
    potentials: &PotentialSchedules,
    nu0: &Array1<f64>,
) -> Result<RoutingPolicy> {
    let n = prior.n();
    let horizon = prior.horizon();
    if potentials.phi.dim() != (horizon + 1, n) || potentials.phi_hat.dim() != (horizon + 1, n) {
        return Err(BridgeError::Input(
            "potential schedules do not match the prior".into(),
        ));
    }
    let mut transitions = Vec::with_capacity(horizon);
    let mut inactive_states = Vec::new();
    let mut marginals = Array2::<f64>::zeros((horizon + 1, n));
    marginals.row_mut(0).assign(nu0);
    for t in 0..horizon {
        let m = prior.kernel(t);
        let mut pi = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            let denom = potentials.phi[[t, i]];
            if denom > 0.0 {
                for j in 0..n {
                    if m[[i, j]] != 0.0 {
                        pi[[i, j]] = m[[i, j]] * potentials.phi[[t + 1, j]] / denom;
                    }
                }
            } else {
                if marginals[[t, i]] > 0.0 {
                    return Err(BridgeError::Internal(format!(
                        "vertex {} carries mass {} at t = {t} but has zero potential",
                        i + 1,
                        marginals[[t, i]]
                    )));
                }
                inactive_states.push((t, i));
            }
        }
        let next = pi.t().dot(&marginals.row(t));
        marginals.row_mut(t + 1).assign(&next);
        transitions.push(pi);
    }
    for i in (0..n).filter(|&i| !(potentials.phi[[horizon, i]] > 0.0)) {
        inactive_states.push((horizon, i));
    }
    let factorization_residual = marginals
        .iter()
        .zip(potentials.phi.iter().zip(potentials.phi_hat.iter()))
        .map(|(p, (a, b))| (p - a * b).abs())
        .fold(0.0, f64::max);
    Ok(RoutingPolicy {
        transitions,
        marginals,
        source: nu0.clone(),
        inactive_states,
        factorization_residual,
    })
}

fn validate_marginal(name: &str, v: &Array1<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(BridgeError::Input(format!(
            "{name} has length {}, expected {n}",
            v.len()
        )));
    }
    if let Some((i, x)) = v
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
    {
        return Err(BridgeError::Input(format!(
            "{name}({}) = {x} is not a probability",
            i + 1
        )));
    }
    let total = v.sum();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return Err(BridgeError::Input(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

/// Feasibility and positivity checks shared by both solvers.
fn classify(
    kernel: &ProductKernel,
    nu0: &Array1<f64>,
    nu_n: &Array1<f64>,
    penalized: bool,
) -> Result<PositivityMode> {
    let k = &kernel.matrix;
    for (i, row) in k.rows().into_iter().enumerate() {
        if nu0[i] > 0.0 && row.iter().all(|&v| v == 0.0) {
            return Err(BridgeError::Infeasible(format!(
                "vertex {} carries initial mass but has no feasible path of the given length",
                i + 1
            )));
        }
        if penalized
            && nu0[i] > 0.0
            && row
                .iter()
                .zip(nu_n.iter())
                .all(|(&g, &t)| g == 0.0 || t == 0.0)
        {
            return Err(BridgeError::Infeasible(format!(
                "no feasible path from vertex {} ends in the support of nuN",
                i + 1
            )));
        }
    }
    for (j, col) in k.columns().into_iter().enumerate() {
        if nu_n[j] > 0.0 && col.iter().all(|&v| v == 0.0) {
            return Err(BridgeError::Infeasible(format!(
                "target vertex {} is unreachable in exactly N steps",
                j + 1
            )));
        }
    }
    if kernel.strictly_positive {
        Ok(PositivityMode::Strict)
    } else if kernel.relaxed_positive
        && nu0.iter().all(|&v| v > 0.0)
        && nu_n.iter().all(|&v| v > 0.0)
    {
        Ok(PositivityMode::Relaxed)
    } else {
        let reason = if kernel.relaxed_positive {
            "product kernel has zero entries and a marginal is not everywhere positive"
        } else {
            "product kernel has a zero row or column"
        };
        Err(BridgeError::Precondition(reason.into()))
    }
}

/// Columns whose target mass exceeds the initial mass that can reach them, if any.
///
/// Max-flow from rows (capacity `nu0`) through the support of `K` to columns (capacity
/// `nuN`); the unreached side of the final residual graph is the violating column set.
fn transport_deficit(
    k: &Array2<f64>,
    nu0: &Array1<f64>,
    nu_n: &Array1<f64>,
) -> Option<(Vec<usize>, f64, f64)> {
    let n = k.nrows();
    let (source, sink) = (2 * n, 2 * n + 1);
    let size = 2 * n + 2;
    let mut cap = Array2::<f64>::zeros((size, size));
    for i in 0..n {
        cap[[source, i]] = nu0[i];
        cap[[n + i, sink]] = nu_n[i];
        for j in 0..n {
            if k[[i, j]] > 0.0 {
                cap[[i, n + j]] = f64::INFINITY;
            }
        }
    }
    let mut flow = 0.0;
    let reachable = loop {
        let mut prev = vec![usize::MAX; size];
        prev[source] = source;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for v in 0..size {
                if prev[v] == usize::MAX && cap[[u, v]] > 0.0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break prev;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != source {
            push = push.min(cap[[prev[v], v]]);
            v = prev[v];
        }
        let mut v = sink;
        while v != source {
            let u = prev[v];
            cap[[u, v]] -= push;
            cap[[v, u]] += push;
            v = u;
        }
        flow += push;
    };
    if flow >= nu_n.sum() - FEASIBILITY_TOL {
        return None;
    }
    let columns: Vec<usize> = (0..n).filter(|&j| reachable[n + j] == usize::MAX).collect();
    let demand = columns.iter().map(|&j| nu_n[j]).sum();
    let supply = (0..n)
        .filter(|&i| columns.iter().any(|&j| k[[i, j]] > 0.0))
        .map(|i| nu0[i])
        .sum();
    Some((columns, demand, supply))
}

fn contraction_ratios(residuals: &[f64]) -> Vec<f64> {
    residuals
        .windows(2)
        .take_while(|w| w[0] > CONTRACTION_NOISE_FLOOR)
        .map(|w| w[1] / w[0])
        .collect()
}

/// Solves `min D(P || M) + eta D(p_N || nuN)` over path measures with initial marginal `nu0`.
///
/// `eta = f64::INFINITY` solves the classical bridge with a hard terminal constraint.
pub fn solve_relaxed_bridge(
    prior: &PriorSchedule,
    nu0: &Array1<f64>,
    nu_n: &Array1<f64>,
    eta: f64,
    options: SolveOptions,
) -> Result<BridgeSolution> {
    if eta.is_nan() || eta < 0.0 {
        return Err(BridgeError::Input(format!(
            "eta = {eta} must be nonnegative"
        )));
    }
    if eta.is_infinite() {
        return solve_hard_bridge(prior, nu0, nu_n, options);
    }
    let n = prior.n();
    validate_marginal("nu0", nu0, n)?;
    validate_marginal("nuN", nu_n, n)?;
    let kernel = product_kernel(prior);
    let mode = classify(&kernel, nu0, nu_n, eta > 0.0)?;
    let ratio = birkhoff_ratio(&kernel.matrix);
    info!(
        "solving relaxed bridge: n = {n}, N = {}, eta = {eta}, mode = {mode}",
        prior.horizon()
    );

    if eta == 0.0 {
        return solve_unpenalized(prior, nu0, mode, ratio);
    }

    let p = eta / (eta + 1.0);
    let map = ComposedMap::new(&kernel, nu0.clone(), nu_n.clone(), p)?;
    let mut fixed_point_residual = f64::NAN;
    let fixed = iterate_ray(
        &map,
        &PositiveVector::ones(n),
        options.tol,
        options.max_iter,
        |y, image| {
            fixed_point_residual = rescaled_residual(&map, y, image, eta);
            fixed_point_residual < options.tol
        },
    )?;
    debug!(
        "fixed ray after {} iterations, eigenvalue {}",
        fixed.iterations, fixed.eigenvalue
    );

    // phi(N) = (nuN / (c ray))^p with c = lambda^(eta+1), so p ln c = eta ln lambda;
    // evaluated in log form since c itself may overflow for large eta
    let log_lambda = fixed.eigenvalue.ln();
    let ray = fixed.ray.as_array();
    let phi_n: Array1<f64> = nu_n
        .iter()
        .zip(ray.iter())
        .map(|(&target, &r)| {
            if target == 0.0 {
                0.0
            } else {
                (p * (target.ln() - r.ln()) - eta * log_lambda).exp()
            }
        })
        .collect();
    let potentials = propagate_potentials(prior, &phi_n, nu0)?;
    let policy = assemble_policy(prior, &potentials, nu0)?;
    let report = SolveReport {
        iterations: fixed.iterations,
        final_residual: *fixed.residuals.last().expect("at least one iteration"),
        measured_contraction: contraction_ratios(&fixed.residuals),
        residual_history: fixed.residuals,
        guaranteed_bound: p,
        birkhoff_ratio: ratio,
        positivity_mode: mode,
        eigenvalue: fixed.eigenvalue,
        fixed_point_residual,
        converged: true,
    };
    Ok(BridgeSolution {
        potentials,
        policy,
        report,
    })
}

// Relative sup-norm residual of the rescaled point `c y`, where `image = C(y)`
// and `y` has unit mass.
fn rescaled_residual(
    map: &ComposedMap,
    y: &PositiveVector,
    image: &PositiveVector,
    eta: f64,
) -> f64 {
    let lambda = image.as_array().sum();
    let c = rescale_factor(lambda, eta);
    let direct = y
        .scaled(c)
        .and_then(|x| map.apply_c(&x).map(|cx| (x, cx)))
        .ok()
        .filter(|(x, cx)| {
            x.as_array()
                .iter()
                .chain(cx.as_array().iter())
                .all(|v| v.is_finite())
        });
    match direct {
        Some((x, cx)) => {
            let scale = x.as_array().iter().fold(1.0f64, |a, &b| a.max(b));
            (x.as_array() - cx.as_array())
                .iter()
                .fold(0.0f64, |a, &b| a.max(b.abs()))
                / scale
        }
        // C(c y) / (c y) = C(y) / (lambda y) entrywise
        None => {
            let ymax = y.as_array().iter().fold(0.0f64, |a, &b| a.max(b));
            y.as_array()
                .iter()
                .zip(image.as_array().iter())
                .map(|(&yi, &zi)| (zi / (lambda * yi) - 1.0).abs() * yi / ymax)
                .fold(0.0, f64::max)
        }
    }
}

// eta = 0: phi(N) = 1. For stochastic kernels phi is identically 1 and the
// prior kernels are returned untouched.
fn solve_unpenalized(
    prior: &PriorSchedule,
    nu0: &Array1<f64>,
    mode: PositivityMode,
    ratio: f64,
) -> Result<BridgeSolution> {
    let n = prior.n();
    let (potentials, policy) = if prior.is_stochastic(1e-12) {
        let horizon = prior.horizon();
        let phi = Array2::<f64>::ones((horizon + 1, n));
        let mut marginals = Array2::<f64>::zeros((horizon + 1, n));
        marginals.row_mut(0).assign(nu0);
        for t in 0..horizon {
            let next = prior.kernel(t).t().dot(&marginals.row(t));
            marginals.row_mut(t + 1).assign(&next);
        }
        let policy = RoutingPolicy {
            transitions: prior.kernels().to_vec(),
            marginals: marginals.clone(),
            source: nu0.clone(),
            inactive_states: Vec::new(),
            factorization_residual: 0.0,
        };
        (
            PotentialSchedules {
                phi,
                phi_hat: marginals,
            },
            policy,
        )
    } else {
        let potentials = propagate_potentials(prior, &Array1::ones(n), nu0)?;
        let policy = assemble_policy(prior, &potentials, nu0)?;
        (potentials, policy)
    };
    Ok(BridgeSolution {
        potentials,
        policy,
        report: SolveReport {
            iterations: 0,
            final_residual: 0.0,
            residual_history: Vec::new(),
            measured_contraction: Vec::new(),
            guaranteed_bound: 0.0,
            birkhoff_ratio: ratio,
            positivity_mode: mode,
            eigenvalue: 1.0,
            fixed_point_residual: 0.0,
            converged: true,
        },
    })
}

/// Classical bridge: terminal marginal matched exactly, `phi(N) phi_hat(N) = nuN`.
pub fn solve_hard_bridge(
    prior: &PriorSchedule,
    nu0: &Array1<f64>,
    nu_n: &Array1<f64>,
    options: SolveOptions,
) -> Result<BridgeSolution> {
    let n = prior.n();
    validate_marginal("nu0", nu0, n)?;
    validate_marginal("nuN", nu_n, n)?;
    let kernel = product_kernel(prior);
    let mode = classify(&kernel, nu0, nu_n, true)?;
    if let Some((columns, demand, supply)) = transport_deficit(&kernel.matrix, nu0, nu_n) {
        let names: Vec<String> = columns.iter().map(|j| (j + 1).to_string()).collect();
        return Err(BridgeError::Infeasible(format!(
            "target vertices {{{}}} need mass {demand} but only {supply} can reach them in N steps",
            names.join(", ")
        )));
    }
    let ratio = birkhoff_ratio(&kernel.matrix);
    info!(
        "solving hard bridge: n = {n}, N = {}, mode = {mode}",
        prior.horizon()
    );

    let map = ComposedMap::classical(&kernel, nu0.clone(), nu_n.clone())?;
    // at the fixed point the eigenvalue is 1: sum_j C(x)_j nuN_j / x_j = sum nu0
    let fixed = iterate_ray(
        &map,
        &PositiveVector::ones(n),
        options.tol,
        options.max_iter,
        |_, image| (image.as_array().sum() - 1.0).abs() < options.tol,
    )?;
    let phi_n = map.terminal_potential(&fixed.ray)?;
    let potentials = propagate_potentials(prior, &phi_n, nu0)?;
    let policy = assemble_policy(prior, &potentials, nu0)?;
    let fixed_point_residual = (fixed.eigenvalue - 1.0).abs();
    let report = SolveReport {
        iterations: fixed.iterations,
        final_residual: *fixed.residuals.last().expect("at least one iteration"),
        measured_contraction: contraction_ratios(&fixed.residuals),
        residual_history: fixed.residuals,
        guaranteed_bound: 1.0,
        birkhoff_ratio: ratio,
        positivity_mode: mode,
        eigenvalue: fixed.eigenvalue,
        fixed_point_residual,
        converged: true,
    };
    Ok(BridgeSolution {
        potentials,
        policy,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hard_bridge_reports_transport_deficit() {
        // column 2 is fed by row 1 only, which holds 0.3 < 0.6
        let k = PriorSchedule::time_invariant(array![[0.5, 0.5], [1.0, 0.0]], 1, None).unwrap();
        match solve_hard_bridge(
            &k,
            &array![0.3, 0.7],
            &array![0.4, 0.6],
            SolveOptions::default(),
        ) {
            Err(BridgeError::Infeasible(msg)) => assert!(msg.contains("{2}"), "{msg}"),
            other => panic!("expected infeasibility, got {other:?}"),
        }
        let ok = solve_hard_bridge(
            &k,
            &array![0.7, 0.3],
            &array![0.4, 0.6],
            SolveOptions::default(),
        )
        .unwrap();
        assert!((ok.policy.terminal_marginal()[1] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn runaway_iterates_are_a_convergence_failure() {
        // same deficit; with a large finite eta the ray drifts out of range
        let k = PriorSchedule::time_invariant(array![[0.5, 0.5], [1.0, 0.0]], 1, None).unwrap();
        let r = solve_relaxed_bridge(
            &k,
            &array![0.3, 0.7],
            &array![0.4, 0.6],
            1e8,
            SolveOptions::default(),
        );
        assert!(matches!(r, Err(BridgeError::Convergence { .. })), "{r:?}");
    }

    fn symmetric_prior(horizon: usize) -> PriorSchedule {
        PriorSchedule::time_invariant(Array2::from_elem((2, 2), 0.5), horizon, None).unwrap()
    }

    fn close(a: &Array1<f64>, b: &Array1<f64>, tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn symmetric_instance() {
        let nu = array![0.5, 0.5];
        let sol = solve_relaxed_bridge(&symmetric_prior(1), &nu, &nu, 1.0, SolveOptions::default())
            .unwrap();
        assert!(close(
            &sol.potentials.phi_hat_at(1),
            &array![0.5, 0.5],
            1e-12
        ));
        assert!(close(&sol.potentials.phi_at(1), &array![1.0, 1.0], 1e-12));
        assert!(close(&sol.policy.terminal_marginal(), &nu, 1e-12));
        for (a, b) in sol.policy.transitions[0].iter().zip([0.5; 4]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_potentials_are_stationary() {
        let nu = array![0.5, 0.5];
        let sol = solve_relaxed_bridge(&symmetric_prior(1), &nu, &nu, 1.0, SolveOptions::default())
            .unwrap();
        for t in 0..=1 {
            assert!(close(&sol.potentials.phi_at(t), &array![1.0, 1.0], 1e-12));
            assert!(close(
                &sol.potentials.phi_hat_at(t),
                &array![0.5, 0.5],
                1e-12
            ));
        }
    }

    #[test]
    fn fixed_ray_of_symmetric_map() {
        let k = ProductKernel::from_matrix(Array2::from_elem((2, 2), 0.5));
        let map = ComposedMap::new(&k, array![0.5, 0.5], array![0.5, 0.5], 0.5).unwrap();
        let fixed = fixed_point_iterate(&map, &PositiveVector::ones(2), 1e-12, 100).unwrap();
        assert!(close(fixed.ray.as_array(), &array![0.5, 0.5], 1e-15));
        // C((.5,.5)) = (.5,.5), so the unit-mass ray has eigenvalue 1
        assert!((fixed.eigenvalue - 1.0).abs() < 1e-15);
        // ...and the (1,1) representative has eigenvalue 1/sqrt(2)
        let img = map.apply_c(&PositiveVector::ones(2)).unwrap();
        assert!((img[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_exponent_converges_in_one_iteration() {
        let k = ProductKernel::from_matrix(array![[3.0, 2.0], [2.0, 1.0]]);
        let map = ComposedMap::new(&k, array![0.3, 0.7], array![0.6, 0.4], 0.0).unwrap();
        let start = PositiveVector::new(array![0.3, 0.7]).unwrap();
        let image = map.apply_c(&start).unwrap().normalized().0;
        let fixed = fixed_point_iterate(&map, &image, 1e-12, 10).unwrap();
        assert_eq!(fixed.iterations, 1);
    }

    #[test]
    fn fixed_point_iteration_rejects_unit_exponent() {
        let k = ProductKernel::from_matrix(Array2::from_elem((2, 2), 0.5));
        let map = ComposedMap::classical(&k, array![0.5, 0.5], array![0.5, 0.5]).unwrap();
        assert!(fixed_point_iterate(&map, &PositiveVector::ones(2), 1e-10, 10).is_err());
    }

    #[test]
    fn eigen_rescale_examples() {
        let ones = PositiveVector::ones(2);
        let r = eigen_rescale(&ones, std::f64::consts::FRAC_1_SQRT_2, 1.0).unwrap();
        assert!(close(r.as_array(), &array![0.5, 0.5], 1e-15));
        assert_eq!(eigen_rescale(&ones, 1.0, 1.0).unwrap(), ones);
        let r = eigen_rescale(&ones, 2.0, 2.0).unwrap();
        assert!(close(r.as_array(), &array![8.0, 8.0], 1e-13));
        assert!(matches!(
            eigen_rescale(&ones, 0.0, 1.0),
            Err(BridgeError::Domain(_))
        ));
        assert!(matches!(
            eigen_rescale(&ones, -1.0, 1.0),
            Err(BridgeError::Domain(_))
        ));
    }

    #[test]
    fn eigen_rescale_produces_a_fixed_point() {
        // degree-p homogeneity: C(c ray) = c ray for c = lambda^(eta+1)
        let k = ProductKernel::from_matrix(array![[3.0, 2.0], [2.0, 1.0]]);
        for eta in [0.5, 1.0, 2.0, 7.0] {
            let p = eta / (eta + 1.0);
            let map = ComposedMap::new(&k, array![0.3, 0.7], array![0.6, 0.4], p).unwrap();
            let fixed = fixed_point_iterate(&map, &PositiveVector::ones(2), 1e-13, 1000).unwrap();
            let x = eigen_rescale(&fixed.ray, fixed.eigenvalue, eta).unwrap();
            let cx = map.apply_c(&x).unwrap();
            for i in 0..2 {
                assert!(
                    (cx[i] - x[i]).abs() < 1e-11 * x[i],
                    "eta {eta}: {cx:?} vs {x:?}"
                );
            }
        }
    }

    #[test]
    fn unpenalized_returns_prior() {
        let m = array![[0.2, 0.8], [0.6, 0.4]];
        let prior = PriorSchedule::time_invariant(m.clone(), 3, None).unwrap();
        let nu0 = array![0.9, 0.1];
        let sol = solve_relaxed_bridge(
            &prior,
            &nu0,
            &array![0.5, 0.5],
            0.0,
            SolveOptions::default(),
        )
        .unwrap();
        assert!(sol.policy.transitions.iter().all(|pi| pi == m));
        assert!(sol.potentials.phi.iter().all(|&v| v == 1.0));
        assert_eq!(sol.policy.marginal(1), m.t().dot(&nu0));
    }

    #[test]
    fn unpenalized_nonstochastic_prior_is_normalized() {
        let g = crate::graph::DirectedGraph::new(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let prior = crate::graph::adjacency_prior(&g, 2, None).unwrap();
        let sol = solve_relaxed_bridge(
            &prior,
            &array![0.5, 0.5],
            &array![0.5, 0.5],
            0.0,
            SolveOptions::default(),
        )
        .unwrap();
        for pi in &sol.policy.transitions {
            for row in pi.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
        // phi(N) = 1, phi(1) = A 1 = (2, 1): pi(0)_{00} = 1 * 2 / 3
        assert!((sol.policy.transitions[0][[0, 0]] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn propagate_symmetric_and_unpenalized() {
        let prior = symmetric_prior(1);
        let pot = propagate_potentials(&prior, &array![1.0, 1.0], &array![0.5, 0.5]).unwrap();
        assert_eq!(pot.phi_at(0), array![1.0, 1.0]);
        assert_eq!(pot.phi_hat_at(1), array![0.5, 0.5]);
    }

    #[test]
    fn propagate_rejects_zero_potential_under_mass() {
        let prior = PriorSchedule::time_invariant(array![[1.0, 0.0], [0.0, 1.0]], 1, None).unwrap();
        assert!(matches!(
            propagate_potentials(&prior, &array![0.0, 1.0], &array![0.5, 0.5]),
            Err(BridgeError::Degeneracy(_))
        ));
    }

    #[test]
    fn fibonacci_recursion_residuals() {
        let g = crate::graph::DirectedGraph::new(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let prior = crate::graph::adjacency_prior(&g, 2, None).unwrap();
        let (nu0, nu_n) = (array![0.4, 0.6], array![0.7, 0.3]);
        let sol = solve_relaxed_bridge(&prior, &nu0, &nu_n, 1.0, SolveOptions::default()).unwrap();
        let pot = &sol.potentials;
        // direct products: A^2 phi(2) and (A^T)^2 phi_hat(0)
        let a = g.adjacency();
        let phi0 = a.dot(&a.dot(&pot.phi_at(2)));
        let hat2 = a.t().dot(&a.t().dot(&pot.phi_hat_at(0)));
        assert!(close(&pot.phi_at(0), &phi0, 1e-10));
        assert!(close(&pot.phi_hat_at(2), &hat2, 1e-10));
        assert!(pot.residuals(&prior, &nu0, &nu_n, 1.0).max() < 1e-10);
    }

    #[test]
    fn delta_target_has_matching_support() {
        let prior = symmetric_prior(1);
        let (nu0, nu_n) = (array![1.0, 0.0], array![1.0, 0.0]);
        let sol = solve_relaxed_bridge(&prior, &nu0, &nu_n, 1.0, SolveOptions::default()).unwrap();
        assert_eq!(sol.policy.terminal_marginal()[1], 0.0);
        assert_eq!(sol.potentials.phi[[1, 1]], 0.0);
        assert!((sol.policy.transitions[0][[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_bridge_matches_target() {
        let k = array![[0.2, 0.5, 0.3], [0.1, 0.1, 0.8], [0.6, 0.3, 0.1]];
        let prior = PriorSchedule::time_invariant(k, 2, None).unwrap();
        let (nu0, nu_n) = (array![0.2, 0.5, 0.3], array![0.0, 1.0, 0.0]);
        let sol = solve_hard_bridge(&prior, &nu0, &nu_n, SolveOptions::default()).unwrap();
        let pn = sol.policy.terminal_marginal();
        assert!(close(&pn, &nu_n, 1e-10), "{pn}");
        assert_eq!(pn[0], 0.0);
        assert_eq!(pn[2], 0.0);
    }

    #[test]
    fn hard_bridge_agrees_with_symmetric_relaxed() {
        let nu = array![0.5, 0.5];
        let hard =
            solve_hard_bridge(&symmetric_prior(1), &nu, &nu, SolveOptions::default()).unwrap();
        let soft =
            solve_relaxed_bridge(&symmetric_prior(1), &nu, &nu, 1.0, SolveOptions::default())
                .unwrap();
        for (a, b) in hard.policy.transitions[0]
            .iter()
            .zip(soft.policy.transitions[0].iter())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn error_paths() {
        let prior = symmetric_prior(1);
        let nu = array![0.5, 0.5];
        assert!(matches!(
            solve_relaxed_bridge(&prior, &nu, &nu, -1.0, SolveOptions::default()),
            Err(BridgeError::Input(_))
        ));
        assert!(matches!(
            solve_relaxed_bridge(&prior, &array![0.7, 0.7], &nu, 1.0, SolveOptions::default()),
            Err(BridgeError::Input(_))
        ));
        // zero column in K with target mass there
        let blocked =
            PriorSchedule::time_invariant(array![[1.0, 0.0], [1.0, 0.0]], 1, None).unwrap();
        assert!(matches!(
            solve_relaxed_bridge(&blocked, &nu, &nu, 1.0, SolveOptions::default()),
            Err(BridgeError::Infeasible(_))
        ));
        // K = I with a delta marginal: relaxed mode needs positive marginals
        let eye = PriorSchedule::time_invariant(Array2::eye(2), 1, None).unwrap();
        assert!(matches!(
            solve_relaxed_bridge(&eye, &array![1.0, 0.0], &nu, 1.0, SolveOptions::default()),
            Err(BridgeError::Precondition(_))
        ));
        let slow = SolveOptions {
            tol: 1e-14,
            max_iter: 2,
        };
        let k = PriorSchedule::time_invariant(array![[0.9, 0.1], [0.2, 0.8]], 1, None).unwrap();
        match solve_relaxed_bridge(&k, &array![0.1, 0.9], &array![0.8, 0.2], 5.0, slow) {
            Err(BridgeError::Convergence {
                iterations,
                residuals,
                ..
            }) => {
                assert_eq!(iterations, 2);
                assert_eq!(residuals.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn relaxed_mode_with_positive_marginals() {
        // K = I has zeros but every row and column is positive
        let eye = PriorSchedule::time_invariant(Array2::eye(2), 1, None).unwrap();
        let sol = solve_relaxed_bridge(
            &eye,
            &array![0.3, 0.7],
            &array![0.5, 0.5],
            1.0,
            SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.report.positivity_mode, PositivityMode::Relaxed);
        assert!(close(
            &sol.policy.terminal_marginal(),
            &array![0.3, 0.7],
            1e-12
        ));
    }
}
