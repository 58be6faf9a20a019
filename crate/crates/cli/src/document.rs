//! Solution documents written by `solve` and read back by `evaluate`, `sample` and `robustness`.

use bridge_core::entropy::SupportViolation;
use bridge_core::{
    BridgeError, BridgeSolution, MarkovPathMeasure, Objective, PositivityMode, Result,
    RoutingPolicy, SolveReport,
};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::problem::{Problem, FORMAT_VERSION};
use crate::real::Real;

fn reals(v: impl IntoIterator<Item = f64>) -> Vec<Real> {
    v.into_iter().map(Real).collect()
}

fn rows<'a>(m: impl IntoIterator<Item = ndarray::ArrayView1<'a, f64>>) -> Vec<Vec<f64>> {
    m.into_iter().map(|r| r.to_vec()).collect()
}

fn real_rows(m: &Array2<f64>) -> Vec<Vec<Real>> {
    m.rows()
        .into_iter()
        .map(|r| reals(r.iter().copied()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub iterations: usize,
    pub final_residual: Real,
    pub residual_history: Vec<Real>,
    pub measured_contraction: Vec<Real>,
    pub guaranteed_bound: Real,
    pub birkhoff_ratio: Real,
    pub positivity_mode: PositivityMode,
    pub eigenvalue: Real,
    pub fixed_point_residual: Real,
    pub converged: bool,
}

impl From<&SolveReport> for ReportDoc {
    fn from(r: &SolveReport) -> Self {
        ReportDoc {
            iterations: r.iterations,
            final_residual: Real(r.final_residual),
            residual_history: reals(r.residual_history.iter().copied()),
            measured_contraction: reals(r.measured_contraction.iter().copied()),
            guaranteed_bound: Real(r.guaranteed_bound),
            birkhoff_ratio: Real(r.birkhoff_ratio),
            positivity_mode: r.positivity_mode,
            eigenvalue: Real(r.eigenvalue),
            fixed_point_residual: Real(r.fixed_point_residual),
            converged: r.converged,
        }
    }
}

/// A support violation with 1-based vertices and a `null` step for the initial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationDoc {
    pub step: Option<usize>,
    pub from: usize,
    pub to: usize,
}

impl From<&SupportViolation> for ViolationDoc {
    fn from(v: &SupportViolation) -> Self {
        ViolationDoc {
            step: v.step,
            from: v.from + 1,
            to: v.to + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveDoc {
    /// `divergence + eta * terminal`.
    pub total: Real,
    /// Path-measure divergence from the prior.
    pub divergence: Real,
    pub initial_divergence: Real,
    pub step_divergence: Vec<Real>,
    /// Unweighted terminal divergence from `nuN`.
    pub terminal_divergence: Real,
    pub eta: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<ViolationDoc>,
}

impl From<&Objective> for ObjectiveDoc {
    fn from(o: &Objective) -> Self {
        ObjectiveDoc {
            total: Real(o.total),
            divergence: Real(o.divergence.total),
            initial_divergence: Real(o.divergence.initial),
            step_divergence: reals(o.divergence.steps.iter().copied()),
            terminal_divergence: Real(o.terminal),
            eta: Real(o.eta),
            violation: o.divergence.violation.as_ref().map(ViolationDoc::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub format_version: u32,
    pub n: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub eta: Real,
    pub converged: bool,
    pub nu0: Vec<f64>,
    /// `(N+1) x n` flow table.
    pub marginals: Vec<Vec<f64>>,
    /// `N` row-stochastic matrices; rows of unvisited states are zero.
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub phi: Vec<Vec<Real>>,
    pub phi_hat: Vec<Vec<Real>>,
    pub report: ReportDoc,
    pub objective: ObjectiveDoc,
}

impl SolutionDocument {
    pub fn new(problem: &Problem, solution: &BridgeSolution, objective: &Objective) -> Self {
        let policy = &solution.policy;
        SolutionDocument {
            format_version: FORMAT_VERSION,
            n: policy.n(),
            horizon: policy.horizon(),
            eta: Real(problem.eta),
            converged: solution.report.converged,
            nu0: policy.source.to_vec(),
            marginals: rows(policy.marginals.rows()),
            transitions: policy.transitions.iter().map(|m| rows(m.rows())).collect(),
            phi: real_rows(&solution.potentials.phi),
            phi_hat: real_rows(&solution.potentials.phi_hat),
            report: ReportDoc::from(&solution.report),
            objective: ObjectiveDoc::from(objective),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SolutionDocument = serde_json::from_str(text)
            .map_err(|e| BridgeError::Input(format!("solution document: {e}")))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(BridgeError::Input(format!(
                "unsupported solution format_version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution documents always serialize")
    }

    /// Checks that the document fits the problem's state space and horizon.
    pub fn check_shape(&self, problem: &Problem) -> Result<()> {
        let (n, horizon) = (problem.prior.n(), problem.prior.horizon());
        if self.n != n || self.horizon != horizon {
            return Err(BridgeError::Input(format!(
                "policy is for n = {}, N = {} but the problem has n = {n}, N = {horizon}",
                self.n, self.horizon
            )));
        }
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if self.transitions.len() != horizon || !self.transitions.iter().all(square) {
            return Err(BridgeError::Input(format!(
                "policy must hold {horizon} transition matrices of size {n}x{n}"
            )));
        }
        if self.marginals.len() != horizon + 1 || self.marginals.iter().any(|r| r.len() != n) {
            return Err(BridgeError::Input(format!(
                "marginal table must be {}x{n}",
                horizon + 1
            )));
        }
        Ok(())
    }

    pub fn transition_matrices(&self) -> Vec<Array2<f64>> {
        self.transitions
            .iter()
            .map(|m| Array2::from_shape_fn((self.n, self.n), |(i, j)| m[i][j]))
            .collect()
    }

    /// The path measure started from the problem's `nu0`.
    pub fn path_measure(&self, problem: &Problem) -> Result<MarkovPathMeasure> {
        self.check_shape(problem)?;
        MarkovPathMeasure::new(problem.nu0.clone(), self.transition_matrices())
    }

    /// Rebuilds the routing policy; only converged documents are accepted.
    pub fn policy(&self, problem: &Problem) -> Result<RoutingPolicy> {
        if !self.converged {
            return Err(BridgeError::Input(
                "solution document is not converged".into(),
            ));
        }
        self.check_shape(problem)?;
        let marginals =
            Array2::from_shape_fn((self.horizon + 1, self.n), |(t, i)| self.marginals[t][i]);
        Ok(RoutingPolicy {
            transitions: self.transition_matrices(),
            marginals,
            source: Array1::from(self.nu0.clone()),
            inactive_states: Vec::new(),
            factorization_residual: 0.0,
        })
    }
}
