//! Problem documents: graph, prior, marginals and solver settings as JSON.

use std::fmt;

use bridge_core::graph::PERRON_TOL;
use bridge_core::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use bridge_core::{
    adjacency_prior, ruelle_bowen_prior, BridgeError, DirectedGraph, PriorSchedule, Result,
    SolveOptions,
};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::real::Real;

pub const FORMAT_VERSION: u32 = 1;
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    #[default]
    Adjacency,
    RuelleBowen,
    Custom,
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Adjacency => "adjacency",
            PriorKind::RuelleBowen => "ruelle_bowen",
            PriorKind::Custom => "custom",
        })
    }
}

impl std::str::FromStr for PriorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adjacency" => Ok(PriorKind::Adjacency),
            "ruelle_bowen" => Ok(PriorKind::RuelleBowen),
            "custom" => Ok(PriorKind::Custom),
            other => Err(format!(
                "unknown prior {other:?}; expected adjacency, ruelle_bowen or custom"
            )),
        }
    }
}

fn default_eta() -> Real {
    Real(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub format_version: u32,
    pub n: usize,
    /// 1-based `[from, to]` pairs.
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub prior: PriorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<Vec<f64>>,
    pub nu0: Vec<f64>,
    #[serde(rename = "nuN")]
    pub nu_n: Vec<f64>,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(default = "default_eta")]
    pub eta: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A validated problem ready for the solver.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: DirectedGraph,
    pub prior: PriorSchedule,
    pub nu0: Array1<f64>,
    pub nu_n: Array1<f64>,
    pub eta: f64,
    pub options: SolveOptions,
    pub seed: u64,
}

fn check_marginal(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(BridgeError::Input(format!(
            "{name} has {} entries but n = {n}",
            v.len()
        )));
    }
    if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(BridgeError::Input(format!(
            "{name}[{}] = {} is not a nonnegative number",
            i + 1,
            v[i]
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > MARGINAL_TOL {
        return Err(BridgeError::Input(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<Array2<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(BridgeError::Input(format!("{what} is not {n}x{n}")));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text)
            .map_err(|e| BridgeError::Input(format!("problem document: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem documents always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(BridgeError::Input(format!(
                "unsupported format_version {}; this build reads {FORMAT_VERSION}",
                self.format_version
            )));
        }
        if self.n == 0 {
            return Err(BridgeError::Input("n must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(BridgeError::Input("N must be at least 1".into()));
        }
        let eta = self.eta.get();
        if eta.is_nan() || eta < 0.0 {
            return Err(BridgeError::Input(format!(
                "eta = {} must be nonnegative",
                self.eta
            )));
        }
        check_marginal("nu0", &self.nu0, self.n)?;
        check_marginal("nuN", &self.nu_n, self.n)?;
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(BridgeError::Input(format!("tol = {tol} must be positive")));
            }
        }
        if self.max_iter == Some(0) {
            return Err(BridgeError::Input("max_iter must be positive".into()));
        }
        match (&self.prior, &self.kernels) {
            (PriorKind::Custom, None) => Err(BridgeError::Input(
                "prior \"custom\" needs a kernels field".into(),
            )),
            (PriorKind::Custom, Some(k)) if k.len() != self.horizon => Err(BridgeError::Input(
                format!("{} kernels given for N = {}", k.len(), self.horizon),
            )),
            (PriorKind::Adjacency | PriorKind::RuelleBowen, Some(_)) => {
                Err(BridgeError::Input(format!(
                    "kernels are only read with prior \"custom\", not {:?}",
                    self.prior.to_string()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = DirectedGraph::from_one_based(self.n, &edges)?;
        let mu0 = self.mu0.as_ref().map(|m| Array1::from(m.clone()));
        let prior = match self.prior {
            PriorKind::Adjacency => adjacency_prior(&graph, self.horizon, mu0)?,
            PriorKind::RuelleBowen => ruelle_bowen_prior(&graph, self.horizon, mu0, PERRON_TOL)?,
            PriorKind::Custom => {
                let kernels = self
                    .kernels
                    .as_ref()
                    .expect("validated")
                    .iter()
                    .enumerate()
                    .map(|(t, k)| matrix(k, self.n, &format!("kernels[{t}]")))
                    .collect::<Result<Vec<_>>>()?;
                PriorSchedule::custom(&graph, kernels, mu0)?
            }
        };
        Ok(Problem {
            graph,
            prior,
            nu0: Array1::from(self.nu0.clone()),
            nu_n: Array1::from(self.nu_n.clone()),
            eta: self.eta.get(),
            options: SolveOptions {
                tol: self.tol.unwrap_or(DEFAULT_TOL),
                max_iter: self.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            },
            seed: self.seed.unwrap_or(0),
        })
    }
}
