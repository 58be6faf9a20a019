//! The five subcommands. Each returns the human-readable report and the JSON document.

use std::fmt::Write;

use bridge_core::{
    birkhoff_ratio, exact_delivered_fraction, objective_j, product_kernel, projective_diameter,
    robustness_trials, sample_policy, solve_relaxed_bridge, BridgeError, BridgeSolution,
    FailureModel, MarkovPathMeasure, Objective, PositivityMode, Result, RobustnessReport,
};
use log::info;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::document::{ObjectiveDoc, SolutionDocument};
use crate::problem::{Problem, FORMAT_VERSION};
use crate::real::Real;

/// Paths listed in the `sample` report.
pub const TOP_PATHS: usize = 5;

/// Text for stdout plus the document for `--output`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub document: String,
}

fn json<T: Serialize>(doc: &T) -> String {
    serde_json::to_string_pretty(doc).expect("documents always serialize")
}

fn eta_label(eta: f64) -> String {
    if eta.is_infinite() {
        "inf (hard terminal constraint)".into()
    } else {
        format!("{eta}")
    }
}

/// Matrix printed to 4 decimals with vertex columns `x1..xn`.
fn table(m: &Array2<f64>, corner: &str, label: impl Fn(usize) -> String) -> String {
    let mut out = format!("{corner:>4}");
    for j in 1..=m.ncols() {
        let _ = write!(out, " {:>8}", format!("x{j}"));
    }
    out.push('\n');
    for (i, row) in m.rows().into_iter().enumerate() {
        let _ = write!(out, "{:>4}", label(i));
        for v in row {
            let _ = write!(out, " {v:>8.4}");
        }
        out.push('\n');
    }
    out
}

/// Flow table with one row per time step.
pub fn marginal_table(m: &Array2<f64>) -> String {
    table(m, "t", |t| t.to_string())
}

/// Fixed-point number with 12 decimals; negative zero prints as zero.
fn fixed(v: f64) -> String {
    let s = format!("{v:.12}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn write_objective(out: &mut String, o: &Objective) {
    let _ = writeln!(out, "objective J          {}", fixed(o.total));
    let _ = writeln!(out, "  path divergence    {}", fixed(o.divergence.total));
    let _ = writeln!(out, "  terminal divergence {}", fixed(o.terminal));
    let _ = writeln!(out, "  initial term       {}", fixed(o.divergence.initial));
    for (k, s) in o.divergence.steps.iter().enumerate() {
        let _ = writeln!(out, "  step {k:<3}           {}", fixed(*s));
    }
    if let Some(v) = &o.divergence.violation {
        match v.step {
            Some(k) => {
                let _ = writeln!(
                    out,
                    "  support violation: edge ({}, {}) at step {k} is not allowed by the prior",
                    v.from + 1,
                    v.to + 1
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "  support violation: initial mass on vertex {} where the prior has none",
                    v.from + 1
                );
            }
        }
    }
}

fn prior_measure(problem: &Problem) -> MarkovPathMeasure {
    MarkovPathMeasure::from_prior(&problem.prior)
}

/// Runs the solver and scores its policy.
pub fn solve_problem(problem: &Problem) -> Result<(BridgeSolution, Objective)> {
    info!(
        "solving n = {}, N = {}, eta = {}",
        problem.prior.n(),
        problem.prior.horizon(),
        problem.eta
    );
    let solution = solve_relaxed_bridge(
        &problem.prior,
        &problem.nu0,
        &problem.nu_n,
        problem.eta,
        problem.options,
    )?;
    let objective = objective_j(
        &solution.policy.to_path_measure(),
        &prior_measure(problem),
        &problem.nu_n,
        problem.eta,
    )?;
    Ok((solution, objective))
}

pub fn cmd_solve(problem: &Problem) -> Result<Outcome> {
    let (solution, objective) = solve_problem(problem)?;
    let r = &solution.report;
    let mut text = String::new();
    let _ = writeln!(text, "eta                  {}", eta_label(problem.eta));
    let _ = writeln!(text, "positivity mode      {}", r.positivity_mode);
    let _ = writeln!(
        text,
        "converged            {} after {} iterations",
        r.converged, r.iterations
    );
    let _ = writeln!(text, "final residual       {:.3e}", r.final_residual);
    let _ = writeln!(text, "fixed-point residual {:.3e}", r.fixed_point_residual);
    write_objective(&mut text, &objective);
    text.push_str("\nmarginal flow\n");
    text.push_str(&marginal_table(&solution.policy.marginals));
    for (t, pi) in solution.policy.transitions.iter().enumerate() {
        let _ = writeln!(text, "\ntransition matrix t = {t}");
        text.push_str(&table(pi, "", |i| format!("x{}", i + 1)));
    }
    for &(t, i) in &solution.policy.inactive_states {
        let _ = writeln!(text, "note: vertex {} carries no mass at t = {t}", i + 1);
    }
    let doc = SolutionDocument::new(problem, &solution, &objective);
    Ok(Outcome {
        text,
        document: doc.to_json(),
    })
}

/// Which policy `evaluate` scores.
pub enum PolicySource {
    Document(Box<SolutionDocument>),
    /// The prior kernels, row-normalized, started from `nu0`.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub format_version: u32,
    pub objective: ObjectiveDoc,
}

pub fn cmd_evaluate(problem: &Problem, source: &PolicySource) -> Result<Outcome> {
    let law = match source {
        PolicySource::Document(doc) => doc.path_measure(problem)?,
        PolicySource::Prior => {
            MarkovPathMeasure::prior_as_policy(&problem.prior, problem.nu0.clone())?
        }
    };
    let objective = objective_j(&law, &prior_measure(problem), &problem.nu_n, problem.eta)?;
    let mut text = String::new();
    let _ = writeln!(text, "eta                  {}", eta_label(problem.eta));
    write_objective(&mut text, &objective);
    let doc = EvaluationDocument {
        format_version: FORMAT_VERSION,
        objective: ObjectiveDoc::from(&objective),
    };
    Ok(Outcome {
        text,
        document: json(&doc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDoc {
    pub iterations: usize,
    pub residual_history: Vec<Real>,
    pub measured_contraction: Vec<Real>,
    pub max_contraction: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDocument {
    pub format_version: u32,
    pub strongly_connected: bool,
    pub aperiodic: bool,
    /// `null` when the product kernel has an empty row or column.
    pub positivity_mode: Option<PositivityMode>,
    pub projective_diameter: Real,
    pub birkhoff_ratio: Real,
    pub guaranteed_bound: Real,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeDoc>,
}

fn probe(problem: &Problem) -> ProbeDoc {
    let (iterations, residuals, ratios, error) = match solve_relaxed_bridge(
        &problem.prior,
        &problem.nu0,
        &problem.nu_n,
        problem.eta,
        problem.options,
    ) {
        Ok(s) => (
            s.report.iterations,
            s.report.residual_history,
            s.report.measured_contraction,
            None,
        ),
        Err(BridgeError::Convergence {
            iterations,
            residuals,
            ..
        }) => {
            let ratios = residuals
                .windows(2)
                .filter(|w| w[0] > 0.0)
                .map(|w| w[1] / w[0])
                .collect();
            (
                iterations,
                residuals,
                ratios,
                Some("did not converge".to_string()),
            )
        }
        Err(e) => (0, Vec::new(), Vec::new(), Some(e.to_string())),
    };
    let max = ratios
        .iter()
        .copied()
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    ProbeDoc {
        iterations,
        residual_history: residuals.into_iter().map(Real).collect(),
        measured_contraction: ratios.into_iter().map(Real).collect(),
        max_contraction: max.map(Real),
        error,
    }
}

pub fn cmd_diagnose(problem: &Problem, with_probe: bool) -> Result<Outcome> {
    let kernel = product_kernel(&problem.prior);
    let mode = kernel.mode();
    let diameter = projective_diameter(&kernel.matrix);
    let ratio = birkhoff_ratio(&kernel.matrix);
    let bound = if problem.eta.is_infinite() {
        1.0
    } else {
        problem.eta / (problem.eta + 1.0)
    };
    let mut warnings = Vec::new();
    match mode {
        None => warnings.push(
            "product kernel has an empty row or column; the problem may be infeasible".into(),
        ),
        Some(PositivityMode::Relaxed) => warnings.push(
            "product kernel has zero entries; Birkhoff ratio is 1 and only the exponent bound applies"
                .into(),
        ),
        Some(PositivityMode::Strict) => {}
    }
    let doc = DiagnosticsDocument {
        format_version: FORMAT_VERSION,
        strongly_connected: problem.graph.is_strongly_connected(),
        aperiodic: problem.graph.is_aperiodic(),
        positivity_mode: mode,
        projective_diameter: Real(diameter),
        birkhoff_ratio: Real(ratio),
        guaranteed_bound: Real(bound),
        warnings,
        probe: with_probe.then(|| probe(problem)),
    };
    let mut text = String::new();
    let _ = writeln!(text, "strongly connected   {}", doc.strongly_connected);
    let _ = writeln!(text, "aperiodic            {}", doc.aperiodic);
    let _ = writeln!(
        text,
        "positivity mode      {}",
        mode.map_or("none".to_string(), |m| m.to_string())
    );
    let _ = writeln!(text, "projective diameter  {diameter:.6}");
    let _ = writeln!(text, "birkhoff ratio       {ratio:.6}");
    let _ = writeln!(text, "guaranteed bound     {bound:.6}");
    for w in &doc.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    if let Some(p) = &doc.probe {
        let _ = writeln!(text, "probe iterations     {}", p.iterations);
        for (k, (res, c)) in p
            .residual_history
            .iter()
            .zip(std::iter::once(None).chain(p.measured_contraction.iter().map(Some)))
            .enumerate()
        {
            match c {
                Some(c) => {
                    let _ = writeln!(
                        text,
                        "  {k:>3}  residual {:.3e}  ratio {:.4}",
                        res.get(),
                        c.get()
                    );
                }
                None => {
                    let _ = writeln!(text, "  {k:>3}  residual {:.3e}", res.get());
                }
            }
        }
        if let Some(m) = p.max_contraction {
            let _ = writeln!(text, "max measured ratio   {:.6}", m.get());
        }
        if let Some(e) = &p.error {
            let _ = writeln!(text, "probe error: {e}");
        }
    }
    Ok(Outcome {
        text,
        document: json(&doc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDocument {
    pub format_version: u32,
    pub count: usize,
    pub seed: u64,
    pub empirical_marginals: Vec<Vec<f64>>,
    pub path_entropy: f64,
    pub distinct_paths: usize,
    pub top_paths: Vec<bridge_core::sampling::PathCount>,
}

pub fn cmd_sample(policy: &bridge_core::RoutingPolicy, count: usize, seed: u64) -> Result<Outcome> {
    let s = sample_policy(policy, count, seed, TOP_PATHS)?;
    let mut text = String::new();
    let _ = writeln!(text, "samples              {count} (seed {seed})");
    let _ = writeln!(text, "distinct paths       {}", s.distinct_paths);
    let _ = writeln!(text, "path entropy         {:.6} nats", s.path_entropy);
    text.push_str("\nempirical flow\n");
    text.push_str(&marginal_table(&s.empirical_marginals));
    text.push_str("\nmost frequent paths\n");
    for p in &s.top_paths {
        let path: Vec<String> = p.path.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            text,
            "  {:>8}  {:.4}  {}",
            p.count,
            p.count as f64 / count as f64,
            path.join(" -> ")
        );
    }
    let doc = SampleDocument {
        format_version: FORMAT_VERSION,
        count,
        seed,
        empirical_marginals: s
            .empirical_marginals
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        path_entropy: s.path_entropy,
        distinct_paths: s.distinct_paths,
        top_paths: s.top_paths,
    };
    Ok(Outcome {
        text,
        document: json(&doc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessDocument {
    pub format_version: u32,
    /// `"independent"` or `"explicit"`.
    pub failure_model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_prob: Option<f64>,
    /// 1-based failed edges for the explicit model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_edges: Vec<[usize; 2]>,
    pub report: RobustnessReport,
    /// Exact delivered fraction, available for the explicit model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_delivered_fraction: Option<f64>,
}

pub fn cmd_robustness(
    policy: &bridge_core::RoutingPolicy,
    model: &FailureModel,
    trials: usize,
    seed: u64,
) -> Result<Outcome> {
    let report = robustness_trials(policy, model, trials, seed)?;
    let (name, q, failed, exact) = match model {
        FailureModel::Independent(q) => ("independent", Some(*q), Vec::new(), None),
        FailureModel::Explicit(edges) => (
            "explicit",
            None,
            edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            Some(exact_delivered_fraction(policy, edges)),
        ),
    };
    let mut text = String::new();
    let _ = writeln!(text, "trials               {trials} (seed {seed})");
    match q {
        Some(q) => {
            let _ = writeln!(text, "failure model        independent, q = {q}");
        }
        None => {
            let list: Vec<String> = failed
                .iter()
                .map(|e: &[usize; 2]| format!("({}, {})", e[0], e[1]))
                .collect();
            let _ = writeln!(text, "failure model        explicit: {}", list.join(" "));
        }
    }
    let _ = writeln!(
        text,
        "delivered fraction   {:.4} +/- {:.4}",
        report.delivered_fraction, report.delivered_half_width
    );
    if let Some(x) = exact {
        let _ = writeln!(text, "exact fraction       {x:.6}");
    }
    let _ = writeln!(
        text,
        "path diversity       {:.4} +/- {:.4} nats",
        report.path_diversity, report.diversity_half_width
    );
    let doc = RobustnessDocument {
        format_version: FORMAT_VERSION,
        failure_model: name.into(),
        fail_prob: q,
        failed_edges: failed,
        report,
        exact_delivered_fraction: exact,
    };
    Ok(Outcome {
        text,
        document: json(&doc),
    })
}
