//! Batch front end for the routing solver: problem documents in, reports and JSON documents out.

pub mod commands;
pub mod document;
pub mod problem;
pub mod real;

use std::fs;
use std::path::{Path, PathBuf};

use bridge_core::{BridgeError, FailureModel, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::{Outcome, PolicySource};
use crate::document::SolutionDocument;
use crate::problem::{PriorKind, Problem, ProblemSpec};
use crate::real::{parse_real, Real};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 10_000;

/// Stable process exit status for each error class.
pub fn exit_code(err: &BridgeError) -> i32 {
    match err {
        BridgeError::Input(_)
        | BridgeError::Domain(_)
        | BridgeError::Precondition(_)
        | BridgeError::Resource(_) => EXIT_INPUT,
        BridgeError::Infeasible(_) | BridgeError::Degeneracy(_) => EXIT_INFEASIBLE,
        BridgeError::Convergence { .. } => EXIT_CONVERGENCE,
        BridgeError::Internal(_) => EXIT_INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bridge",
    version,
    about = "Maximum-entropy routing via relaxed bridges"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem document (JSON).
    pub problem: PathBuf,
    /// Terminal penalty weight; `inf` enforces the terminal marginal exactly.
    #[arg(long, value_parser = parse_real)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// adjacency, ruelle_bowen or custom.
    #[arg(long)]
    pub prior: Option<PriorKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the JSON document.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the relaxed bridge and print the flow table.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Score a policy against the problem's objective.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Solution document whose transitions are scored, or `prior`.
        #[arg(long)]
        policy: String,
    },
    /// Report positivity and contraction diagnostics.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Also run a solve and report the measured per-iteration contraction.
        #[arg(long)]
        probe: bool,
    },
    /// Draw paths from the optimal policy.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Use this solution document instead of solving.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        count: usize,
    },
    /// Estimate delivered mass under link failures.
    Robustness {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        /// Independent per-edge failure probability.
        #[arg(long = "fail-prob")]
        fail_prob: Option<f64>,
        /// Failed edge as `i,j` (1-based); repeatable.
        #[arg(long = "failed-edge", value_parser = parse_edge)]
        failed_edge: Vec<(usize, usize)>,
    },
}

fn parse_edge(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("{s:?} is not of the form i,j"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a == 0 || b == 0 {
        return Err("vertices are numbered from 1".into());
    }
    Ok((a, b))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| BridgeError::Input(format!("cannot read {}: {e}", path.display())))
}

impl Common {
    fn spec(&self) -> Result<ProblemSpec> {
        let mut spec = ProblemSpec::from_json(&read(&self.problem)?)?;
        if let Some(eta) = self.eta {
            spec.eta = Real(eta);
        }
        if let Some(tol) = self.tol {
            spec.tol = Some(tol);
        }
        if let Some(m) = self.max_iter {
            spec.max_iter = Some(m);
        }
        if let Some(p) = self.prior {
            spec.prior = p;
        }
        if let Some(s) = self.seed {
            spec.seed = Some(s);
        }
        Ok(spec)
    }

    fn problem(&self) -> Result<Problem> {
        self.spec()?.build()
    }
}

fn policy_for(problem: &Problem, solution: &Option<PathBuf>) -> Result<bridge_core::RoutingPolicy> {
    match solution {
        Some(path) => SolutionDocument::from_json(&read(path)?)?.policy(problem),
        None => Ok(commands::solve_problem(problem)?.0.policy),
    }
}

/// Runs a parsed command and writes `--output` if requested.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let (outcome, output) = match &cli.command {
        Command::Solve { common } => (commands::cmd_solve(&common.problem()?)?, &common.output),
        Command::Evaluate { common, policy } => {
            let problem = common.problem()?;
            let source = if policy == "prior" {
                PolicySource::Prior
            } else {
                PolicySource::Document(Box::new(SolutionDocument::from_json(&read(Path::new(
                    policy,
                ))?)?))
            };
            (commands::cmd_evaluate(&problem, &source)?, &common.output)
        }
        Command::Diagnose { common, probe } => (
            commands::cmd_diagnose(&common.problem()?, *probe)?,
            &common.output,
        ),
        Command::Sample {
            common,
            solution,
            count,
        } => {
            let problem = common.problem()?;
            let policy = policy_for(&problem, solution)?;
            (
                commands::cmd_sample(&policy, *count, problem.seed)?,
                &common.output,
            )
        }
        Command::Robustness {
            common,
            solution,
            trials,
            fail_prob,
            failed_edge,
        } => {
            let problem = common.problem()?;
            let model = match (fail_prob, failed_edge.is_empty()) {
                (Some(q), true) => FailureModel::Independent(*q),
                (None, false) => {
                    let n = problem.prior.n();
                    if let Some(&(i, j)) = failed_edge.iter().find(|&&(i, j)| i > n || j > n) {
                        return Err(BridgeError::Input(format!(
                            "failed edge ({i}, {j}) is outside 1..{n}"
                        )));
                    }
                    FailureModel::Explicit(
                        failed_edge.iter().map(|&(i, j)| (i - 1, j - 1)).collect(),
                    )
                }
                _ => {
                    return Err(BridgeError::Input(
                        "give either --fail-prob or at least one --failed-edge".into(),
                    ))
                }
            };
            model.validate()?;
            let policy = policy_for(&problem, solution)?;
            (
                commands::cmd_robustness(&policy, &model, *trials, problem.seed)?,
                &common.output,
            )
        }
    };
    if let Some(path) = output {
        fs::write(path, format!("{}\n", outcome.document))
            .map_err(|e| BridgeError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(outcome)
}
