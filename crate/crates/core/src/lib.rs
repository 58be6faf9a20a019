//! Maximum-entropy routing on directed graphs via relaxed Schrödinger bridges.
//!
//! The solver finds the path measure closest in relative entropy to a prior
//! random walk whose initial marginal is fixed and whose terminal marginal is
//! pulled toward a target by a weighted divergence penalty. It iterates a map
//! that contracts Hilbert's projective metric, then assembles a time-varying
//! Markov routing policy from the resulting potentials.

pub mod entropy;
pub mod error;
pub mod graph;
pub mod hilbert;
pub mod instances;
pub mod oracle;
pub mod sampling;
pub mod solver;

pub use entropy::{
    objective_j, path_measure_divergence, relative_entropy, MarkovPathMeasure, Objective,
};
pub use error::{BridgeError, Result};
pub use graph::{
    adjacency_prior, enumerate_feasible_paths, product_kernel, ruelle_bowen_prior, DirectedGraph,
    PositivityMode, PriorSchedule, ProductKernel,
};
pub use hilbert::{
    birkhoff_ratio, hilbert_distance, projective_diameter, thompson_distance, ComposedMap,
    PositiveVector,
};
pub use sampling::{
    exact_delivered_fraction, robustness_trials, sample_policy, FailureModel, RobustnessReport,
    SampleSummary,
};
pub use solver::{
    assemble_policy, eigen_rescale, fixed_point_iterate, propagate_potentials, solve_hard_bridge,
    solve_relaxed_bridge, BridgeSolution, PotentialSchedules, RoutingPolicy, SolveOptions,
    SolveReport,
};
