//! Random problem instances for tests, benchmarks and acceptance runs.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, RngExt};

use crate::error::Result;
use crate::graph::{DirectedGraph, PriorSchedule};

/// Strongly connected, aperiodic graph: a random Hamiltonian cycle, one self-loop, and
/// each remaining pair added with probability `density`.
pub fn random_graph<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> DirectedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut adjacency = vec![vec![false; n]; n];
    for k in 0..n {
        adjacency[order[k]][order[(k + 1) % n]] = true;
    }
    let looped = rng.random_range(0..n);
    adjacency[looped][looped] = true;
    for row in adjacency.iter_mut() {
        for cell in row.iter_mut() {
            if !*cell && rng.random::<f64>() < density {
                *cell = true;
            }
        }
    }
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| adjacency[i][j])
        .collect();
    DirectedGraph::new(n, &edges).expect("generated edges are in range and distinct")
}

/// Probability vector with entries bounded away from zero.
pub fn random_probability<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array1<f64> {
    let w = Array1::from_shape_fn(n, |_| 0.05 + rng.random::<f64>());
    let total = w.sum();
    w / total
}

/// Time-varying positive weights on the graph's edges, scaled into `(0.1, 2.1)`.
pub fn random_prior<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    horizon: usize,
    rng: &mut R,
) -> Result<PriorSchedule> {
    let n = graph.n();
    let kernels = (0..horizon)
        .map(|_| {
            Array2::from_shape_fn((n, n), |(i, j)| {
                if graph.has_edge(i, j) {
                    0.1 + 2.0 * rng.random::<f64>()
                } else {
                    0.0
                }
            })
        })
        .collect();
    let mu0 = Array1::from_shape_fn(n, |_| 0.5 + rng.random::<f64>());
    PriorSchedule::custom(graph, kernels, Some(mu0))
}
