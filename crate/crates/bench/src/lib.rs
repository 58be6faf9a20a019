//! Instance generators shared by the benchmarks.

use bridge_core::{adjacency_prior, DirectedGraph, PriorSchedule};
use ndarray::Array1;

/// Ring of `n` vertices with self-loops and chords to `i + 2`, so the product kernel is
/// positive for modest horizons.
pub fn ring_instance(n: usize, horizon: usize) -> (PriorSchedule, Array1<f64>, Array1<f64>) {
    let mut edges = Vec::with_capacity(3 * n);
    for i in 0..n {
        edges.push((i, i));
        edges.push((i, (i + 1) % n));
        if n > 2 {
            edges.push((i, (i + 2) % n));
        }
    }
    let graph = DirectedGraph::new(n, &edges).expect("ring is a valid graph");
    let prior = adjacency_prior(&graph, horizon, None).expect("adjacency prior");
    let weights = |shift: f64| {
        let w = Array1::from_shape_fn(n, |i| 1.0 + ((i as f64 + shift) * 0.7).sin().abs());
        let total = w.sum();
        w / total
    };
    (prior, weights(0.0), weights(3.0))
}
