use bridge_core::entropy::relative_entropy;
use bridge_core::graph::count_feasible_paths;
use bridge_core::hilbert::apply_r;
use bridge_core::instances::{random_graph, random_prior};
use bridge_core::{
    birkhoff_ratio, hilbert_distance, product_kernel, ruelle_bowen_prior, thompson_distance,
    DirectedGraph, PositiveVector,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn positive(n: usize) -> impl Strategy<Value = PositiveVector> {
    prop::collection::vec(-6.0f64..6.0, n)
        .prop_map(|v| PositiveVector::new(Array1::from(v).mapv(f64::exp)).unwrap())
}

fn triple() -> impl Strategy<Value = (PositiveVector, PositiveVector, PositiveVector)> {
    (1usize..7).prop_flat_map(|n| (positive(n), positive(n), positive(n)))
}

fn probability(n: usize) -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
        let a = Array1::from(v) + 1e-3;
        let s = a.sum();
        a / s
    })
}

fn graph_strategy() -> impl Strategy<Value = DirectedGraph> {
    (1usize..6, prop::collection::vec(any::<bool>(), 25)).prop_filter_map(
        "at least one edge",
        |(n, bits)| {
            let edges: Vec<(usize, usize)> = (0..n * n)
                .filter(|&k| bits[k])
                .map(|k| (k / n, k % n))
                .collect();
            DirectedGraph::new(n, &edges).ok()
        },
    )
}

proptest! {
    #[test]
    fn hilbert_ignores_scaling((x, y, _) in triple(), a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let d = hilbert_distance(&x, &y).unwrap();
        let scaled = hilbert_distance(&x.scaled(a).unwrap(), &y.scaled(b).unwrap()).unwrap();
        prop_assert!((d - scaled).abs() <= 1e-12 * d.max(1.0));
    }

    #[test]
    fn metrics_are_symmetric_and_satisfy_triangle((x, y, z) in triple()) {
        for dist in [hilbert_distance, thompson_distance] {
            let xy = dist(&x, &y).unwrap();
            prop_assert!(xy >= 0.0);
            prop_assert!((xy - dist(&y, &x).unwrap()).abs() <= 1e-12 * xy.max(1.0));
            let via = dist(&x, &z).unwrap() + dist(&z, &y).unwrap();
            prop_assert!(xy <= via + 1e-12 * via.max(1.0));
        }
        prop_assert!(hilbert_distance(&x, &y).unwrap() <= 2.0 * thompson_distance(&x, &y).unwrap() + 1e-12);
    }

    #[test]
    fn power_map_scales_distance((x, y, _) in triple(), p in 0.0f64..=1.0) {
        let rx = PositiveVector::new(apply_r(x.as_array(), p).unwrap()).unwrap();
        let ry = PositiveVector::new(apply_r(y.as_array(), p).unwrap()).unwrap();
        let d = hilbert_distance(&x, &y).unwrap();
        prop_assert!((hilbert_distance(&rx, &ry).unwrap() - p * d).abs() <= 1e-12 * d.max(1.0));
    }

    #[test]
    fn positive_matrices_contract_by_birkhoff_ratio(
        entries in prop::collection::vec(0.05f64..5.0, 16),
        x in positive(4),
        y in positive(4),
    ) {
        let k = Array2::from_shape_vec((4, 4), entries).unwrap();
        let kx = PositiveVector::new(k.dot(x.as_array())).unwrap();
        let ky = PositiveVector::new(k.dot(y.as_array())).unwrap();
        let ratio = birkhoff_ratio(&k);
        prop_assert!(ratio < 1.0);
        let before = hilbert_distance(&x, &y).unwrap();
        prop_assert!(hilbert_distance(&kx, &ky).unwrap() <= ratio * before + 1e-12 * before.max(1.0));
    }

    #[test]
    fn relative_entropy_is_nonnegative(p in probability(5), q in probability(5)) {
        let d = relative_entropy(&p, &q).unwrap();
        prop_assert!(d >= -1e-15);
        prop_assert!(relative_entropy(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_is_jointly_convex(
        p1 in probability(4), q1 in probability(4),
        p2 in probability(4), q2 in probability(4),
        w in 0.0f64..=1.0,
    ) {
        let p = &p1 * w + &p2 * (1.0 - w);
        let q = &q1 * w + &q2 * (1.0 - w);
        let mixed = relative_entropy(&p, &q).unwrap();
        let chord = w * relative_entropy(&p1, &q1).unwrap() + (1.0 - w) * relative_entropy(&p2, &q2).unwrap();
        prop_assert!(mixed <= chord + 1e-12);
    }

    #[test]
    fn path_counts_match_adjacency_powers(g in graph_strategy(), horizon in 1usize..=6) {
        let a = g.adjacency();
        let power = (1..horizon).fold(a.clone(), |acc, _| acc.dot(a));
        for i in 0..g.n() {
            let row: f64 = power.row(i).sum();
            prop_assert_eq!(count_feasible_paths(&g, horizon, Some(i)), row);
        }
    }

    #[test]
    fn product_kernel_matches_backward_recursion(seed in any::<u64>(), n in 2usize..6, horizon in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.3, &mut rng);
        let prior = random_prior(&g, horizon, &mut rng).unwrap();
        let k = product_kernel(&prior).matrix;
        let x = Array1::from_shape_fn(n, |i| 1.0 + i as f64);
        let y = Array1::from_shape_fn(n, |i| 2.0 / (1.0 + i as f64));
        let mut back = x.clone();
        for t in (0..horizon).rev() {
            back = prior.kernel(t).dot(&back);
        }
        let direct = k.dot(&x);
        for (a, b) in back.iter().zip(direct.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let lhs = direct.dot(&y);
        let rhs = x.dot(&k.t().dot(&y));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn ruelle_bowen_rows_are_stochastic(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.4, &mut rng);
        let prior = ruelle_bowen_prior(&g, 2, None, 1e-12).unwrap();
        let m = prior.kernel(0);
        for i in 0..n {
            prop_assert!((m.row(i).sum() - 1.0).abs() < 1e-12);
            for j in 0..n {
                prop_assert_eq!(m[[i, j]] > 0.0, g.has_edge(i, j));
            }
        }
    }

    #[test]
    fn positivity_persists_with_horizon(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.2, &mut rng);
        let a = g.adjacency();
        let mut power = a.clone();
        let mut seen_positive = false;
        for _ in 0..(n * n + 2) {
            let positive = power.iter().all(|&v| v > 0.0);
            prop_assert!(!seen_positive || positive);
            seen_positive |= positive;
            power = power.dot(a).mapv(|v: f64| v.min(1.0));
        }
        prop_assert!(seen_positive);
    }
}
