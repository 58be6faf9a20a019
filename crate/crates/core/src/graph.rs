//! Directed graphs, prior kernels and feasible paths.
//!
//! Vertices are 0-based inside the library. The JSON problem format is
//! 1-based and converts through [`DirectedGraph::from_one_based`].

use std::collections::VecDeque;

use ndarray::{Array1, Array2};

use crate::error::{BridgeError, Result};

/// Tolerance on successive Perron iterates.
pub const PERRON_TOL: f64 = 1e-12;
/// Iteration cap for the Perron power iteration.
pub const PERRON_MAX_ITER: usize = 100_000;
/// Default cap on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Array2<f64>,
    strongly_connected: bool,
    aperiodic: bool,
}

impl DirectedGraph {
    /// Builds a graph on vertices `0..n`. Edges are kept in lexicographic order.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(BridgeError::Input(
                "graph must have at least one vertex".into(),
            ));
        }
        if edges.is_empty() {
            return Err(BridgeError::Input("edge set is empty".into()));
        }
        let mut adjacency = Array2::<f64>::zeros((n, n));
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(BridgeError::Input(format!(
                    "edge ({}, {}) references a vertex outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
            if adjacency[[i, j]] != 0.0 {
                return Err(BridgeError::Input(format!(
                    "duplicate edge ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            adjacency[[i, j]] = 1.0;
        }
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();

        let successors = successor_lists(n, &sorted);
        let reach = reachability(n, &successors);
        let strongly_connected = reach.iter().all(|row| row.iter().all(|&r| r));
        let aperiodic = cycle_gcd(n, &successors, &reach) == Some(1);

        Ok(Self {
            n,
            edges: sorted,
            adjacency,
            strongly_connected,
            aperiodic,
        })
    }

    /// Builds a graph from 1-based edge endpoints.
    pub fn from_one_based(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let shifted = edges
            .iter()
            .map(|&(i, j)| {
                if i == 0 || j == 0 {
                    Err(BridgeError::Input(format!(
                        "edge ({i}, {j}) references vertex 0; vertices are numbered from 1"
                    )))
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, &shifted)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.adjacency[[i, j]] != 0.0
    }

    /// 0/1 adjacency matrix.
    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected
    }

    /// True when the gcd of all cycle lengths is 1.
    pub fn is_aperiodic(&self) -> bool {
        self.aperiodic
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        successor_lists(self.n, &self.edges)
    }
}

fn successor_lists(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut succ = vec![Vec::new(); n];
    for &(i, j) in edges {
        succ[i].push(j);
    }
    succ
}

fn bfs_levels(start: usize, successors: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut level = vec![None; successors.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let next = level[u].map(|l| l + 1);
        for &v in &successors[u] {
            if level[v].is_none() {
                level[v] = next;
                queue.push_back(v);
            }
        }
    }
    level
}

// reach[i][j]: j reachable from i by a path of length >= 0
fn reachability(n: usize, successors: &[Vec<usize>]) -> Vec<Vec<bool>> {
    (0..n)
        .map(|s| {
            bfs_levels(s, successors)
                .iter()
                .map(Option::is_some)
                .collect()
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// gcd of all cycle lengths, None for an acyclic graph. Within one strongly
// connected component the period is the gcd of level[u] + 1 - level[v] over
// its internal edges, for BFS levels from any root of the component.
fn cycle_gcd(n: usize, successors: &[Vec<usize>], reach: &[Vec<bool>]) -> Option<usize> {
    let mut component = vec![usize::MAX; n];
    let mut overall = 0usize;
    for root in 0..n {
        if component[root] != usize::MAX {
            continue;
        }
        for v in 0..n {
            if reach[root][v] && reach[v][root] {
                component[v] = root;
            }
        }
        let levels = bfs_levels(root, successors);
        for u in (0..n).filter(|&u| component[u] == root) {
            for &v in &successors[u] {
                if component[v] != root {
                    continue;
                }
                let (lu, lv) = (levels[u].unwrap_or(0), levels[v].unwrap_or(0));
                overall = gcd(overall, (lu + 1).abs_diff(lv));
            }
        }
    }
    (overall > 0).then_some(overall)
}

/// Time-indexed nonnegative kernels `M(0..N-1)` with a positive initial reference measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSchedule {
    kernels: Vec<Array2<f64>>,
    mu0: Array1<f64>,
}

impl PriorSchedule {
    /// Validates kernels against the graph topology. `mu0` defaults to the uniform probability vector.
    pub fn custom(
        graph: &DirectedGraph,
        kernels: Vec<Array2<f64>>,
        mu0: Option<Array1<f64>>,
    ) -> Result<Self> {
        let prior = Self::from_kernels(kernels, mu0)?;
        if prior.n() != graph.n() {
            return Err(BridgeError::Input(format!(
                "kernels are {}x{} but the graph has {} vertices",
                prior.n(),
                prior.n(),
                graph.n()
            )));
        }
        for (t, m) in prior.kernels.iter().enumerate() {
            for ((i, j), &v) in m.indexed_iter() {
                if v != 0.0 && !graph.has_edge(i, j) {
                    return Err(BridgeError::Input(format!(
                        "kernel {t} has weight {v} on ({}, {}), which is not an edge",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(prior)
    }

    /// Validates shape and sign only; the topology is the kernels' support.
    pub fn from_kernels(kernels: Vec<Array2<f64>>, mu0: Option<Array1<f64>>) -> Result<Self> {
        let Some(first) = kernels.first() else {
            return Err(BridgeError::Input("horizon must be at least 1".into()));
        };
        let n = first.nrows();
        if n == 0 {
            return Err(BridgeError::Input("kernels must be non-empty".into()));
        }
        for (t, m) in kernels.iter().enumerate() {
            if m.dim() != (n, n) {
                return Err(BridgeError::Input(format!(
                    "kernel {t} has shape {:?}, expected ({n}, {n})",
                    m.dim()
                )));
            }
            if let Some(((i, j), v)) = m
                .indexed_iter()
                .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
            {
                return Err(BridgeError::Input(format!(
                    "kernel {t} entry ({}, {}) = {v} is not a finite nonnegative number",
                    i + 1,
                    j + 1
                )));
            }
        }
        let mu0 = match mu0 {
            Some(mu) => {
                if mu.len() != n {
                    return Err(BridgeError::Input(format!(
                        "mu0 has length {}, expected {n}",
                        mu.len()
                    )));
                }
                if let Some((i, v)) = mu
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(v.is_finite() && **v > 0.0))
                {
                    return Err(BridgeError::Input(format!(
                        "mu0({}) = {v} must be strictly positive",
                        i + 1
                    )));
                }
                mu
            }
            None => Array1::from_elem(n, 1.0 / n as f64),
        };
        Ok(Self { kernels, mu0 })
    }

    /// Repeats one kernel over the horizon.
    pub fn time_invariant(
        kernel: Array2<f64>,
        horizon: usize,
        mu0: Option<Array1<f64>>,
    ) -> Result<Self> {
        Self::from_kernels(vec![kernel; horizon], mu0)
    }

    pub fn n(&self) -> usize {
        self.mu0.len()
    }

    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernels(&self) -> &[Array2<f64>] {
        &self.kernels
    }

    pub fn kernel(&self, t: usize) -> &Array2<f64> {
        &self.kernels[t]
    }

    pub fn mu0(&self) -> &Array1<f64> {
        &self.mu0
    }

    /// True when every kernel row sums to 1 within `tol`.
    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.kernels
            .iter()
            .all(|m| m.rows().into_iter().all(|r| (r.sum() - 1.0).abs() <= tol))
    }
}

/// Every `M(t)` is the 0/1 adjacency matrix.
pub fn adjacency_prior(
    graph: &DirectedGraph,
    horizon: usize,
    mu0: Option<Array1<f64>>,
) -> Result<PriorSchedule> {
    PriorSchedule::custom(graph, vec![graph.adjacency().clone(); horizon], mu0)
}

/// Perron eigenpair of a nonnegative irreducible matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub eigenvalue: f64,
    /// Unit 1-norm, strictly positive.
    pub eigenvector: Array1<f64>,
    pub iterations: usize,
}

/// Power iteration with 1-norm normalization.
///
/// Iterates on `(A + I) / 2`, which shares the Perron vector of `A` and is
/// primitive whenever `A` is irreducible, so periodic graphs converge too.
pub fn perron_eigenpair(a: &Array2<f64>, tol: f64, max_iter: usize) -> Result<PerronPair> {
    let n = a.nrows();
    let mut v = Array1::from_elem(n, 1.0 / n as f64);
    for it in 1..=max_iter {
        let mut next = (a.dot(&v) + &v) * 0.5;
        let norm = next.sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(BridgeError::Degeneracy(
                "power iteration collapsed to zero".into(),
            ));
        }
        next /= norm;
        let diff = next
            .iter()
            .zip(v.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        v = next;
        if diff < tol {
            // Rayleigh-style estimate, exact for the eigenvector
            let eigenvalue = a.dot(&v).sum() / v.sum();
            return Ok(PerronPair {
                eigenvalue,
                eigenvector: v,
                iterations: it,
            });
        }
    }
    Err(BridgeError::Convergence {
        iterations: max_iter,
        last_residual: f64::NAN,
        residuals: Vec::new(),
    })
}

/// Ruelle-Bowen random walk `m_ij = a_ij v_j / (lambda v_i)`, time invariant.
pub fn ruelle_bowen_prior(
    graph: &DirectedGraph,
    horizon: usize,
    mu0: Option<Array1<f64>>,
    tol: f64,
) -> Result<PriorSchedule> {
    if !graph.is_strongly_connected() {
        return Err(BridgeError::Precondition(
            "Ruelle-Bowen prior requires a strongly connected graph".into(),
        ));
    }
    let a = graph.adjacency();
    let pair = perron_eigenpair(a, tol, PERRON_MAX_ITER)?;
    let (lambda, v) = (pair.eigenvalue, &pair.eigenvector);
    let n = graph.n();
    let mut m = Array2::<f64>::zeros((n, n));
    for ((i, j), &aij) in a.indexed_iter() {
        if aij != 0.0 {
            m[[i, j]] = aij * v[j] / (lambda * v[i]);
        }
    }
    // absorb the eigenvector's residual error into the row sums
    for mut row in m.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    PriorSchedule::custom(graph, vec![m; horizon], mu0)
}

/// `K = M(0) M(1) ... M(N-1)` with its positivity status.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductKernel {
    pub matrix: Array2<f64>,
    /// Every entry strictly positive.
    pub strictly_positive: bool,
    /// Every row and every column has a positive entry.
    pub relaxed_positive: bool,
}

/// Which positivity condition the product kernel satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositivityMode {
    Strict,
    Relaxed,
}

impl std::fmt::Display for PositivityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PositivityMode::Strict => "strict",
            PositivityMode::Relaxed => "relaxed",
        })
    }
}

impl ProductKernel {
    pub fn from_matrix(matrix: Array2<f64>) -> Self {
        let strictly_positive = matrix.iter().all(|&v| v > 0.0);
        let rows_ok = matrix
            .rows()
            .into_iter()
            .all(|r| r.iter().any(|&v| v > 0.0));
        let cols_ok = matrix
            .columns()
            .into_iter()
            .all(|c| c.iter().any(|&v| v > 0.0));
        Self {
            matrix,
            strictly_positive,
            relaxed_positive: rows_ok && cols_ok,
        }
    }

    /// Strongest condition that holds, if any.
    pub fn mode(&self) -> Option<PositivityMode> {
        if self.strictly_positive {
            Some(PositivityMode::Strict)
        } else if self.relaxed_positive {
            Some(PositivityMode::Relaxed)
        } else {
            None
        }
    }

    pub fn transpose(&self) -> Array2<f64> {
        self.matrix.t().to_owned()
    }
}

/// Time-ordered kernel product in the order the backward recursion uses,
/// so that `phi(0) = K phi(N)` and `phi_hat(N) = K^T phi_hat(0)`.
pub fn product_kernel(prior: &PriorSchedule) -> ProductKernel {
    let n = prior.n();
    let k = prior
        .kernels()
        .iter()
        .fold(Array2::<f64>::eye(n), |acc, m| acc.dot(m));
    ProductKernel::from_matrix(k)
}

/// Number of feasible paths of length `horizon`, optionally from `start`.
pub fn count_feasible_paths(graph: &DirectedGraph, horizon: usize, start: Option<usize>) -> f64 {
    let n = graph.n();
    let mut counts = match start {
        Some(s) => {
            let mut c = Array1::zeros(n);
            c[s] = 1.0;
            c
        }
        None => Array1::from_elem(n, 1.0),
    };
    let at = graph.adjacency().t();
    for _ in 0..horizon {
        counts = at.dot(&counts);
    }
    counts.sum()
}

/// All paths `(x_0, ..., x_N)` whose consecutive pairs are edges, in lexicographic order.
pub fn enumerate_feasible_paths(
    graph: &DirectedGraph,
    horizon: usize,
    start: Option<usize>,
    cap: usize,
) -> Result<Vec<Vec<usize>>> {
    if let Some(s) = start {
        if s >= graph.n() {
            return Err(BridgeError::Input(format!(
                "start vertex {} out of range",
                s + 1
            )));
        }
    }
    let count = count_feasible_paths(graph, horizon, start);
    if count > cap as f64 {
        return Err(BridgeError::Resource(format!(
            "{count} feasible paths exceed the enumeration cap of {cap}; \
             use the recursive evaluators instead of enumeration"
        )));
    }
    let successors = graph.successors();
    let mut out = Vec::with_capacity(count as usize);
    let starts: Vec<usize> = match start {
        Some(s) => vec![s],
        None => (0..graph.n()).collect(),
    };
    let mut path = Vec::with_capacity(horizon + 1);
    for s in starts {
        path.clear();
        path.push(s);
        extend_paths(&successors, horizon, &mut path, &mut out);
    }
    Ok(out)
}

fn extend_paths(
    successors: &[Vec<usize>],
    horizon: usize,
    path: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if path.len() == horizon + 1 {
        out.push(path.clone());
        return;
    }
    let last = *path.last().expect("path is never empty");
    for &next in &successors[last] {
        path.push(next);
        extend_paths(successors, horizon, path, out);
        path.pop();
    }
}

/// A finite measure on feasible paths, for desk-scale checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDistribution {
    paths: Vec<Vec<usize>>,
    masses: Vec<f64>,
}

impl PathDistribution {
    pub fn new(graph: &DirectedGraph, paths: Vec<Vec<usize>>, masses: Vec<f64>) -> Result<Self> {
        if paths.len() != masses.len() {
            return Err(BridgeError::Input("one mass per path required".into()));
        }
        for p in &paths {
            if let Some(w) = p.windows(2).find(|w| !graph.has_edge(w[0], w[1])) {
                return Err(BridgeError::Input(format!(
                    "path uses ({}, {}), which is not an edge",
                    w[0] + 1,
                    w[1] + 1
                )));
            }
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(BridgeError::Input(
                "path masses must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { paths, masses })
    }

    /// Mass of every feasible path under a Markov law with the given initial weights and kernels.
    pub fn from_markov(
        graph: &DirectedGraph,
        initial: &Array1<f64>,
        transitions: &[Array2<f64>],
        cap: usize,
    ) -> Result<Self> {
        let paths = enumerate_feasible_paths(graph, transitions.len(), None, cap)?;
        let masses = paths
            .iter()
            .map(|p| {
                p.windows(2).enumerate().fold(initial[p[0]], |acc, (t, w)| {
                    acc * transitions[t][[w[0], w[1]]]
                })
            })
            .collect();
        Self::new(graph, paths, masses)
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_cycle() -> DirectedGraph {
        DirectedGraph::new(2, &[(0, 1), (1, 0)]).unwrap()
    }

    fn fibonacci() -> DirectedGraph {
        DirectedGraph::new(2, &[(0, 0), (0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn two_cycle_is_periodic() {
        let g = two_cycle();
        assert!(g.is_strongly_connected());
        assert!(!g.is_aperiodic());
    }

    #[test]
    fn self_loop_breaks_periodicity() {
        let g = DirectedGraph::new(2, &[(0, 1), (1, 0), (0, 0)]).unwrap();
        assert!(g.is_strongly_connected());
        assert!(g.is_aperiodic());
    }

    #[test]
    fn path_graph_is_not_strongly_connected() {
        let g = DirectedGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(!g.is_strongly_connected());
        assert!(!g.is_aperiodic());
    }

    #[test]
    fn triangle_with_chord_period() {
        // cycles of length 3 and 2 -> aperiodic
        let g = DirectedGraph::new(3, &[(0, 1), (1, 2), (2, 0), (1, 0)]).unwrap();
        assert!(g.is_aperiodic());
        // only a 3-cycle
        let g = DirectedGraph::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(!g.is_aperiodic());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            DirectedGraph::new(2, &[(0, 2)]),
            Err(BridgeError::Input(_))
        ));
        assert!(matches!(
            DirectedGraph::new(2, &[]),
            Err(BridgeError::Input(_))
        ));
        assert!(matches!(
            DirectedGraph::new(0, &[(0, 0)]),
            Err(BridgeError::Input(_))
        ));
        assert!(matches!(
            DirectedGraph::new(2, &[(0, 1), (0, 1)]),
            Err(BridgeError::Input(_))
        ));
        assert!(matches!(
            DirectedGraph::from_one_based(2, &[(0, 1)]),
            Err(BridgeError::Input(_))
        ));
    }

    #[test]
    fn adjacency_prior_encodes_topology() {
        let p = adjacency_prior(&two_cycle(), 2, None).unwrap();
        assert_eq!(p.horizon(), 2);
        for m in p.kernels() {
            assert_eq!(m, &array![[0.0, 1.0], [1.0, 0.0]]);
        }
        let looped = DirectedGraph::new(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        assert_eq!(
            adjacency_prior(&looped, 1, None).unwrap().kernel(0)[[0, 0]],
            1.0
        );

        let k3 = DirectedGraph::new(3, &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]).unwrap();
        let p = adjacency_prior(&k3, 1, None).unwrap();
        assert!(p.kernel(0).rows().into_iter().all(|r| r.sum() == 2.0));
        assert!(!p.is_stochastic(1e-12));
    }

    #[test]
    fn custom_prior_must_respect_topology() {
        let g = two_cycle();
        let bad = array![[0.5, 0.5], [1.0, 0.0]];
        assert!(matches!(
            PriorSchedule::custom(&g, vec![bad], None),
            Err(BridgeError::Input(_))
        ));
        let neg = array![[0.0, -1.0], [1.0, 0.0]];
        assert!(PriorSchedule::custom(&g, vec![neg], None).is_err());
        let ok = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(PriorSchedule::custom(&g, vec![ok.clone()], Some(array![1.0, 0.0])).is_err());
        assert!(PriorSchedule::custom(&g, vec![], None).is_err());
        let p = PriorSchedule::custom(&g, vec![ok], Some(array![2.0, 3.0])).unwrap();
        assert_eq!(p.mu0(), &array![2.0, 3.0]);
    }

    #[test]
    fn ruelle_bowen_two_cycle() {
        let p = ruelle_bowen_prior(&two_cycle(), 1, None, PERRON_TOL).unwrap();
        assert_eq!(p.kernel(0), &array![[0.0, 1.0], [1.0, 0.0]]);
        let pair = perron_eigenpair(two_cycle().adjacency(), PERRON_TOL, PERRON_MAX_ITER).unwrap();
        assert!((pair.eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ruelle_bowen_all_ones_is_uniform() {
        let edges: Vec<_> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        let g = DirectedGraph::new(3, &edges).unwrap();
        let p = ruelle_bowen_prior(&g, 2, None, PERRON_TOL).unwrap();
        for v in p.kernel(0).iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ruelle_bowen_fibonacci() {
        // lambda = golden ratio, v ~ (lambda, 1)
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let pair = perron_eigenpair(fibonacci().adjacency(), PERRON_TOL, PERRON_MAX_ITER).unwrap();
        assert!((pair.eigenvalue - golden).abs() < 1e-10);
        assert!((pair.eigenvector[0] / pair.eigenvector[1] - golden).abs() < 1e-10);

        let m = ruelle_bowen_prior(&fibonacci(), 1, None, PERRON_TOL)
            .unwrap()
            .kernel(0)
            .clone();
        assert!((m[[0, 0]] - 0.6180339887498948).abs() < 1e-10);
        assert!((m[[0, 1]] - 0.38196601125010515).abs() < 1e-10);
        assert_eq!(m[[1, 0]], 1.0);
        assert_eq!(m[[1, 1]], 0.0);
    }

    #[test]
    fn ruelle_bowen_requires_strong_connectivity() {
        let g = DirectedGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            ruelle_bowen_prior(&g, 1, None, PERRON_TOL),
            Err(BridgeError::Precondition(_))
        ));
    }

    #[test]
    fn product_kernel_examples() {
        let k = product_kernel(&adjacency_prior(&two_cycle(), 2, None).unwrap());
        assert_eq!(k.matrix, Array2::<f64>::eye(2));
        assert!(!k.strictly_positive);
        assert!(k.relaxed_positive);
        assert_eq!(k.mode(), Some(PositivityMode::Relaxed));

        let ones = PriorSchedule::time_invariant(Array2::from_elem((2, 2), 1.0), 3, None).unwrap();
        assert_eq!(product_kernel(&ones).matrix, Array2::from_elem((2, 2), 4.0));

        // A^3 by hand: A^2 = [[2,1],[1,1]], A^3 = [[3,2],[2,1]]
        let fib = adjacency_prior(&fibonacci(), 3, None).unwrap();
        let k = product_kernel(&fib);
        assert_eq!(k.matrix, array![[3.0, 2.0], [2.0, 1.0]]);
        assert_eq!(k.mode(), Some(PositivityMode::Strict));
    }

    #[test]
    fn product_kernel_uses_recursion_order() {
        let a = array![[1.0, 2.0], [0.0, 1.0]];
        let b = array![[1.0, 0.0], [3.0, 1.0]];
        let prior = PriorSchedule::from_kernels(vec![a.clone(), b.clone()], None).unwrap();
        assert_eq!(product_kernel(&prior).matrix, a.dot(&b));
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(
            enumerate_feasible_paths(&two_cycle(), 2, Some(0), DEFAULT_PATH_CAP).unwrap(),
            vec![vec![0, 1, 0]]
        );
        let full = DirectedGraph::new(2, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(
            enumerate_feasible_paths(&full, 1, None, DEFAULT_PATH_CAP)
                .unwrap()
                .len(),
            4
        );
        assert_eq!(
            enumerate_feasible_paths(&fibonacci(), 2, Some(0), DEFAULT_PATH_CAP).unwrap(),
            vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0]]
        );
    }

    #[test]
    fn enumeration_cap() {
        let full = DirectedGraph::new(2, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert!(matches!(
            enumerate_feasible_paths(&full, 10, None, 1000),
            Err(BridgeError::Resource(_))
        ));
    }

    #[test]
    fn path_distribution_validates() {
        let g = two_cycle();
        assert!(PathDistribution::new(&g, vec![vec![0, 0]], vec![1.0]).is_err());
        let d = PathDistribution::new(&g, vec![vec![0, 1], vec![1, 0]], vec![0.25, 0.5]).unwrap();
        assert_eq!(d.total_mass(), 0.75);
    }
}
