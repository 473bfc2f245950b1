//! Subgraph-count functionals on edge vectors.
//!
//! A point of the cube is a symmetric matrix with zero diagonal and entries
//! in [0,1], stored as the n = N(N-1)/2 upper-triangle values. For a small
//! pattern graph H on k vertices with m edges, the functional is
//!
//! ```text
//! T(x) = N^-(k-2) * sum over q in [N]^k of prod over {l,l'} in E(H) of x[q_l, q_l']
//! ```
//!
//! Tuples q with repeated vertices are included; the zero diagonal kills
//! those that place an edge of H on a loop. Evaluation runs by greedy
//! vertex-elimination contraction, so the cost is N^(w+1) for elimination
//! width w rather than N^k; a work budget rejects hopeless inputs.

use nalgebra::DMatrix;

use super::{CoordRule, DerivBounds, Functional, PairRule};
use crate::entropy::Bernoulli;
use crate::{Error, Result};

/// Simple pattern graph on vertices 0..k. At least one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    k: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(k: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("pattern graph needs at least 2 vertices, got {k}")));
        }
        for e in &mut edges {
            if e.0 == e.1 {
                return Err(Error::Domain(format!("loop edge ({}, {})", e.0, e.1)));
            }
            if e.0 >= k || e.1 >= k {
                return Err(Error::Domain(format!("edge ({}, {}) outside 0..{k}", e.0, e.1)));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        if edges.len() != before {
            return Err(Error::Domain("duplicate edge in pattern graph".into()));
        }
        if edges.is_empty() {
            return Err(Error::Domain("pattern graph needs at least one edge".into()));
        }
        Ok(Self { k, edges })
    }

    pub fn single_edge() -> Self {
        Self { k: 2, edges: vec![(0, 1)] }
    }

    pub fn triangle() -> Self {
        Self::complete(3)
    }

    pub fn complete(k: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                edges.push((i, j));
            }
        }
        Self { k, edges }
    }

    pub fn cycle(k: usize) -> Self {
        assert!(k >= 3, "cycle needs at least 3 vertices");
        let edges = (0..k).map(|i| (i, (i + 1) % k)).collect();
        Self::new(k, edges).expect("cycle is simple")
    }

    pub fn path(k: usize) -> Self {
        assert!(k >= 2, "path needs at least 2 vertices");
        let edges = (0..k - 1).map(|i| (i, i + 1)).collect();
        Self::new(k, edges).expect("path is simple")
    }

    pub fn vertex_count(&self) -> usize {
        self.k
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.k];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Parse the exchange format: a header line `k m`, then m lines `u v`
    /// with 1-based vertex labels. Token-oriented, so extra whitespace and
    /// line breaks are harmless.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut toks = text.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            let t = toks
                .next()
                .ok_or_else(|| Error::Parse(format!("edge list ended while reading {what}")))?;
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad {what} token {t:?} in edge list")))
        };
        let k = next_usize("vertex count")?;
        let m = next_usize("edge count")?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let u = next_usize("edge endpoint")?;
            let v = next_usize("edge endpoint")?;
            if u == 0 || v == 0 {
                return Err(Error::Parse("edge list vertices are 1-based".into()));
            }
            edges.push((u - 1, v - 1));
        }
        if toks.next().is_some() {
            return Err(Error::Parse("trailing tokens after declared edges".into()));
        }
        Graph::new(k, edges).map_err(|e| Error::Parse(format!("invalid pattern graph: {e}")))
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut s = format!("{} {}\n", self.k, self.edges.len());
        for &(a, b) in &self.edges {
            s.push_str(&format!("{} {}\n", a + 1, b + 1));
        }
        s
    }

    /// Short display name: recognizes complete graphs, cycles, and paths.
    pub fn describe(&self) -> String {
        let k = self.k;
        let m = self.edges.len();
        if m == k * (k - 1) / 2 {
            return format!("K{k}");
        }
        if k >= 3 && *self == Graph::cycle(k) {
            return format!("C{k}");
        }
        if *self == Graph::path(k) {
            return format!("P{k}");
        }
        format!("H(k={k},m={m})")
    }
}

/// Index of the unordered pair (i, j), i < j, in lexicographic order.
pub fn index_of_pair(n_vertices: usize, i: usize, j: usize) -> usize {
    assert!(i < j && j < n_vertices, "bad pair ({i}, {j}) for N = {n_vertices}");
    i * (2 * n_vertices - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`index_of_pair`].
pub fn pair_from_index(n_vertices: usize, idx: usize) -> (usize, usize) {
    let mut i = 0;
    let mut base = 0;
    loop {
        let row = n_vertices - 1 - i;
        if idx < base + row {
            return (i, i + 1 + idx - base);
        }
        base += row;
        i += 1;
        assert!(i < n_vertices, "pair index {idx} out of range for N = {n_vertices}");
    }
}

/// Symmetric [0,1] matrix with zero diagonal, stored as upper-triangle
/// values in pair-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeVector {
    n_vertices: usize,
    vals: Vec<f64>,
}

impl EdgeVector {
    pub fn constant(n_vertices: usize, v: f64) -> Self {
        Self { n_vertices, vals: vec![v; n_vertices * (n_vertices - 1) / 2] }
    }

    pub fn from_vals(n_vertices: usize, vals: Vec<f64>) -> Result<Self> {
        if vals.len() != n_vertices * (n_vertices - 1) / 2 {
            return Err(Error::Domain(format!(
                "edge vector for N = {n_vertices} needs {} values, got {}",
                n_vertices * (n_vertices - 1) / 2,
                vals.len()
            )));
        }
        Ok(Self { n_vertices, vals })
    }

    pub fn from_fn(n_vertices: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut vals = Vec::with_capacity(n_vertices * (n_vertices - 1) / 2);
        for i in 0..n_vertices {
            for j in i + 1..n_vertices {
                vals.push(f(i, j));
            }
        }
        Self { n_vertices, vals }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn dim(&self) -> usize {
        self.vals.len()
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            self.vals[index_of_pair(self.n_vertices, a, b)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.vals[index_of_pair(self.n_vertices, a, b)] = v;
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.n_vertices;
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// Build from an arbitrary square matrix by symmetrizing, zeroing the
    /// diagonal, and clipping into [0,1]. Used when rounding maps hand back
    /// near-symmetric representatives.
    pub fn from_matrix_clipped(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || n < 2 {
            return Err(Error::Domain(format!("expected a square matrix of size >= 2, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(Self::from_fn(n, |i, j| (0.5 * (m[(i, j)] + m[(j, i)])).clamp(0.0, 1.0)))
    }
}

// ---- contraction engine ----

struct Tensor {
    scope: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn flat_index(&self, assign: &[usize], n: usize) -> usize {
        let mut idx = 0;
        for &v in &self.scope {
            idx = idx * n + assign[v];
        }
        idx
    }
}

fn scope_union(ts: &[&Vec<usize>]) -> Vec<usize> {
    let mut u: Vec<usize> = ts.iter().flat_map(|s| s.iter().copied()).collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// Multiply all tensors over the union scope, then sum out `elim` if given.
fn merge(tensors: Vec<Tensor>, elim: Option<usize>, n: usize) -> Tensor {
    let scopes: Vec<&Vec<usize>> = tensors.iter().map(|t| &t.scope).collect();
    let union = scope_union(&scopes);
    let out_scope: Vec<usize> = union.iter().copied().filter(|&v| Some(v) != elim).collect();
    let mut out = vec![0.0; n.pow(out_scope.len() as u32)];
    let mut assign = vec![0usize; union.iter().copied().max().map_or(0, |v| v + 1)];
    let total = n.pow(union.len() as u32);
    // odometer over the union scope, innermost axis last
    for mut code in 0..total {
        for &v in union.iter().rev() {
            assign[v] = code % n;
            code /= n;
        }
        let mut prod = 1.0;
        for t in &tensors {
            prod *= t.data[t.flat_index(&assign, n)];
            if prod == 0.0 {
                break;
            }
        }
        if prod != 0.0 {
            let mut idx = 0;
            for &v in &out_scope {
                idx = idx * n + assign[v];
            }
            out[idx] += prod;
        }
    }
    Tensor { scope: out_scope, data: out }
}

/// Sum over assignments of the non-kept vertices of H of the product of
/// edge entries, returning a tensor over `keep` (scalar when empty).
/// `budget` caps the number of multiply-accumulate operations.
fn contract(
    edges: &[(usize, usize)],
    k: usize,
    keep: &[usize],
    m: &DMatrix<f64>,
    budget: f64,
) -> Result<(Tensor, f64)> {
    let n = m.nrows();
    // cost pre-check on simulated scopes
    let mut scopes: Vec<Vec<usize>> = edges.iter().map(|&(a, b)| vec![a.min(b), a.max(b)]).collect();
    let mut cost = 0.0;
    let mut elim_order = Vec::new();
    let mut to_elim: Vec<usize> = (0..k).filter(|v| !keep.contains(v)).collect();
    while !to_elim.is_empty() {
        // greedy: smallest merged scope
        let (best_pos, best_scope) = to_elim
            .iter()
            .enumerate()
            .map(|(pos, &v)| {
                let touching: Vec<&Vec<usize>> =
                    scopes.iter().filter(|s| s.contains(&v)).collect();
                let u = if touching.is_empty() { vec![v] } else { scope_union(&touching) };
                (pos, u)
            })
            .min_by_key(|(_, u)| u.len())
            .expect("nonempty elimination set");
        let v = to_elim.remove(best_pos);
        cost += (n as f64).powi(best_scope.len() as i32);
        if cost > budget {
            return Err(Error::Budget { op: "graph contraction", needed: cost, limit: budget });
        }
        scopes.retain(|s| !s.contains(&v));
        let reduced: Vec<usize> = best_scope.iter().copied().filter(|&w| w != v).collect();
        if !reduced.is_empty() {
            scopes.push(reduced);
        }
        elim_order.push(v);
    }
    cost += (n as f64).powi(keep.len() as i32) * (scopes.len().max(1)) as f64;
    if cost > budget {
        return Err(Error::Budget { op: "graph contraction", needed: cost, limit: budget });
    }

    // execute
    let mut tensors: Vec<Tensor> = edges
        .iter()
        .map(|&(a, b)| {
            let (a, b) = (a.min(b), a.max(b));
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = m[(i, j)];
                }
            }
            Tensor { scope: vec![a, b], data }
        })
        .collect();
    let mut free_factor = 1.0;
    for v in elim_order {
        let (touching, rest): (Vec<Tensor>, Vec<Tensor>) =
            tensors.into_iter().partition(|t| t.scope.contains(&v));
        tensors = rest;
        if touching.is_empty() {
            free_factor *= n as f64;
        } else {
            tensors.push(merge(touching, Some(v), n));
        }
    }
    // fold what is left (scopes are subsets of keep) into one tensor over keep
    let mut result = if tensors.is_empty() {
        Tensor { scope: vec![], data: vec![1.0] }
    } else {
        let mut acc = tensors.pop().unwrap();
        while let Some(t) = tensors.pop() {
            acc = merge(vec![acc, t], None, n);
        }
        acc
    };
    if result.scope != keep {
        // broadcast across keep axes the contraction never touched
        let mut sorted_keep = keep.to_vec();
        sorted_keep.sort_unstable();
        let mut data = vec![0.0; n.pow(sorted_keep.len() as u32)];
        let mut assign = vec![0usize; k.max(1)];
        for mut code in 0..data.len() {
            for &v in sorted_keep.iter().rev() {
                assign[v] = code % n;
                code /= n;
            }
            data[sorted_keep.iter().fold(0, |acc, &v| acc * n + assign[v])] =
                result.data[result.flat_index(&assign, n)];
        }
        result = Tensor { scope: sorted_keep, data };
    }
    Ok((result, free_factor))
}

/// The subgraph-count functional T for a fixed pattern H and host size N.
pub struct EdgeFunctional {
    graph: Graph,
    n_vertices: usize,
    budget: f64,
}

pub const DEFAULT_CONTRACTION_BUDGET: f64 = 1e8;

impl EdgeFunctional {
    pub fn new(graph: Graph, n_vertices: usize) -> Result<Self> {
        Self::with_budget(graph, n_vertices, DEFAULT_CONTRACTION_BUDGET)
    }

    pub fn with_budget(graph: Graph, n_vertices: usize, budget: f64) -> Result<Self> {
        if n_vertices < 2 {
            return Err(Error::Domain(format!("host graph needs N >= 2, got {n_vertices}")));
        }
        let f = Self { graph, n_vertices, budget };
        // contraction work depends only on the pattern and N, never on the
        // point, so probing each contraction shape once certifies every
        // later eval and grad call
        let probe = DMatrix::from_element(n_vertices, n_vertices, 0.5);
        contract(&f.graph.edges, f.graph.k, &[], &probe, budget)?;
        for (ei, &(a, b)) in f.graph.edges.iter().enumerate() {
            let rest: Vec<(usize, usize)> = f
                .graph
                .edges
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != ei)
                .map(|(_, &e)| e)
                .collect();
            contract(&rest, f.graph.k, &[a.min(b), a.max(b)], &probe, budget)?;
        }
        Ok(f)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    fn prefactor(&self) -> f64 {
        (self.n_vertices as f64).powi(-(self.graph.k as i32 - 2))
    }

    fn matrix_of(&self, x: &[f64]) -> DMatrix<f64> {
        let nn = self.n_vertices;
        let ev = EdgeVector { n_vertices: nn, vals: x.to_vec() };
        ev.to_matrix()
    }

    /// Brute-force reference evaluation over all N^k tuples. Test oracle
    /// and small-case fallback; cost N^k * m.
    pub fn eval_direct(&self, x: &[f64]) -> Result<f64> {
        let n = self.n_vertices;
        let k = self.graph.k;
        let work = (n as f64).powi(k as i32) * self.graph.edges.len() as f64;
        if work > self.budget {
            return Err(Error::Budget { op: "direct tuple enumeration", needed: work, limit: self.budget });
        }
        let m = self.matrix_of(x);
        let mut q = vec![0usize; k];
        let mut total = 0.0;
        loop {
            let mut prod = 1.0;
            for &(a, b) in &self.graph.edges {
                prod *= m[(q[a], q[b])];
                if prod == 0.0 {
                    break;
                }
            }
            total += prod;
            // odometer
            let mut pos = k;
            loop {
                if pos == 0 {
                    return Ok(self.prefactor() * total);
                }
                pos -= 1;
                q[pos] += 1;
                if q[pos] < n {
                    break;
                }
                q[pos] = 0;
            }
        }
    }

    /// Exact mean of T under iid Bernoulli(p) edges: each tuple contributes
    /// p^(number of distinct image edges), zero if any H-edge collapses to
    /// a loop.
    pub fn mean_exact(&self, p: Bernoulli) -> Result<f64> {
        let n = self.n_vertices;
        let k = self.graph.k;
        let work = (n as f64).powi(k as i32) * self.graph.edges.len() as f64;
        if work > self.budget {
            return Err(Error::Budget { op: "mean tuple enumeration", needed: work, limit: self.budget });
        }
        let mut q = vec![0usize; k];
        let mut total = 0.0;
        let mut image: Vec<(usize, usize)> = Vec::with_capacity(self.graph.edges.len());
        loop {
            image.clear();
            let mut loopy = false;
            for &(a, b) in &self.graph.edges {
                let (u, v) = (q[a].min(q[b]), q[a].max(q[b]));
                if u == v {
                    loopy = true;
                    break;
                }
                image.push((u, v));
            }
            if !loopy {
                image.sort_unstable();
                image.dedup();
                total += p.p().powi(image.len() as i32);
            }
            let mut pos = k;
            loop {
                if pos == 0 {
                    return Ok(self.prefactor() * total);
                }
                pos -= 1;
                q[pos] += 1;
                if q[pos] < n {
                    break;
                }
                q[pos] = 0;
            }
        }
    }

    /// Evaluate on an [`EdgeVector`] directly.
    pub fn eval_edges(&self, x: &EdgeVector) -> f64 {
        assert_eq!(x.n_vertices, self.n_vertices);
        self.eval(x.vals())
    }
}

impl Functional for EdgeFunctional {
    fn dim(&self) -> usize {
        self.n_vertices * (self.n_vertices - 1) / 2
    }

    fn name(&self) -> String {
        format!(
            "subgraph(k={}, m={}, N={})",
            self.graph.k,
            self.graph.edges.len(),
            self.n_vertices
        )
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let m = self.matrix_of(x);
        let (t, free) = contract(&self.graph.edges, self.graph.k, &[], &m, self.budget)
            .expect("contraction cost was certified at construction");
        self.prefactor() * t.data[0] * free
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let m = self.matrix_of(x);
        let n = self.n_vertices;
        let mut pair_grad = DMatrix::<f64>::zeros(n, n);
        for (ei, &(a, b)) in self.graph.edges.iter().enumerate() {
            let rest: Vec<(usize, usize)> = self
                .graph
                .edges
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != ei)
                .map(|(_, &e)| e)
                .collect();
            let (t, free) = contract(&rest, self.graph.k, &[a.min(b), a.max(b)], &m, self.budget)
                .expect("contraction cost was certified at construction");
            for u in 0..n {
                for v in 0..n {
                    pair_grad[(u, v)] += free * t.data[u * n + v];
                }
            }
        }
        let pf = self.prefactor();
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..n {
            for j in i + 1..n {
                out.push(pf * (pair_grad[(i, j)] + pair_grad[(j, i)]));
            }
        }
        out
    }

    fn deriv_bounds(&self) -> DerivBounds {
        let nf = self.n_vertices as f64;
        let m = self.graph.edges.len() as f64;
        DerivBounds {
            a: nf * nf,
            b: CoordRule::Uniform(2.0 * m),
            c: PairRule::EdgeClass {
                n_vertices: self.n_vertices,
                shared: 4.0 * m * (m - 1.0) / nf,
                disjoint: 4.0 * m * (m - 1.0) / (nf * nf),
            },
        }
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        self.mean_exact(p).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::testutil::fd_grad;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_x(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..dim).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn pair_index_roundtrip() {
        for n in 2..8 {
            let mut idx = 0;
            for i in 0..n {
                for j in i + 1..n {
                    assert_eq!(index_of_pair(n, i, j), idx);
                    assert_eq!(pair_from_index(n, idx), (i, j));
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn triangle_all_ones_counts_ordered_distinct_triples() {
        let f = EdgeFunctional::new(Graph::triangle(), 4).unwrap();
        let x = EdgeVector::constant(4, 1.0);
        // 4*3*2 ordered triples, divided by N
        assert_abs_diff_eq!(f.eval_edges(&x), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn single_edge_all_ones() {
        let f = EdgeFunctional::new(Graph::single_edge(), 3).unwrap();
        let x = EdgeVector::constant(3, 1.0);
        assert_abs_diff_eq!(f.eval_edges(&x), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn contraction_agrees_with_direct_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let patterns = [
            Graph::single_edge(),
            Graph::triangle(),
            Graph::cycle(4),
            Graph::path(3),
            Graph::complete(4),
            Graph::cycle(5),
        ];
        for g in patterns {
            for n in [3usize, 4, 5] {
                let f = EdgeFunctional::new(g.clone(), n).unwrap();
                for _ in 0..3 {
                    let x = random_x(f.dim(), &mut rng);
                    let via_contraction = f.eval(&x);
                    let via_tuples = f.eval_direct(&x).unwrap();
                    assert_abs_diff_eq!(via_contraction, via_tuples, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in [Graph::triangle(), Graph::cycle(4), Graph::path(3)] {
            let f = EdgeFunctional::new(g, 5).unwrap();
            for _ in 0..4 {
                let x: Vec<f64> =
                    (0..f.dim()).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect();
                let g_exact = f.grad(&x);
                let g_fd = fd_grad(&f, &x, 1e-5);
                for (a, b) in g_exact.iter().zip(&g_fd) {
                    assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn range_and_gradient_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [Graph::triangle(), Graph::cycle(4)] {
            let m = g.edge_count() as f64;
            let f = EdgeFunctional::new(g, 6).unwrap();
            for _ in 0..10 {
                let x = random_x(f.dim(), &mut rng);
                let v = f.eval(&x);
                assert!(v >= 0.0 && v <= 36.0 + 1e-9);
                for gi in f.grad(&x) {
                    assert!(gi.abs() <= 2.0 * m + 1e-9);
                }
            }
        }
    }

    #[test]
    fn multilinear_in_each_coordinate_for_complete_patterns() {
        // only complete H guarantee that tuples reusing an edge variable
        // hit the zero diagonal; e.g. the 4-cycle picks up x_ab^4 terms
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in [Graph::single_edge(), Graph::triangle(), Graph::complete(4)] {
            let f = EdgeFunctional::new(g, 5).unwrap();
            let mut x = random_x(f.dim(), &mut rng);
            for coord in [0usize, 3, f.dim() - 1] {
                let mut at = |v: f64| {
                    x[coord] = v;
                    f.eval(&x)
                };
                let (y0, y1, yh) = (at(0.0), at(1.0), at(0.5));
                assert_abs_diff_eq!(yh, 0.5 * (y0 + y1), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn four_cycle_is_not_multilinear() {
        let f = EdgeFunctional::new(Graph::cycle(4), 5).unwrap();
        let mut x = vec![0.7; f.dim()];
        let mut at = |v: f64| {
            x[0] = v;
            f.eval(&x)
        };
        let (y0, y1, yh) = (at(0.0), at(1.0), at(0.5));
        assert!((yh - 0.5 * (y0 + y1)).abs() > 1e-6);
    }

    #[test]
    fn mean_matches_state_enumeration() {
        let p = Bernoulli::new(0.3).unwrap();
        for g in [Graph::single_edge(), Graph::triangle(), Graph::cycle(4)] {
            let f = EdgeFunctional::new(g, 4).unwrap();
            let n = f.dim();
            let mut mean = 0.0;
            for mask in 0u32..(1 << n) {
                let x: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
                let ones = mask.count_ones() as f64;
                let prob = p.p().powf(ones) * (1.0 - p.p()).powf(n as f64 - ones);
                mean += prob * f.eval(&x);
            }
            assert_abs_diff_eq!(f.mean_exact(p).unwrap(), mean, epsilon = 1e-10);
        }
    }

    #[test]
    fn budget_rejects_oversized_contractions() {
        // the construction probe rejects an undersized budget up front
        assert!(matches!(
            EdgeFunctional::with_budget(Graph::complete(5), 50, 1e4),
            Err(Error::Budget { .. })
        ));
        // with room to work the same pattern constructs and evaluates
        let f = EdgeFunctional::with_budget(Graph::complete(5), 12, 1e8).unwrap();
        let x = vec![0.5; f.dim()];
        assert!(f.eval(&x) > 0.0);
    }

    #[test]
    fn edge_list_roundtrip_and_errors() {
        let g = Graph::cycle(4);
        let text = g.to_edge_list_string();
        assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);

        assert!(Graph::parse_edge_list("3 1\n1 1\n").is_err()); // loop
        assert!(Graph::parse_edge_list("3 2\n1 2\n1 2\n").is_err()); // dup
        assert!(Graph::parse_edge_list("3 1\n1 5\n").is_err()); // range
        assert!(Graph::parse_edge_list("3 2\n1 2\n").is_err()); // truncated
        assert!(Graph::parse_edge_list("3 1\n1 2\n9 9\n").is_err()); // trailing
        assert!(Graph::parse_edge_list("2 1\n0 1\n").is_err()); // 0-based input
    }

    #[test]
    fn from_matrix_clipped_symmetrizes() {
        let mut m = DMatrix::<f64>::zeros(3, 3);
        m[(0, 1)] = 1.4;
        m[(1, 0)] = 0.6;
        m[(2, 0)] = -0.5;
        let ev = EdgeVector::from_matrix_clipped(&m).unwrap();
        assert_eq!(ev.get(0, 1), 1.0);
        assert_eq!(ev.get(0, 2), 0.0);
        assert_eq!(ev.get(1, 2), 0.0);
    }
}
