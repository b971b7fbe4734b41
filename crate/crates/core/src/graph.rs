//! Weighted digraphs, their Laplacians and the bicomponent decomposition.
//!
//! Node indices are zero-based everywhere in the library. The weight matrix
//! follows the convention `weights[(i, j)] = a_ij`, the weight of the edge
//! `j -> i` (agent `i` receives information from agent `j`).

use std::collections::BTreeSet;
use std::ops::Deref;

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedWeightedGraph {
    weights: DMatrix<f64>,
}

impl DirectedWeightedGraph {
    /// Validates and wraps a weight matrix.
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 {
            return Err(Error::validation("graph must have at least one node"));
        }
        if weights.ncols() != n {
            return Err(Error::dimension(
                "adjacency matrix",
                format!("{n}x{n}"),
                format!("{}x{}", n, weights.ncols()),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(Error::validation(format!(
                        "weight a[{i}][{j}] is not finite ({w})"
                    )));
                }
                if w < 0.0 {
                    return Err(Error::validation(format!(
                        "negative weight a[{i}][{j}] = {w}"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::validation(format!(
                        "self-loop a[{i}][{i}] = {w}; diagonal must be zero"
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(n, n))
    }

    /// Builds a graph from `(from, to, weight)` triples. Repeated edges are
    /// rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("graph must have at least one node"));
        }
        let mut w = DMatrix::zeros(n, n);
        for &(from, to, weight) in edges {
            if from >= n || to >= n {
                return Err(Error::validation(format!(
                    "edge {from} -> {to} references a node outside 0..{n}"
                )));
            }
            if w[(to, from)] != 0.0 {
                return Err(Error::validation(format!(
                    "duplicate edge {from} -> {to}"
                )));
            }
            w[(to, from)] = weight;
        }
        Self::new(w)
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// `a_ij`, the weight of the edge `j -> i`.
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[(to, from)]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.weights[(to, from)] > 0.0
    }

    /// Edges as `(from, to, weight)`, sorted by `(from, to)`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for from in 0..n {
            for to in 0..n {
                let w = self.weights[(to, from)];
                if w > 0.0 {
                    out.push((from, to, w));
                }
            }
        }
        out
    }

    /// Out-neighbour lists: `succ[j]` holds every `i` with `a_ij > 0`.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        (0..n)
            .map(|j| (0..n).filter(|&i| self.weights[(i, j)] > 0.0).collect())
            .collect()
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        build_laplacian(self)
    }
}

/// Laplacian `L` with `l_ii = sum_k a_ik` and `l_ij = -a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    /// Wraps a matrix that already satisfies the Laplacian sign pattern and
    /// zero row sums (checked to `1e-9` relative to the row's diagonal).
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dimension(
                "laplacian",
                "square matrix",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        for i in 0..m.nrows() {
            let mut sum = 0.0;
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if i != j && v > 0.0 {
                    return Err(Error::validation(format!(
                        "laplacian off-diagonal entry ({i},{j}) = {v} is positive"
                    )));
                }
                sum += v;
            }
            if m[(i, i)] < 0.0 || sum.abs() > 1e-9 * m[(i, i)].max(1.0) {
                return Err(Error::validation(format!(
                    "laplacian row {i} has diagonal {} and row sum {sum}",
                    m[(i, i)]
                )));
            }
        }
        Ok(Self(m))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

impl Deref for LaplacianMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn build_laplacian(g: &DirectedWeightedGraph) -> LaplacianMatrix {
    let n = g.node_count();
    let a = g.weights();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = a.row(i).sum();
    }
    LaplacianMatrix(l)
}

/// Maximal strongly connected components, basic flags and the canonical
/// ordering that puts the Laplacian in lower block-triangular form with the
/// basic bicomponents as trailing diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BicomponentDecomposition {
    components: Vec<Vec<usize>>,
    basic: Vec<bool>,
    canonical_order: Vec<usize>,
    /// Indices into `components` of the basic ones, in canonical order.
    basic_components: Vec<usize>,
    block_sizes: Vec<usize>,
}

impl BicomponentDecomposition {
    /// Components sorted by smallest member; members sorted ascending.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn basic_flags(&self) -> &[bool] {
        &self.basic
    }

    /// Node at each canonical position.
    pub fn canonical_order(&self) -> &[usize] {
        &self.canonical_order
    }

    /// `[M0, M1, ..., Mk]`.
    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Number of basic bicomponents.
    pub fn k(&self) -> usize {
        self.basic_components.len()
    }

    /// Number of non-basic nodes.
    pub fn m0(&self) -> usize {
        self.block_sizes[0]
    }

    pub fn node_count(&self) -> usize {
        self.canonical_order.len()
    }

    /// Members of the `i`-th basic bicomponent (zero-based, canonical order).
    pub fn basic_component(&self, i: usize) -> &[usize] {
        &self.components[self.basic_components[i]]
    }

    pub fn basic_components(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.basic_components
            .iter()
            .map(move |&c| self.components[c].as_slice())
    }

    /// Non-basic nodes in canonical order.
    pub fn nonbasic_nodes(&self) -> &[usize] {
        &self.canonical_order[..self.m0()]
    }

    /// Canonical position of every node.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.node_count()];
        for (p, &v) in self.canonical_order.iter().enumerate() {
            pos[v] = p;
        }
        pos
    }

    /// Range of canonical positions covered by block `b` (0 = non-basic).
    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        let start: usize = self.block_sizes[..b].iter().sum();
        start..start + self.block_sizes[b]
    }

    /// Which basic bicomponent a node belongs to, if any.
    pub fn basic_index_of(&self, node: usize) -> Option<usize> {
        (0..self.k()).find(|&i| self.basic_component(i).contains(&node))
    }
}

pub fn decompose_bicomponents(g: &DirectedWeightedGraph) -> BicomponentDecomposition {
    let n = g.node_count();
    let succ = g.successors();
    let mut components = tarjan_scc(&succ);
    for c in &mut components {
        c.sort_unstable();
    }
    components.sort_unstable_by_key(|c| c[0]);

    let mut comp_of = vec![0; n];
    for (ci, c) in components.iter().enumerate() {
        for &v in c {
            comp_of[v] = ci;
        }
    }

    // Condensation edges, deduplicated.
    let nc = components.len();
    let mut dag: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nc];
    let mut indeg = vec![0usize; nc];
    for (u, outs) in succ.iter().enumerate() {
        for &v in outs {
            let (cu, cv) = (comp_of[u], comp_of[v]);
            if cu != cv && dag[cu].insert(cv) {
                indeg[cv] += 1;
            }
        }
    }
    let basic: Vec<bool> = indeg.iter().map(|&d| d == 0).collect();

    // Kahn's algorithm, smallest component first among ready ones.
    let mut topo = Vec::with_capacity(nc);
    let mut remaining = indeg.clone();
    let mut ready: BTreeSet<usize> = (0..nc).filter(|&c| remaining[c] == 0).collect();
    while let Some(c) = ready.pop_first() {
        topo.push(c);
        for &d in &dag[c] {
            remaining[d] -= 1;
            if remaining[d] == 0 {
                ready.insert(d);
            }
        }
    }
    debug_assert_eq!(topo.len(), nc);

    // Non-basic nodes: downstream components first, so that every coupling
    // inside L0 points to a later position (upper block-triangular L0).
    let mut canonical_order = Vec::with_capacity(n);
    for &c in topo.iter().rev() {
        if !basic[c] {
            canonical_order.extend_from_slice(&components[c]);
        }
    }
    let m0 = canonical_order.len();
    let basic_components: Vec<usize> = (0..nc).filter(|&c| basic[c]).collect();
    let mut block_sizes = vec![m0];
    for &c in &basic_components {
        canonical_order.extend_from_slice(&components[c]);
        block_sizes.push(components[c].len());
    }

    BicomponentDecomposition {
        components,
        basic,
        canonical_order,
        basic_components,
        block_sizes,
    }
}

/// Iterative Tarjan over out-neighbour lists.
fn tarjan_scc(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    // (node, next successor offset)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge == 0 && index[v] == UNVISITED {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = succ[v].get(*edge) {
                *edge += 1;
                if index[w] == UNVISITED {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

/// A network has a directed spanning tree iff it has exactly one basic
/// bicomponent.
pub fn has_directed_spanning_tree(d: &BicomponentDecomposition) -> bool {
    d.k() == 1
}

/// `P L P^T` in canonical order together with the block sizes needed to
/// address `L0`, `L0i` and `Li`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalLaplacian {
    order: Vec<usize>,
    matrix: DMatrix<f64>,
    block_sizes: Vec<usize>,
}

impl CanonicalLaplacian {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn k(&self) -> usize {
        self.block_sizes.len() - 1
    }

    pub fn m0(&self) -> usize {
        self.block_sizes[0]
    }

    fn offset(&self, b: usize) -> usize {
        self.block_sizes[..b].iter().sum()
    }

    /// Grounded Laplacian on the non-basic nodes (`M0 x M0`).
    pub fn l0(&self) -> DMatrixView<'_, f64> {
        let m0 = self.m0();
        self.matrix.view((0, 0), (m0, m0))
    }

    /// Coupling from basic bicomponent `i` (zero-based) into the non-basic
    /// block (`M0 x Mi`).
    pub fn l0i(&self, i: usize) -> DMatrixView<'_, f64> {
        let off = self.offset(i + 1);
        self.matrix
            .view((0, off), (self.m0(), self.block_sizes[i + 1]))
    }

    /// Laplacian of basic bicomponent `i` (zero-based).
    pub fn li(&self, i: usize) -> DMatrixView<'_, f64> {
        let off = self.offset(i + 1);
        let m = self.block_sizes[i + 1];
        self.matrix.view((off, off), (m, m))
    }

    /// Permutation matrix `P` with `P L P^T` equal to [`Self::matrix`].
    pub fn permutation_matrix(&self) -> DMatrix<f64> {
        let n = self.order.len();
        let mut p = DMatrix::zeros(n, n);
        for (pos, &node) in self.order.iter().enumerate() {
            p[(pos, node)] = 1.0;
        }
        p
    }
}

pub fn canonical_laplacian(l: &LaplacianMatrix, d: &BicomponentDecomposition) -> CanonicalLaplacian {
    let order = d.canonical_order().to_vec();
    let n = order.len();
    assert_eq!(n, l.size(), "decomposition and laplacian sizes differ");
    let matrix = DMatrix::from_fn(n, n, |p, q| l[(order[p], order[q])]);
    CanonicalLaplacian {
        order,
        matrix,
        block_sizes: d.block_sizes().to_vec(),
    }
}

/// `rank(L) = n - k` check used by tests and the analyzer.
pub fn laplacian_rank(l: &LaplacianMatrix) -> usize {
    linalg::rank(l.matrix())
}
