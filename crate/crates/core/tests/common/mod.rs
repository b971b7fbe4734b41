//! Independent oracles shared by the integration tests. Nothing here calls
//! the decomposition or kernel code under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weaksync::agent::{assemble_network, single_integrator, NetworkSystem};
use weaksync::graph::DirectedWeightedGraph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi style digraph with weights in [0.5, 2).
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> DirectedWeightedGraph {
    let mut w = DMatrix::zeros(n, n);
    for to in 0..n {
        for from in 0..n {
            if from != to && rng.random_bool(p) {
                w[(to, from)] = rng.random_range(0.5..2.0);
            }
        }
    }
    DirectedWeightedGraph::new(w).unwrap()
}

/// Random digraph that contains a directed spanning tree rooted at a random
/// node, plus extra random edges.
pub fn random_rooted_digraph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> DirectedWeightedGraph {
    let mut w = random_digraph(rng, n, p).weights().clone();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for idx in 1..n {
        let parent = order[rng.random_range(0..idx)];
        w[(order[idx], parent)] = rng.random_range(0.5..2.0);
    }
    DirectedWeightedGraph::new(w).unwrap()
}

/// `reach[u][v]`: a directed path (possibly empty) leads from `u` to `v`.
/// Boolean Warshall closure over the edge relation `from -> to`.
pub fn reachability(g: &DirectedWeightedGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut r = vec![vec![false; n]; n];
    for (u, row) in r.iter_mut().enumerate() {
        row[u] = true;
        for (v, cell) in row.iter_mut().enumerate() {
            if g.weights()[(v, u)] > 0.0 {
                *cell = true;
            }
        }
    }
    for m in 0..n {
        let via = r[m].clone();
        for row in r.iter_mut().filter(|row| row[m]) {
            for (dst, &src) in row.iter_mut().zip(&via) {
                *dst |= src;
            }
        }
    }
    r
}

/// Strong components from mutual reachability, each sorted, listed by
/// smallest member.
pub fn components(reach: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = reach.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for u in 0..n {
        if seen[u] {
            continue;
        }
        let c: Vec<usize> = (0..n).filter(|&v| reach[u][v] && reach[v][u]).collect();
        for &v in &c {
            seen[v] = true;
        }
        out.push(c);
    }
    out
}

/// Components that no outside node can reach.
pub fn basic_components(reach: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = reach.len();
    components(reach)
        .into_iter()
        .filter(|c| (0..n).all(|u| c.contains(&u) || !reach[u][c[0]]))
        .collect()
}

/// Some node reaches every node.
pub fn has_root(reach: &[Vec<bool>]) -> bool {
    reach.iter().any(|row| row.iter().all(|&b| b))
}

/// Kernel vector of `L` equal to 1 on `basic[i]` and 0 on the other basic
/// components, in original node order. Solved as a bordered least-squares
/// system `[L; E] v = [0; e]` by SVD.
pub fn kernel_column_oracle(l: &DMatrix<f64>, basic: &[Vec<usize>], i: usize) -> DVector<f64> {
    let n = l.nrows();
    let pinned: Vec<(usize, f64)> = basic
        .iter()
        .enumerate()
        .flat_map(|(b, c)| c.iter().map(move |&v| (v, if b == i { 1.0 } else { 0.0 })))
        .collect();
    let mut a = DMatrix::zeros(n + pinned.len(), n);
    a.rows_mut(0, n).copy_from(l);
    let mut rhs = DVector::zeros(n + pinned.len());
    for (r, &(v, val)) in pinned.iter().enumerate() {
        a[(n + r, v)] = 1.0;
        rhs[n + r] = val;
    }
    a.svd(true, true).solve(&rhs, 1e-12).unwrap()
}

/// Consensus weight vector of a strongly connected Laplacian block: solves
/// `w^T L = 0` with one equation replaced by `sum w = 1`, via LU.
pub fn consensus_weights_oracle(l_sub: &DMatrix<f64>) -> DVector<f64> {
    let n = l_sub.nrows();
    let mut a = l_sub.transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    a.lu().solve(&rhs).expect("strongly connected block")
}

pub fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

pub fn single_integrator_network(g: &DirectedWeightedGraph) -> NetworkSystem {
    let agents = vec![single_integrator(); g.node_count()];
    assemble_network(agents, &g.laplacian()).unwrap()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// The hub graph: nodes 0 and 1 feed node 2 with weights 1 and 3.
pub fn hub() -> DirectedWeightedGraph {
    DirectedWeightedGraph::from_edges(3, &[(0, 2, 1.0), (1, 2, 3.0)]).unwrap()
}
