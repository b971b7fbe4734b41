//! Random graphs with a prescribed bicomponent structure.
//!
//! Components are laid out in order: first the basic ones, then the
//! non-basic ones. Each component is a directed Hamiltonian cycle plus
//! Bernoulli(`density`) chords. Edges between components only run from an
//! earlier component to a later one, and only into non-basic components,
//! so the condensation is acyclic and the basic/non-basic split is fixed
//! by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{decompose_bicomponents, DirectedWeightedGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredGraphSpec {
    pub basic_sizes: Vec<usize>,
    #[serde(default)]
    pub nonbasic_sizes: Vec<usize>,
    /// Probability of each chord inside a component and of each
    /// downstream node pair between components.
    #[serde(default = "default_density")]
    pub inter_edge_density: f64,
    #[serde(default = "default_weights")]
    pub weight_range: [f64; 2],
}

fn default_density() -> f64 {
    0.3
}

fn default_weights() -> [f64; 2] {
    [0.5, 1.5]
}

impl StructuredGraphSpec {
    pub fn new(basic_sizes: Vec<usize>, nonbasic_sizes: Vec<usize>) -> Self {
        Self {
            basic_sizes,
            nonbasic_sizes,
            inter_edge_density: default_density(),
            weight_range: default_weights(),
        }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.inter_edge_density = density;
        self
    }

    /// Three basic bicomponents of 30, 8 and 4 nodes feeding three
    /// non-basic ones of 10, 6 and 10 nodes.
    pub fn fault_scenario() -> Self {
        Self::new(vec![30, 8, 4], vec![10, 6, 10])
    }

    pub fn node_count(&self) -> usize {
        self.basic_sizes.iter().chain(&self.nonbasic_sizes).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.basic_sizes.is_empty() {
            return Err(Error::validation("at least one basic bicomponent is required"));
        }
        if self
            .basic_sizes
            .iter()
            .chain(&self.nonbasic_sizes)
            .any(|&s| s == 0)
        {
            return Err(Error::validation("component sizes must be at least 1"));
        }
        let d = self.inter_edge_density;
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::validation(format!(
                "inter_edge_density must lie in (0, 1], got {d}"
            )));
        }
        let [lo, hi] = self.weight_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::validation(format!(
                "weight_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

pub fn generate_structured(spec: &StructuredGraphSpec, seed: u64) -> Result<DirectedWeightedGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = spec.weight_range;
    let density = spec.inter_edge_density;
    let weight = |rng: &mut ChaCha8Rng| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };

    let sizes: Vec<usize> = spec
        .basic_sizes
        .iter()
        .chain(&spec.nonbasic_sizes)
        .copied()
        .collect();
    let mut ranges = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in &sizes {
        ranges.push(start..start + s);
        start += s;
    }
    let n = start;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut present = vec![false; n * n];
    let mut add = |from: usize, to: usize, w: f64, edges: &mut Vec<_>| {
        if !present[from * n + to] {
            present[from * n + to] = true;
            edges.push((from, to, w));
        }
    };

    for r in &ranges {
        let nodes: Vec<usize> = r.clone().collect();
        let m = nodes.len();
        if m > 1 {
            for idx in 0..m {
                let w = weight(&mut rng);
                add(nodes[idx], nodes[(idx + 1) % m], w, &mut edges);
            }
        }
        for &u in &nodes {
            for &v in &nodes {
                if u != v && rng.random_bool(density) {
                    let w = weight(&mut rng);
                    add(u, v, w, &mut edges);
                }
            }
        }
    }

    let first_nonbasic = spec.basic_sizes.len();
    for c in first_nonbasic..ranges.len() {
        let src = rng.random_range(0..c);
        let from = rng.random_range(ranges[src].clone());
        let to = rng.random_range(ranges[c].clone());
        let w = weight(&mut rng);
        add(from, to, w, &mut edges);
        for earlier in &ranges[..c] {
            for u in earlier.clone() {
                for v in ranges[c].clone() {
                    if rng.random_bool(density) {
                        let w = weight(&mut rng);
                        add(u, v, w, &mut edges);
                    }
                }
            }
        }
    }

    let g = DirectedWeightedGraph::from_edges(n, &edges)?;
    post_check(spec, &g)?;
    Ok(g)
}

fn post_check(spec: &StructuredGraphSpec, g: &DirectedWeightedGraph) -> Result<()> {
    let d = decompose_bicomponents(g);
    let mut basic: Vec<usize> = d.basic_components().map(<[usize]>::len).collect();
    let mut nonbasic: Vec<usize> = d
        .components()
        .iter()
        .zip(d.basic_flags())
        .filter(|(_, &b)| !b)
        .map(|(c, _)| c.len())
        .collect();
    let mut want_basic = spec.basic_sizes.clone();
    let mut want_nonbasic = spec.nonbasic_sizes.clone();
    for v in [&mut basic, &mut nonbasic, &mut want_basic, &mut want_nonbasic] {
        v.sort_unstable();
    }
    if basic != want_basic || nonbasic != want_nonbasic {
        return Err(Error::Structural(format!(
            "generated graph has basic sizes {basic:?} and non-basic sizes {nonbasic:?}, \
             expected {want_basic:?} and {want_nonbasic:?}"
        )));
    }
    Ok(())
}
