mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use weaksync::agent::{assemble_network, direct_closed_loop};
use weaksync::analysis::{
    check_network_stability, check_output_sync, sync_report, ConvergenceCriterion,
};
use weaksync::graph::{canonical_laplacian, decompose_bicomponents, DirectedWeightedGraph};
use weaksync::kernel::KernelStructure;
use weaksync::sim::{simulate, SimConfig};

/// A lone agent with dynamics `x' = m x` and a trivial one-node network.
fn autonomous(m: DMatrix<f64>) -> weaksync::agent::NetworkSystem {
    let s = m.nrows();
    let h = DMatrix::from_fn(1, s, |_, c| if c == 0 { 1.0 } else { 0.0 });
    let agent = direct_closed_loop(m, DMatrix::zeros(s, 1), h.clone(), h).unwrap();
    let g = DirectedWeightedGraph::empty(1).unwrap();
    assemble_network(vec![agent], &g.laplacian()).unwrap()
}

/// Symmetric part negative definite, so every eigenvalue has real part
/// at most -0.5.
fn random_stable(rng: &mut rand_chacha::ChaCha8Rng, s: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(s, s, |_, _| rng.random_range(-1.0..1.0));
    let k = DMatrix::from_fn(s, s, |_, _| rng.random_range(-1.0..1.0));
    -(r.transpose() * &r) * 0.25 - DMatrix::identity(s, s) * 0.5 + (&k - k.transpose()) * 0.5
}

fn rk4_error(m: &DMatrix<f64>, x0: &[f64], h: f64, t: f64) -> f64 {
    let sys = autonomous(m.clone());
    let cfg = SimConfig::continuous(x0.to_vec()).with_step(h).with_horizon(t).with_stride(1000);
    let tr = simulate(&sys, &cfg).unwrap();
    assert_eq!(*tr.times.last().unwrap(), t);
    let exact = (m * t).exp() * DVector::from_column_slice(x0);
    (DVector::from_column_slice(tr.states.last().unwrap()) - exact).amax()
}

#[test]
fn rk4_error_shrinks_sixteenfold() {
    let mut rng = common::rng(4);
    for _ in 0..10 {
        let m = random_stable(&mut rng, 4);
        let x0 = common::uniform_vec(&mut rng, 4, -1.0, 1.0);
        let ratio = rk4_error(&m, &x0, 0.1, 2.0) / rk4_error(&m, &x0, 0.05, 2.0);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn rooted_graphs_reach_consensus_when_stable() {
    let mut rng = common::rng(77);
    let c = ConvergenceCriterion::continuous_default();
    let mut stable_runs = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let g = common::random_rooted_digraph(&mut rng, n, 0.3);
        let sys = common::single_integrator_network(&g);
        let x0 = common::uniform_vec(&mut rng, n, -10.0, 10.0);
        let tr = simulate(&sys, &SimConfig::continuous(x0)).unwrap();
        let all: Vec<usize> = (0..n).collect();
        if check_network_stability(&tr, &c).unwrap().passed {
            stable_runs += 1;
            assert!(check_output_sync(&tr, &all, &c).unwrap().passed);
        }
    }
    assert!(stable_runs >= 45, "only {stable_runs} of 50 runs converged");
}

#[test]
fn hub_limits_respond_linearly_to_basic_initial_conditions() {
    let g = common::hub();
    let sys = common::single_integrator_network(&g);
    let d = decompose_bicomponents(&g);
    let ks = KernelStructure::compute(&canonical_laplacian(&g.laplacian(), &d)).unwrap();
    let c = ConvergenceCriterion::continuous_default();
    let limit = |x0: Vec<f64>| {
        let tr = simulate(&sys, &SimConfig::continuous(x0)).unwrap();
        let r = sync_report(&tr, &d, &ks, &c).unwrap();
        assert!(r.passed());
        tr.output(tr.len() - 1, 2)[0]
    };
    let (c1, c2) = (1.3, -4.0);
    let base = limit(vec![c1, c2, 7.0]);
    let doubled = limit(vec![2.0 * c1, c2, 7.0]);
    assert!((base - (0.25 * c1 + 0.75 * c2)).abs() < 1e-4);
    assert!((doubled - base - 0.25 * c1).abs() < 1e-4);
}

#[test]
fn chain_decays_like_exponential() {
    let g = DirectedWeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
    let sys = common::single_integrator_network(&g);
    let tr = simulate(&sys, &SimConfig::continuous(vec![0.0, 1.0]).with_horizon(5.0)).unwrap();
    for t in 0..tr.len() {
        assert!((tr.signal(t, 1)[0] - (-tr.times[t]).exp()).abs() < 1e-6);
        assert_eq!(tr.signal(t, 0)[0], 0.0);
    }
}
