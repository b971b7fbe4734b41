//! Fixed-step integration of the closed-loop network and the superposition
//! split over basic bicomponents.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::agent::{NetworkSystem, TimeDomain};
use crate::error::{Error, Result};
use crate::graph::BicomponentDecomposition;
use crate::kernel::{KernelStructure, SUPPORT_TOL};
use crate::linalg;

/// States with `|x|_inf` above this abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub time_domain: TimeDomain,
    /// Integration step (continuous time only).
    pub step: f64,
    /// Final time, or number of steps in discrete time.
    pub horizon: f64,
    pub sample_stride: usize,
    pub initial_state: Vec<f64>,
}

impl SimConfig {
    pub fn continuous(initial_state: Vec<f64>) -> Self {
        Self {
            time_domain: TimeDomain::Continuous,
            step: 0.01,
            horizon: 50.0,
            sample_stride: 10,
            initial_state,
        }
    }

    pub fn discrete(initial_state: Vec<f64>) -> Self {
        Self {
            time_domain: TimeDomain::Discrete,
            step: 1.0,
            horizon: 500.0,
            sample_stride: 10,
            initial_state,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Self {
        self.initial_state = x0;
        self
    }

    /// Number of integration steps.
    pub fn step_count(&self) -> usize {
        match self.time_domain {
            TimeDomain::Continuous => (self.horizon / self.step).round() as usize,
            TimeDomain::Discrete => self.horizon.round() as usize,
        }
    }

    fn step_size(&self) -> f64 {
        match self.time_domain {
            TimeDomain::Continuous => self.step,
            TimeDomain::Discrete => 1.0,
        }
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.time_domain == TimeDomain::Continuous && !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::validation(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::validation(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.time_domain == TimeDomain::Discrete && self.horizon.fract() != 0.0 {
            return Err(Error::validation(format!(
                "discrete horizon must be a whole number of steps, got {}",
                self.horizon
            )));
        }
        if self.step_count() == 0 {
            return Err(Error::validation("horizon is shorter than one step"));
        }
        if self.sample_stride == 0 {
            return Err(Error::validation("sample_stride must be at least 1"));
        }
        if self.initial_state.len() != state_dim {
            return Err(Error::dimension(
                "initial state length",
                state_dim,
                self.initial_state.len(),
            ));
        }
        Ok(())
    }
}

/// Sampled run of a network. Each sample row of `outputs`/`signals` is the
/// stacked vector over agents (`agent_count * output_dim` entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent_count: usize,
    pub output_dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// Stacked `zeta`.
    pub signals: Vec<Vec<f64>>,
    /// Stacked `zeta_hat`; empty rows when agents exchange nothing.
    pub exchange: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Output of `agent` at sample `t`.
    pub fn output(&self, t: usize, agent: usize) -> &[f64] {
        let p = self.output_dim;
        &self.outputs[t][agent * p..(agent + 1) * p]
    }

    pub fn signal(&self, t: usize, agent: usize) -> &[f64] {
        let p = self.output_dim;
        &self.signals[t][agent * p..(agent + 1) * p]
    }

    pub fn exchange_dim(&self) -> usize {
        match self.exchange.first() {
            Some(row) if self.agent_count > 0 => row.len() / self.agent_count,
            _ => 0,
        }
    }
}

struct Recorder<'a> {
    output_map: &'a DMatrix<f64>,
    zeta_map: DMatrix<f64>,
    exchange_map: DMatrix<f64>,
    tr: Trajectory,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, x: &DVector<f64>) {
        self.tr.times.push(t);
        self.tr.states.push(x.as_slice().to_vec());
        self.tr.outputs.push((self.output_map * x).as_slice().to_vec());
        self.tr.signals.push((&self.zeta_map * x).as_slice().to_vec());
        self.tr
            .exchange
            .push((&self.exchange_map * x).as_slice().to_vec());
    }
}

fn check_finite(x: &DVector<f64>, t: f64) -> Result<()> {
    let norm = linalg::inf_norm(x.as_slice());
    if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
        return Err(Error::Diverged { time: t, norm });
    }
    Ok(())
}

/// One classical RK4 step of `x' = M x`.
pub fn rk4_step(m: &DMatrix<f64>, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = m * x;
    let k2 = m * (x + &k1 * (h / 2.0));
    let k3 = m * (x + &k2 * (h / 2.0));
    let k4 = m * (x + &k3 * h);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrates `x+ = M x` and records every `sample_stride`-th step plus the
/// final one.
pub fn simulate(sys: &NetworkSystem, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate(sys.state_dim())?;
    let m = sys.system_matrix();
    let steps = cfg.step_count();
    let h = cfg.step_size();
    let mut rec = Recorder {
        output_map: sys.output_map(),
        zeta_map: sys.zeta_map(),
        exchange_map: sys.exchange_map(),
        tr: Trajectory {
            agent_count: sys.agent_count(),
            output_dim: sys.output_dim(),
            times: Vec::with_capacity(steps / cfg.sample_stride + 2),
            states: Vec::new(),
            outputs: Vec::new(),
            signals: Vec::new(),
            exchange: Vec::new(),
        },
    };

    let mut x = DVector::from_column_slice(&cfg.initial_state);
    check_finite(&x, 0.0)?;
    rec.record(0.0, &x);
    for i in 1..=steps {
        x = match cfg.time_domain {
            TimeDomain::Continuous => rk4_step(m, &x, h),
            TimeDomain::Discrete => m * &x,
        };
        let t = i as f64 * h;
        check_finite(&x, t)?;
        if i % cfg.sample_stride == 0 || i == steps {
            rec.record(t, &x);
        }
    }
    Ok(rec.tr)
}

/// Splits `x0` into one initial condition per basic bicomponent. Agents in a
/// basic bicomponent go to that bicomponent; a non-basic agent goes to the
/// smallest-index bicomponent with a positive `beta` entry for it.
pub fn superposition_split(
    sys: &NetworkSystem,
    x0: &[f64],
    d: &BicomponentDecomposition,
    ks: &KernelStructure,
) -> Result<Vec<Vec<f64>>> {
    if x0.len() != sys.state_dim() {
        return Err(Error::dimension("initial state length", sys.state_dim(), x0.len()));
    }
    let k = d.k();
    let mut owner = vec![usize::MAX; sys.agent_count()];
    for (row, &node) in d.nonbasic_nodes().iter().enumerate() {
        owner[node] = (0..k)
            .find(|&i| ks.beta()[(row, i)] > SUPPORT_TOL)
            .ok_or_else(|| {
                Error::Structural(format!("non-basic node {node} has no positive beta entry"))
            })?;
    }
    for i in 0..k {
        for &node in d.basic_component(i) {
            owner[node] = i;
        }
    }
    let mut splits = vec![vec![0.0; x0.len()]; k];
    for (agent, &i) in owner.iter().enumerate() {
        let range = sys.state_range(agent);
        splits[i][range.clone()].copy_from_slice(&x0[range]);
    }
    Ok(splits)
}

/// Runs the full initial condition and every split under the same config and
/// returns `max_t |sum_i x^i(t) - x(t)|_inf`.
pub fn verify_superposition(
    sys: &NetworkSystem,
    cfg: &SimConfig,
    splits: &[Vec<f64>],
) -> Result<f64> {
    let full = simulate(sys, cfg)?;
    let parts = splits
        .iter()
        .map(|x0| simulate(sys, &cfg.clone().with_initial_state(x0.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0_f64;
    for (t, x) in full.states.iter().enumerate() {
        for (idx, &xv) in x.iter().enumerate() {
            let sum: f64 = parts.iter().map(|p| p.states[t][idx]).sum();
            worst = worst.max((sum - xv).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{assemble_network, direct_closed_loop, single_integrator};
    use crate::graph::{canonical_laplacian, decompose_bicomponents, DirectedWeightedGraph};

    fn scalar_system(a: f64) -> NetworkSystem {
        let agent = direct_closed_loop(
            DMatrix::from_element(1, 1, a),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let g = DirectedWeightedGraph::empty(1).unwrap();
        assemble_network(vec![agent], &g.laplacian()).unwrap()
    }

    #[test]
    fn exponential_decay() {
        let sys = scalar_system(-1.0);
        let cfg = SimConfig::continuous(vec![1.0]).with_horizon(1.0).with_stride(1);
        let tr = simulate(&sys, &cfg).unwrap();
        assert_eq!(tr.len(), 101);
        let x1 = tr.states.last().unwrap()[0];
        assert!((x1 - 0.367_879_4).abs() < 1e-6, "{x1}");
        assert!((x1 - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_is_constant() {
        let sys = scalar_system(0.0);
        let tr = simulate(&sys, &SimConfig::continuous(vec![3.5]).with_horizon(2.0)).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 3.5));
    }

    #[test]
    fn chain_pair_signal() {
        let g = DirectedWeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let sys = assemble_network(vec![single_integrator(); 2], &g.laplacian()).unwrap();
        let cfg = SimConfig::continuous(vec![0.0, 1.0]).with_horizon(5.0);
        let tr = simulate(&sys, &cfg).unwrap();
        for (t, sig) in tr.times.iter().zip(&tr.signals) {
            assert_eq!(sig[0], 0.0);
            assert!((sig[1] - (-t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn samples_include_final_step() {
        let sys = scalar_system(0.0);
        let cfg = SimConfig::continuous(vec![1.0]).with_horizon(0.25).with_stride(10);
        let tr = simulate(&sys, &cfg).unwrap();
        assert_eq!(tr.times.len(), 4);
        assert!((tr.times[3] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn divergence_guard_reports_time() {
        let sys = scalar_system(50.0);
        let err = simulate(&sys, &SimConfig::continuous(vec![1.0]).with_horizon(10.0)).unwrap_err();
        match err {
            Error::Diverged { time, .. } => assert!(time > 0.0 && time < 1.0, "{time}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn config_validation() {
        let sys = scalar_system(0.0);
        assert!(simulate(&sys, &SimConfig::continuous(vec![1.0, 2.0])).is_err());
        assert!(simulate(&sys, &SimConfig::continuous(vec![1.0]).with_step(0.0)).is_err());
        assert!(simulate(&sys, &SimConfig::discrete(vec![1.0]).with_horizon(2.5)).is_err());
        assert!(simulate(&sys, &SimConfig::continuous(vec![1.0]).with_stride(0)).is_err());
    }

    #[test]
    fn discrete_matches_matrix_powers() {
        let g = DirectedWeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 0.5), (2, 0, 1.0)])
            .unwrap();
        let agent = crate::agent::scaled_integrator(1.0, -0.25);
        let sys = assemble_network(vec![agent; 3], &g.laplacian()).unwrap();
        let x0 = vec![1.0, -2.0, 0.5];
        let tr = simulate(&sys, &SimConfig::discrete(x0.clone()).with_horizon(20.0).with_stride(1)).unwrap();
        let mut x = DVector::from_vec(x0);
        for t in 0..=20 {
            assert_eq!(tr.states[t], x.as_slice());
            x = sys.system_matrix() * &x;
        }
    }

    fn hub() -> (NetworkSystem, BicomponentDecomposition, KernelStructure) {
        let g = DirectedWeightedGraph::from_edges(3, &[(0, 2, 1.0), (1, 2, 3.0)]).unwrap();
        let d = decompose_bicomponents(&g);
        let ks = KernelStructure::compute(&canonical_laplacian(&g.laplacian(), &d)).unwrap();
        let sys = assemble_network(vec![single_integrator(); 3], &g.laplacian()).unwrap();
        (sys, d, ks)
    }

    #[test]
    fn hub_split_assigns_sink_to_first_source() {
        let (sys, d, ks) = hub();
        // node order 0,1,2; node 2 is the sink
        let splits = superposition_split(&sys, &[2.0, 6.0, 9.0], &d, &ks).unwrap();
        assert_eq!(splits, vec![vec![2.0, 0.0, 9.0], vec![0.0, 6.0, 0.0]]);
        let dev = verify_superposition(&sys, &SimConfig::continuous(vec![2.0, 6.0, 9.0]), &splits)
            .unwrap();
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn single_basic_split_is_identity() {
        let g = DirectedWeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let d = decompose_bicomponents(&g);
        let ks = KernelStructure::compute(&canonical_laplacian(&g.laplacian(), &d)).unwrap();
        let sys = assemble_network(vec![single_integrator(); 2], &g.laplacian()).unwrap();
        let x0 = vec![0.3, -1.7];
        let splits = superposition_split(&sys, &x0, &d, &ks).unwrap();
        assert_eq!(splits, vec![x0.clone()]);
        let dev = verify_superposition(&sys, &SimConfig::continuous(x0).with_horizon(3.0), &splits)
            .unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn split_without_nonbasic_is_partition() {
        let g = DirectedWeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let d = decompose_bicomponents(&g);
        let ks = KernelStructure::compute(&canonical_laplacian(&g.laplacian(), &d)).unwrap();
        let sys = assemble_network(vec![single_integrator(); 3], &g.laplacian()).unwrap();
        let splits = superposition_split(&sys, &[1.0, 2.0, 3.0], &d, &ks).unwrap();
        assert_eq!(splits, vec![vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]]);
    }
}
