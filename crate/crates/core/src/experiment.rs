//! Config-driven experiments: graph -> decomposition -> closed-loop network
//! -> simulation -> verdicts, plus the structural `analyze` report.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    assemble_closed_loop, assemble_network, direct_closed_loop, scaled_integrator,
    single_integrator, AgentModel, ClosedLoopAgent, DynamicProtocol, NetworkSystem, TimeDomain,
};
use crate::analysis::{sync_report, ConvergenceCriterion, SyncReport};
use crate::error::{Error, Result};
use crate::generate::{generate_structured, StructuredGraphSpec};
use crate::graph::{
    canonical_laplacian, decompose_bicomponents, has_directed_spanning_tree, laplacian_rank,
    BicomponentDecomposition, CanonicalLaplacian, DirectedWeightedGraph,
};
use crate::io::{self, GraphSpec};
use crate::kernel::{scaled_reduction, KernelStructure};
use crate::matrix::DenseMatrix;
use crate::models::builtin_model;
use crate::plot;
use crate::sim::{simulate, superposition_split, verify_superposition, SimConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Inline(GraphSpec),
    File(PathBuf),
    Generate(StructuredGraphSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSelector {
    /// The string `"all"`.
    All(String),
    /// One-based node numbers.
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Builtin(String),
    Inline(AgentModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectBlocks {
    pub a_t: DenseMatrix,
    pub b_t: DenseMatrix,
    pub c_t: DenseMatrix,
    pub h_t: DenseMatrix,
}

/// Closed loops given directly. Named variants:
///
/// * `single-integrator`: `x' = -zeta`.
/// * `discrete-consensus`: `x+ = x - eps zeta` with
///   `eps = 1 / (2 max_i l_ii)` taken from the network's Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectSpec {
    Named(String),
    Blocks(DirectBlocks),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentAssignment {
    pub nodes: NodeSelector,
    #[serde(default)]
    pub model: Option<ModelRef>,
    #[serde(default)]
    pub protocol: Option<DynamicProtocol>,
    #[serde(default)]
    pub direct: Option<DirectSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Explicit(Vec<f64>),
    Random { uniform: [f64; 2] },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Random {
            uniform: [-10.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "continuous")]
    pub time_domain: TimeDomain,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Defaults to 50 (continuous) or 500 steps (discrete).
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub initial_state: InitialState,
}

fn continuous() -> TimeDomain {
    TimeDomain::Continuous
}

fn default_step() -> f64 {
    0.01
}

fn default_stride() -> usize {
    10
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            time_domain: continuous(),
            step: default_step(),
            horizon: None,
            sample_stride: default_stride(),
            initial_state: InitialState::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub report: bool,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            csv: true,
            report: true,
            plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub agents: Vec<AgentAssignment>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub criteria: Option<ConvergenceCriterion>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub outputs: OutputSection,
}

impl ExperimentConfig {
    /// Parses JSON, reporting the failing field path on error.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Command-line style overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(h) = self.horizon {
            cfg.sim.horizon = Some(h);
        }
        if let Some(h) = self.step {
            cfg.sim.step = h;
        }
        if let Some(eps) = self.epsilon {
            let mut c = cfg.criteria.unwrap_or_else(|| default_criterion(cfg.sim.time_domain));
            c.epsilon = eps;
            cfg.criteria = Some(c);
        }
    }
}

fn default_criterion(td: TimeDomain) -> ConvergenceCriterion {
    match td {
        TimeDomain::Continuous => ConvergenceCriterion::continuous_default(),
        TimeDomain::Discrete => ConvergenceCriterion::discrete_default(),
    }
}

/// Everything derived from a config before simulation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: DirectedWeightedGraph,
    pub decomposition: BicomponentDecomposition,
    pub canonical: CanonicalLaplacian,
    pub kernel: KernelStructure,
    pub system: NetworkSystem,
    pub sim: SimConfig,
    pub criterion: ConvergenceCriterion,
}

fn resolve_graph(cfg: &ExperimentConfig, base_dir: &Path) -> Result<DirectedWeightedGraph> {
    match &cfg.graph {
        GraphSource::Inline(spec) => spec
            .to_graph()
            .map_err(|e| Error::config("graph.inline", e.to_string())),
        GraphSource::File(p) => {
            let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
            io::load_graph(&path)
        }
        GraphSource::Generate(spec) => {
            let seed = cfg
                .seed
                .ok_or_else(|| Error::config("seed", "a seed is required with a graph generator"))?;
            spec.validate()
                .map_err(|e| Error::config("graph.generate", e.to_string()))?;
            generate_structured(spec, seed)
        }
    }
}

fn build_agent(
    idx: usize,
    a: &AgentAssignment,
    td: TimeDomain,
    graph: &DirectedWeightedGraph,
) -> Result<ClosedLoopAgent> {
    let path = |field: &str| format!("agents[{idx}].{field}");
    match (&a.direct, &a.model, &a.protocol) {
        (Some(direct), None, None) => match direct {
            DirectSpec::Named(name) => match name.as_str() {
                "single-integrator" => {
                    if td != TimeDomain::Continuous {
                        return Err(Error::config(path("direct"), "single-integrator is continuous-time"));
                    }
                    Ok(single_integrator())
                }
                "discrete-consensus" => {
                    if td != TimeDomain::Discrete {
                        return Err(Error::config(path("direct"), "discrete-consensus is discrete-time"));
                    }
                    let l = graph.laplacian();
                    let max_deg = (0..l.size()).map(|i| l[(i, i)]).fold(0.0, f64::max);
                    let eps = if max_deg > 0.0 { 1.0 / (2.0 * max_deg) } else { 0.5 };
                    Ok(scaled_integrator(1.0, -eps))
                }
                other => Err(Error::config(path("direct"), format!("unknown direct closed loop `{other}`"))),
            },
            DirectSpec::Blocks(b) => {
                let m = |d: &DenseMatrix, f: &str| {
                    d.to_matrix()
                        .map_err(|e| Error::config(path(&format!("direct.{f}")), e.to_string()))
                };
                direct_closed_loop(m(&b.a_t, "a_t")?, m(&b.b_t, "b_t")?, m(&b.c_t, "c_t")?, m(&b.h_t, "h_t")?)
                    .map_err(|e| Error::config(path("direct"), e.to_string()))
            }
        },
        (None, Some(model), Some(protocol)) => {
            let model = match model {
                ModelRef::Builtin(name) => builtin_model(name)
                    .map_err(|e| Error::config(path("model"), e.to_string()))?,
                ModelRef::Inline(m) => m.clone(),
            };
            if model.time_domain != td {
                return Err(Error::config(
                    path("model"),
                    format!("model is {:?} but the simulation is {:?}", model.time_domain, td),
                ));
            }
            assemble_closed_loop(&model, protocol)
                .map_err(|e| Error::config(path("protocol"), e.to_string()))
        }
        _ => Err(Error::config(
            format!("agents[{idx}]"),
            "give either `direct`, or both `model` and `protocol`",
        )),
    }
}

fn assign_agents(cfg: &ExperimentConfig, graph: &DirectedWeightedGraph) -> Result<Vec<ClosedLoopAgent>> {
    let n = graph.node_count();
    let mut slots: Vec<Option<ClosedLoopAgent>> = vec![None; n];
    for (idx, a) in cfg.agents.iter().enumerate() {
        let nodes: Vec<usize> = match &a.nodes {
            NodeSelector::All(s) if s == "all" => (1..=n).collect(),
            NodeSelector::All(s) => {
                return Err(Error::config(
                    format!("agents[{idx}].nodes"),
                    format!("expected \"all\" or a list of node numbers, got \"{s}\""),
                ))
            }
            NodeSelector::List(v) => v.clone(),
        };
        let agent = build_agent(idx, a, cfg.sim.time_domain, graph)?;
        for v in nodes {
            if v == 0 || v > n {
                return Err(Error::config(
                    format!("agents[{idx}].nodes"),
                    format!("node {v} is outside 1..={n}"),
                ));
            }
            if slots[v - 1].is_some() {
                return Err(Error::config(
                    format!("agents[{idx}].nodes"),
                    format!("node {v} is assigned more than once"),
                ));
            }
            slots[v - 1] = Some(agent.clone());
        }
    }
    let missing: Vec<usize> = (0..n).filter(|&i| slots[i].is_none()).map(|i| i + 1).collect();
    if !missing.is_empty() {
        return Err(Error::config(
            "agents",
            format!("{} agents assigned for {n} nodes; missing nodes {missing:?}", n - missing.len()),
        ));
    }
    Ok(slots.into_iter().map(|s| s.expect("checked")).collect())
}

pub fn prepare(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Prepared> {
    let graph = resolve_graph(cfg, base_dir)?;
    let decomposition = decompose_bicomponents(&graph);
    let canonical = canonical_laplacian(&graph.laplacian(), &decomposition);
    let kernel = KernelStructure::compute(&canonical)?;
    let agents = assign_agents(cfg, &graph)?;
    let system = assemble_network(agents, &graph.laplacian())
        .map_err(|e| Error::config("agents", e.to_string()))?;

    let td = cfg.sim.time_domain;
    let initial_state = match &cfg.sim.initial_state {
        InitialState::Explicit(v) => v.clone(),
        InitialState::Random { uniform: [lo, hi] } => {
            let seed = cfg.seed.ok_or_else(|| {
                Error::config("seed", "a seed is required for a random initial state")
            })?;
            if !(lo < hi) {
                return Err(Error::config(
                    "sim.initial_state.uniform",
                    format!("expected lo < hi, got [{lo}, {hi}]"),
                ));
            }
            // Offset so the state draw is independent of the graph draw.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            (0..system.state_dim()).map(|_| rng.random_range(*lo..*hi)).collect()
        }
    };
    let horizon = cfg.sim.horizon.unwrap_or(match td {
        TimeDomain::Continuous => 50.0,
        TimeDomain::Discrete => 500.0,
    });
    let sim = SimConfig {
        time_domain: td,
        step: cfg.sim.step,
        horizon,
        sample_stride: cfg.sim.sample_stride,
        initial_state,
    };
    sim.validate(system.state_dim())
        .map_err(|e| Error::config("sim", e.to_string()))?;
    let criterion = cfg.criteria.unwrap_or_else(|| default_criterion(td));
    criterion
        .validate()
        .map_err(|e| Error::config("criteria", e.to_string()))?;

    Ok(Prepared {
        graph,
        decomposition,
        canonical,
        kernel,
        system,
        sim,
        criterion,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub analysis: AnalyzeReport,
    pub sync: SyncReport,
    pub superposition_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub trajectory: Trajectory,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed
    }
}

/// Runs the full pipeline and writes the requested artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path) -> Result<ExperimentOutcome> {
    let prep = prepare(cfg, base_dir)?;
    let trajectory = simulate(&prep.system, &prep.sim)?;
    let sync = sync_report(&trajectory, &prep.decomposition, &prep.kernel, &prep.criterion)?;
    let splits = superposition_split(
        &prep.system,
        &prep.sim.initial_state,
        &prep.decomposition,
        &prep.kernel,
    )?;
    let superposition_deviation = verify_superposition(&prep.system, &prep.sim, &splits)?;
    let analysis = analyze(&prep.graph)?;
    let passed = sync.passed();
    let report = ExperimentReport {
        analysis,
        sync,
        superposition_deviation,
        passed,
    };

    let mut files = Vec::new();
    if cfg.outputs.csv || cfg.outputs.report || cfg.outputs.plots {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    }
    if cfg.outputs.csv {
        let path = out_dir.join("trajectory.csv");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        io::write_trajectory_csv(&trajectory, std::io::BufWriter::new(f))?;
        files.push(path);
    }
    if cfg.outputs.report {
        let path = out_dir.join("report.json");
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    if cfg.outputs.plots {
        files.extend(plot::emit_plots(&trajectory, &report.sync, out_dir)?);
    }
    Ok(ExperimentOutcome {
        report,
        trajectory,
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionSummary {
    /// One-based bicomponent number.
    pub bicomponent: usize,
    /// One-based node numbers.
    pub support: Vec<usize>,
    pub gamma: Vec<f64>,
    pub rank: usize,
    pub expected_rank: usize,
    pub max_row_sum: f64,
}

/// Structural report of a graph. All node numbers are one-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub n: usize,
    pub components: Vec<Vec<usize>>,
    pub basic: Vec<bool>,
    pub k: usize,
    pub block_sizes: Vec<usize>,
    pub canonical_order: Vec<usize>,
    pub has_spanning_tree: bool,
    pub laplacian_rank: usize,
    /// Non-basic nodes, one per row of `beta`.
    pub nonbasic_nodes: Vec<usize>,
    pub beta: Vec<Vec<f64>>,
    /// Rows follow `canonical_order`.
    pub kernel_basis: Vec<Vec<f64>>,
    pub reductions: Vec<ReductionSummary>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn analyze(g: &DirectedWeightedGraph) -> Result<AnalyzeReport> {
    let d = decompose_bicomponents(g);
    let l = g.laplacian();
    let c = canonical_laplacian(&l, &d);
    let ks = KernelStructure::compute(&c)?;
    let one = |v: &[usize]| v.iter().map(|x| x + 1).collect::<Vec<_>>();
    let reductions = (0..d.k())
        .map(|i| {
            let r = scaled_reduction(&c, &ks, i)?;
            Ok(ReductionSummary {
                bicomponent: i + 1,
                support: one(&r.support),
                gamma: r.gamma.iter().copied().collect(),
                rank: r.rank(),
                expected_rank: r.support_size() - 1,
                max_row_sum: r.max_row_sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalyzeReport {
        n: g.node_count(),
        components: d.components().iter().map(|c| one(c)).collect(),
        basic: d.basic_flags().to_vec(),
        k: d.k(),
        block_sizes: d.block_sizes().to_vec(),
        canonical_order: one(d.canonical_order()),
        has_spanning_tree: has_directed_spanning_tree(&d),
        laplacian_rank: laplacian_rank(&l),
        nonbasic_nodes: one(d.nonbasic_nodes()),
        beta: rows(ks.beta()),
        kernel_basis: rows(ks.kernel_basis()),
        reductions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HUB: &str = r#"{
        "graph": {"inline": {"n": 3, "edges": [{"from": 1, "to": 3}, {"from": 2, "to": 3, "weight": 3}]}},
        "agents": [{"nodes": "all", "direct": "single-integrator"}],
        "sim": {"initial_state": [2.0, 6.0, 0.0]},
        "outputs": {"csv": false, "report": false, "plots": false}
    }"#;

    #[test]
    fn hub_config_runs() {
        let cfg = ExperimentConfig::from_json(HUB).unwrap();
        let out = run_experiment(&cfg, Path::new("."), Path::new("unused")).unwrap();
        assert!(out.passed());
        assert_eq!(out.report.analysis.beta, vec![vec![0.25, 0.75]]);
        assert!(out.files.is_empty());
    }

    #[test]
    fn config_errors_carry_field_path() {
        let bad = HUB.replace("\"nodes\": \"all\"", "\"nodes\": [1, 2]");
        let cfg = ExperimentConfig::from_json(&bad).unwrap();
        let err = prepare(&cfg, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("missing nodes [3]"), "{err}");

        let bad = HUB.replace("\"step\"", "\"stepp\"").replace("\"initial_state\"", "\"initial_statex\"");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("sim"), "{err}");

        let bad = HUB.replace("single-integrator", "warp-drive");
        let cfg = ExperimentConfig::from_json(&bad).unwrap();
        let err = prepare(&cfg, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("agents[0].direct"), "{err}");
    }

    #[test]
    fn generator_requires_seed() {
        let text = r#"{
            "graph": {"generate": {"basic_sizes": [2], "nonbasic_sizes": [1]}},
            "agents": [{"nodes": "all", "direct": "single-integrator"}]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let err = prepare(&cfg, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "seed"), "{err}");
    }

    #[test]
    fn model_time_domain_must_match() {
        let text = r#"{
            "graph": {"inline": {"n": 1}},
            "agents": [{"nodes": [1], "model": "dt3", "protocol": {
                "k": {"rows": 1, "cols": 1, "data": [0.5]},
                "g_zeta": {"rows": 1, "cols": 1, "data": [1.0]},
                "g_eta": {"rows": 1, "cols": 0, "data": []},
                "g_meas": {"rows": 1, "cols": 1, "data": [0.0]},
                "m": {"rows": 1, "cols": 1, "data": [1.0]},
                "n": {"rows": 0, "cols": 1, "data": []}
            }}],
            "sim": {"initial_state": [0, 0, 0]}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let err = prepare(&cfg, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("agents[0].model"), "{err}");
        let mut cfg = cfg;
        cfg.sim.time_domain = TimeDomain::Discrete;
        assert!(prepare(&cfg, Path::new(".")).is_ok());
    }
}
