//! Convergence verdicts extracted from sampled trajectories.
//!
//! "Tends to zero" is approximated by a tail test: the supremum norm over
//! the trailing `window_fraction` of samples must not exceed `epsilon`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::BicomponentDecomposition;
use crate::kernel::KernelStructure;
use crate::linalg;
use crate::sim::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub epsilon: f64,
    #[serde(default = "default_window")]
    pub window_fraction: f64,
}

fn default_window() -> f64 {
    0.2
}

impl ConvergenceCriterion {
    pub fn new(epsilon: f64, window_fraction: f64) -> Result<Self> {
        let c = Self {
            epsilon,
            window_fraction,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn continuous_default() -> Self {
        Self {
            epsilon: 1e-4,
            window_fraction: 0.2,
        }
    }

    pub fn discrete_default() -> Self {
        Self {
            epsilon: 1e-6,
            window_fraction: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::validation(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::validation(format!(
                "window_fraction must lie in (0, 1], got {}",
                self.window_fraction
            )));
        }
        Ok(())
    }

    /// First sample index of the tail window for `len` samples.
    pub fn tail_start(&self, len: usize) -> usize {
        let count = ((len as f64) * self.window_fraction).ceil() as usize;
        len - count.clamp(1, len.max(1))
    }
}

fn one_based<S: Serializer>(nodes: &[usize], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(nodes.iter().map(|v| v + 1))
}

fn one_based_one<S: Serializer>(node: &usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(*node as u64 + 1)
}

fn one_based_pair<S: Serializer>(
    pair: &(usize, usize),
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq([pair.0 + 1, pair.1 + 1])
}

/// Per-agent tail sup-norm of `zeta_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub passed: bool,
    pub agent_passed: Vec<bool>,
    pub tail_norms: Vec<f64>,
}

/// Output agreement inside a node set. Node indices are zero-based in
/// memory and one-based when serialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupVerdict {
    #[serde(serialize_with = "one_based")]
    pub nodes: Vec<usize>,
    pub passed: bool,
    /// Tail max of the largest pairwise `|y_a - y_b|_inf`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexLimit {
    #[serde(serialize_with = "one_based_one")]
    pub node: usize,
    pub beta: Vec<f64>,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum WitnessOutcome {
    /// Two agents in different basic bicomponents keep a gap above epsilon.
    Witness {
        #[serde(serialize_with = "one_based_pair")]
        pair: (usize, usize),
        difference: f64,
    },
    /// Every pair of basic bicomponents converged to the same limit.
    IndistinguishableLimits { max_difference: f64 },
}

fn check_nonempty(tr: &Trajectory) -> Result<()> {
    if tr.is_empty() {
        return Err(Error::Precondition("trajectory has no samples".into()));
    }
    Ok(())
}

pub fn check_network_stability(tr: &Trajectory, c: &ConvergenceCriterion) -> Result<StabilityVerdict> {
    check_nonempty(tr)?;
    let start = c.tail_start(tr.len());
    let tail_norms: Vec<f64> = (0..tr.agent_count)
        .map(|i| {
            (start..tr.len())
                .map(|t| linalg::inf_norm(tr.signal(t, i)))
                .fold(0.0, f64::max)
        })
        .collect();
    let agent_passed: Vec<bool> = tail_norms.iter().map(|&v| v <= c.epsilon).collect();
    Ok(StabilityVerdict {
        passed: agent_passed.iter().all(|&b| b),
        agent_passed,
        tail_norms,
    })
}

/// Largest `|y_a - y_b|_inf` over `a, b` in `group` at sample `t`.
fn spread(tr: &Trajectory, t: usize, group: &[usize]) -> f64 {
    (0..tr.output_dim)
        .map(|ch| {
            let (lo, hi) = group.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
                let v = tr.output(t, a)[ch];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

pub fn check_output_sync(
    tr: &Trajectory,
    group: &[usize],
    c: &ConvergenceCriterion,
) -> Result<GroupVerdict> {
    check_nonempty(tr)?;
    if group.is_empty() {
        return Err(Error::validation("output-sync group is empty"));
    }
    if let Some(&bad) = group.iter().find(|&&v| v >= tr.agent_count) {
        return Err(Error::validation(format!(
            "node {bad} is not in the network (0..{})",
            tr.agent_count
        )));
    }
    let start = c.tail_start(tr.len());
    let value = (start..tr.len())
        .map(|t| spread(tr, t, group))
        .fold(0.0, f64::max);
    Ok(GroupVerdict {
        nodes: group.to_vec(),
        passed: value <= c.epsilon,
        value,
    })
}

/// Per-sample mean output over `group`: the estimate of the synchronized
/// trajectory of a basic bicomponent.
pub fn synchronized_output(tr: &Trajectory, group: &[usize]) -> Vec<Vec<f64>> {
    let p = tr.output_dim;
    let inv = 1.0 / group.len() as f64;
    (0..tr.len())
        .map(|t| {
            let mut acc = vec![0.0; p];
            for &a in group {
                for (dst, v) in acc.iter_mut().zip(tr.output(t, a)) {
                    *dst += v;
                }
            }
            acc.iter_mut().for_each(|v| *v *= inv);
            acc
        })
        .collect()
}

fn basic_groups(d: &BicomponentDecomposition) -> Vec<Vec<usize>> {
    d.basic_components().map(<[usize]>::to_vec).collect()
}

/// Residual of every non-basic agent against the convex combination
/// `sum_i beta[j][i] y_s^i` of the basic bicomponents' synchronized outputs.
/// Refuses to run unless the network is stable and every basic bicomponent
/// is output-synchronized.
pub fn check_convex_limits(
    tr: &Trajectory,
    d: &BicomponentDecomposition,
    ks: &KernelStructure,
    c: &ConvergenceCriterion,
) -> Result<Vec<ConvexLimit>> {
    let stab = check_network_stability(tr, c)?;
    if !stab.passed {
        return Err(Error::Precondition(
            "network is not stable; convex limits are meaningless".into(),
        ));
    }
    let groups = basic_groups(d);
    for (i, g) in groups.iter().enumerate() {
        let v = check_output_sync(tr, g, c)?;
        if !v.passed {
            return Err(Error::Precondition(format!(
                "basic bicomponent {i} is not output-synchronized (tail spread {:e})",
                v.value
            )));
        }
    }
    let sync: Vec<Vec<Vec<f64>>> = groups.iter().map(|g| synchronized_output(tr, g)).collect();
    let start = c.tail_start(tr.len());
    let p = tr.output_dim;
    let limits = d
        .nonbasic_nodes()
        .iter()
        .enumerate()
        .map(|(row, &node)| {
            let beta: Vec<f64> = ks.beta().row(row).iter().copied().collect();
            let residual = (start..tr.len())
                .map(|t| {
                    let y = tr.output(t, node);
                    (0..p)
                        .map(|ch| {
                            let target: f64 =
                                beta.iter().zip(&sync).map(|(b, s)| b * s[t][ch]).sum();
                            (y[ch] - target).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            ConvexLimit {
                node,
                beta,
                residual,
                passed: residual <= c.epsilon,
            }
        })
        .collect();
    Ok(limits)
}

/// Consensus value `w^T x0` of single integrators on a strongly connected
/// component, with `w` the positive left null vector of `l_sub` normalized
/// to `w^T 1 = 1`.
pub fn consensus_oracle_single_integrator(l_sub: &DMatrix<f64>, x0_sub: &[f64]) -> Result<f64> {
    let n = l_sub.nrows();
    if l_sub.ncols() != n || x0_sub.len() != n {
        return Err(Error::dimension(
            "consensus oracle inputs",
            format!("{n}x{n} laplacian and {n} initial values"),
            format!("{}x{} and {}", n, l_sub.ncols(), x0_sub.len()),
        ));
    }
    let w = consensus_weights(l_sub)?;
    Ok(w.dot(&DVector::from_column_slice(x0_sub)))
}

/// Normalized positive left null vector of a strongly connected Laplacian.
pub fn consensus_weights(l_sub: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = l_sub.nrows();
    let rank = linalg::rank(l_sub);
    if rank + 1 != n {
        return Err(Error::Precondition(format!(
            "laplacian block of size {n} has rank {rank}; expected {}",
            n.saturating_sub(1)
        )));
    }
    let w = linalg::left_null_vector(l_sub)
        .ok_or_else(|| Error::Structural("left nullspace is not one-dimensional".into()))?;
    let w = &w / w.sum();
    if w.iter().any(|&v| v <= 0.0) {
        return Err(Error::Structural(format!(
            "left null vector is not positive: {:?}",
            w.as_slice()
        )));
    }
    Ok(w)
}

/// For a network with several basic bicomponents whose synchronized
/// outputs do not all vanish, finds two agents in different basic
/// bicomponents whose outputs stay apart.
pub fn global_sync_witness(
    tr: &Trajectory,
    d: &BicomponentDecomposition,
    _ks: &KernelStructure,
    c: &ConvergenceCriterion,
) -> Result<WitnessOutcome> {
    if d.k() < 2 {
        return Err(Error::Precondition(format!(
            "need at least two basic bicomponents, found {}",
            d.k()
        )));
    }
    if !check_network_stability(tr, c)?.passed {
        return Err(Error::Precondition("network is not stable".into()));
    }
    let groups = basic_groups(d);
    let start = c.tail_start(tr.len());
    let nontrivial = groups.iter().any(|g| {
        let s = synchronized_output(tr, g);
        (start..tr.len()).any(|t| linalg::inf_norm(&s[t]) > c.epsilon)
    });
    if !nontrivial {
        return Err(Error::Precondition(
            "every basic bicomponent synchronizes to zero; the trivial case has no witness".into(),
        ));
    }

    let mut best: Option<((usize, usize), f64)> = None;
    for (gi, ga) in groups.iter().enumerate() {
        for gb in &groups[gi + 1..] {
            for &a in ga {
                for &b in gb {
                    let diff = (start..tr.len())
                        .map(|t| {
                            tr.output(t, a)
                                .iter()
                                .zip(tr.output(t, b))
                                .map(|(x, y)| (x - y).abs())
                                .fold(0.0, f64::max)
                        })
                        .fold(0.0, f64::max);
                    if best.is_none_or(|(_, v)| diff > v) {
                        best = Some(((a, b), diff));
                    }
                }
            }
        }
    }
    let (pair, difference) = best.expect("at least two groups");
    Ok(if difference > c.epsilon {
        WitnessOutcome::Witness { pair, difference }
    } else {
        WitnessOutcome::IndistinguishableLimits {
            max_difference: difference,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncReport {
    pub epsilon: f64,
    pub window_fraction: f64,
    pub network_stable: StabilityVerdict,
    /// Tail norms of the exchanged protocol signals per agent; reported
    /// but not part of the stability verdict.
    pub exchange_tail_norms: Vec<f64>,
    /// One verdict per basic bicomponent.
    pub groups: Vec<GroupVerdict>,
    pub global_output_sync: GroupVerdict,
    pub convex_limits: Option<Vec<ConvexLimit>>,
    /// Why `convex_limits` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convex_limits_skipped: Option<String>,
    pub times: Vec<f64>,
    /// Per basic bicomponent, per sample, the mean output.
    pub synchronized_outputs: Vec<Vec<Vec<f64>>>,
}

impl SyncReport {
    /// Weak synchronization with every basic bicomponent synchronized and
    /// every non-basic agent at its convex-combination limit.
    pub fn passed(&self) -> bool {
        self.network_stable.passed
            && self.groups.iter().all(|g| g.passed)
            && self
                .convex_limits
                .as_ref()
                .is_some_and(|v| v.iter().all(|l| l.passed))
    }
}

pub fn sync_report(
    tr: &Trajectory,
    d: &BicomponentDecomposition,
    ks: &KernelStructure,
    c: &ConvergenceCriterion,
) -> Result<SyncReport> {
    c.validate()?;
    let network_stable = check_network_stability(tr, c)?;
    let start = c.tail_start(tr.len());
    let r = tr.exchange_dim();
    let exchange_tail_norms = (0..tr.agent_count)
        .map(|i| {
            (start..tr.len())
                .map(|t| linalg::inf_norm(&tr.exchange[t][i * r..(i + 1) * r]))
                .fold(0.0, f64::max)
        })
        .collect();
    let groups_nodes = basic_groups(d);
    let groups = groups_nodes
        .iter()
        .map(|g| check_output_sync(tr, g, c))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..tr.agent_count).collect();
    let global_output_sync = check_output_sync(tr, &all, c)?;
    let (convex_limits, convex_limits_skipped) = match check_convex_limits(tr, d, ks, c) {
        Ok(v) => (Some(v), None),
        Err(Error::Precondition(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(SyncReport {
        epsilon: c.epsilon,
        window_fraction: c.window_fraction,
        network_stable,
        exchange_tail_norms,
        groups,
        global_output_sync,
        convex_limits,
        convex_limits_skipped,
        times: tr.times.clone(),
        synchronized_outputs: groups_nodes.iter().map(|g| synchronized_output(tr, g)).collect(),
    })
}
