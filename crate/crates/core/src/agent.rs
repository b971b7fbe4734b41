//! Heterogeneous LTI agents, dynamic protocols and the closed-loop network.
//!
//! Agent `i`:
//!
//! ```text
//! x_i+ = A x_i + B u_i,   y_i = C x_i,   y_i,m = C_m x_i
//! ```
//!
//! Protocol `i`, driven by the network signal `zeta_i = sum_j l_ij y_j` and
//! the optional exchange `zeta_hat_i = sum_j l_ij eta_j`:
//!
//! ```text
//! xi_i+ = K xi_i + G_zeta zeta_i + G_eta zeta_hat_i + G_meas y_i,m
//! u_i   = M xi_i
//! eta_i = N xi_i
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::matrix::serde_dense;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomain {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentModel {
    pub time_domain: TimeDomain,
    #[serde(with = "serde_dense")]
    pub a: DMatrix<f64>,
    #[serde(with = "serde_dense")]
    pub b: DMatrix<f64>,
    #[serde(with = "serde_dense")]
    pub c: DMatrix<f64>,
    /// Local measurement matrix of an introspective agent.
    #[serde(with = "serde_dense::option", default, skip_serializing_if = "Option::is_none")]
    pub c_m: Option<DMatrix<f64>>,
}

fn shape(m: &DMatrix<f64>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

fn expect_shape(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dimension(what, format!("{rows}x{cols}"), shape(m)));
    }
    Ok(())
}

impl AgentModel {
    pub fn new(
        time_domain: TimeDomain,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        c_m: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let m = Self {
            time_domain,
            a,
            b,
            c,
            c_m,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        expect_shape("agent A", &self.a, n, n)?;
        if self.b.nrows() != n {
            return Err(Error::dimension(
                "agent B (rows must match A)",
                format!("{n}x_"),
                shape(&self.b),
            ));
        }
        if self.c.ncols() != n {
            return Err(Error::dimension(
                "agent C (columns must match A)",
                format!("_x{n}"),
                shape(&self.c),
            ));
        }
        if let Some(cm) = &self.c_m {
            if cm.ncols() != n {
                return Err(Error::dimension(
                    "agent C_m (columns must match A)",
                    format!("_x{n}"),
                    shape(cm),
                ));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.c_m.as_ref().map_or(0, |m| m.nrows())
    }
}

/// Strictly proper dynamic protocol. `g_zeta` is the gain on the network
/// signal, `g_eta` on the exchanged protocol states, `g_meas` on the local
/// measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicProtocol {
    #[serde(with = "serde_dense")]
    pub k: DMatrix<f64>,
    #[serde(with = "serde_dense")]
    pub g_zeta: DMatrix<f64>,
    #[serde(with = "serde_dense")]
    pub g_eta: DMatrix<f64>,
    #[serde(with = "serde_dense")]
    pub g_meas: DMatrix<f64>,
    #[serde(with = "serde_dense")]
    pub m: DMatrix<f64>,
    #[serde(with = "serde_dense")]
    pub n: DMatrix<f64>,
}

impl DynamicProtocol {
    pub fn order(&self) -> usize {
        self.k.nrows()
    }

    pub fn exchange_dim(&self) -> usize {
        self.n.nrows()
    }
}

/// Per-agent closed loop `x_e,i+ = A_t x_e,i + B_t [zeta_i; zeta_hat_i]`,
/// `y_i = C_t x_e,i`, `[y_i; eta_i] = H_t x_e,i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopAgent {
    a_t: DMatrix<f64>,
    b_t: DMatrix<f64>,
    c_t: DMatrix<f64>,
    h_t: DMatrix<f64>,
    output_dim: usize,
}

impl ClosedLoopAgent {
    pub fn a_t(&self) -> &DMatrix<f64> {
        &self.a_t
    }

    pub fn b_t(&self) -> &DMatrix<f64> {
        &self.b_t
    }

    pub fn c_t(&self) -> &DMatrix<f64> {
        &self.c_t
    }

    pub fn h_t(&self) -> &DMatrix<f64> {
        &self.h_t
    }

    pub fn state_dim(&self) -> usize {
        self.a_t.nrows()
    }

    /// `p`
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// `r`
    pub fn exchange_dim(&self) -> usize {
        self.h_t.nrows() - self.output_dim
    }
}

pub fn assemble_closed_loop(m: &AgentModel, pr: &DynamicProtocol) -> Result<ClosedLoopAgent> {
    m.validate()?;
    let n = m.state_dim();
    let mi = m.input_dim();
    let p = m.output_dim();
    let q = pr.order();
    let r = pr.exchange_dim();

    expect_shape("protocol K", &pr.k, q, q)?;
    expect_shape("protocol G_zeta", &pr.g_zeta, q, p)?;
    expect_shape("protocol M", &pr.m, mi, q)?;
    if pr.n.ncols() != q {
        return Err(Error::dimension("protocol N", format!("_x{q}"), shape(&pr.n)));
    }
    // An all-zero gain of any width stands for "no exchange".
    let g_eta = if r == 0 && pr.g_eta.iter().all(|&v| v == 0.0) {
        DMatrix::zeros(q, 0)
    } else {
        expect_shape("protocol G_eta", &pr.g_eta, q, r)?;
        pr.g_eta.clone()
    };
    let meas_term = match &m.c_m {
        Some(cm) => {
            if pr.g_meas.iter().all(|&v| v == 0.0) && pr.g_meas.ncols() != cm.nrows() {
                DMatrix::zeros(q, n)
            } else {
                expect_shape("protocol G_meas vs agent C_m", &pr.g_meas, q, cm.nrows())?;
                &pr.g_meas * cm
            }
        }
        None => {
            if pr.g_meas.iter().any(|&v| v != 0.0) {
                return Err(Error::dimension(
                    "protocol G_meas vs agent C_m",
                    format!("{q}x0 or zero (agent has no C_m)"),
                    shape(&pr.g_meas),
                ));
            }
            DMatrix::zeros(q, n)
        }
    };

    let s = n + q;
    let mut a_t = DMatrix::zeros(s, s);
    a_t.view_mut((0, 0), (n, n)).copy_from(&m.a);
    a_t.view_mut((0, n), (n, q)).copy_from(&(&m.b * &pr.m));
    a_t.view_mut((n, 0), (q, n)).copy_from(&meas_term);
    a_t.view_mut((n, n), (q, q)).copy_from(&pr.k);

    let mut b_t = DMatrix::zeros(s, p + r);
    b_t.view_mut((n, 0), (q, p)).copy_from(&pr.g_zeta);
    b_t.view_mut((n, p), (q, r)).copy_from(&g_eta);

    let mut c_t = DMatrix::zeros(p, s);
    c_t.view_mut((0, 0), (p, n)).copy_from(&m.c);

    let mut h_t = DMatrix::zeros(p + r, s);
    h_t.view_mut((0, 0), (p, n)).copy_from(&m.c);
    h_t.view_mut((p, n), (r, q)).copy_from(&pr.n);

    Ok(ClosedLoopAgent {
        a_t,
        b_t,
        c_t,
        h_t,
        output_dim: p,
    })
}

/// Wraps closed-loop blocks directly; admits static protocols such as
/// `u_i = -zeta_i`.
pub fn direct_closed_loop(
    a_t: DMatrix<f64>,
    b_t: DMatrix<f64>,
    c_t: DMatrix<f64>,
    h_t: DMatrix<f64>,
) -> Result<ClosedLoopAgent> {
    let s = a_t.nrows();
    expect_shape("closed-loop A_t", &a_t, s, s)?;
    let p = c_t.nrows();
    expect_shape("closed-loop C_t", &c_t, p, s)?;
    if h_t.ncols() != s || h_t.nrows() < p {
        return Err(Error::dimension(
            "closed-loop H_t",
            format!(">={p}x{s}"),
            shape(&h_t),
        ));
    }
    expect_shape("closed-loop B_t", &b_t, s, h_t.nrows())?;
    if h_t.rows(0, p) != c_t {
        return Err(Error::validation(
            "closed-loop C_t must equal the top block row of H_t",
        ));
    }
    Ok(ClosedLoopAgent {
        a_t,
        b_t,
        c_t,
        h_t,
        output_dim: p,
    })
}

/// Static-feedback single integrator `x' = -zeta`, `y = x`.
pub fn single_integrator() -> ClosedLoopAgent {
    scaled_integrator(0.0, -1.0)
}

/// Scalar agent `x+ = a x + b zeta`, `y = x`.
pub fn scaled_integrator(a: f64, b: f64) -> ClosedLoopAgent {
    let one = DMatrix::from_element(1, 1, 1.0);
    ClosedLoopAgent {
        a_t: DMatrix::from_element(1, 1, a),
        b_t: DMatrix::from_element(1, 1, b),
        c_t: one.clone(),
        h_t: one,
        output_dim: 1,
    }
}

/// The assembled network `x_e+ = (A + B (L (x) H)) x_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSystem {
    agents: Vec<ClosedLoopAgent>,
    laplacian: LaplacianMatrix,
    offsets: Vec<usize>,
    system_matrix: DMatrix<f64>,
    output_map: DMatrix<f64>,
    signal_map: DMatrix<f64>,
    output_dim: usize,
    exchange_dim: usize,
}

impl NetworkSystem {
    pub fn agents(&self) -> &[ClosedLoopAgent] {
        &self.agents
    }

    pub fn laplacian(&self) -> &LaplacianMatrix {
        &self.laplacian
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn state_dim(&self) -> usize {
        self.system_matrix.nrows()
    }

    /// First state index of agent `i`.
    pub fn state_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn state_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn system_matrix(&self) -> &DMatrix<f64> {
        &self.system_matrix
    }

    /// Stacks `C_t,i`; maps `x_e` to `y` (`N*p` rows).
    pub fn output_map(&self) -> &DMatrix<f64> {
        &self.output_map
    }

    /// Row block `i` is `sum_j l_ij H_t,j`; maps `x_e` to stacked
    /// `[zeta_i; zeta_hat_i]` (`N*(p+r)` rows).
    pub fn signal_map(&self) -> &DMatrix<f64> {
        &self.signal_map
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn exchange_dim(&self) -> usize {
        self.exchange_dim
    }

    /// Rows of `signal_map` that form the stacked `zeta`.
    pub fn zeta_map(&self) -> DMatrix<f64> {
        self.select_signal_rows(0, self.output_dim)
    }

    /// Rows of `signal_map` that form the stacked `zeta_hat`.
    pub fn exchange_map(&self) -> DMatrix<f64> {
        self.select_signal_rows(self.output_dim, self.exchange_dim)
    }

    fn select_signal_rows(&self, start: usize, len: usize) -> DMatrix<f64> {
        let w = self.output_dim + self.exchange_dim;
        let n = self.agent_count();
        let mut out = DMatrix::zeros(n * len, self.state_dim());
        for i in 0..n {
            out.rows_mut(i * len, len)
                .copy_from(&self.signal_map.rows(i * w + start, len));
        }
        out
    }
}

pub fn assemble_network(agents: Vec<ClosedLoopAgent>, l: &LaplacianMatrix) -> Result<NetworkSystem> {
    let n = agents.len();
    if n != l.size() {
        return Err(Error::dimension("agent count vs laplacian", l.size(), n));
    }
    if n == 0 {
        return Err(Error::validation("network needs at least one agent"));
    }
    let p = agents[0].output_dim();
    let r = agents[0].exchange_dim();
    for (i, a) in agents.iter().enumerate() {
        if a.output_dim() != p || a.exchange_dim() != r {
            return Err(Error::dimension(
                format!("agent {i} (p, r)"),
                format!("({p}, {r})"),
                format!("({}, {})", a.output_dim(), a.exchange_dim()),
            ));
        }
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut total = 0;
    for a in &agents {
        offsets.push(total);
        total += a.state_dim();
    }
    offsets.push(total);

    let w = p + r;
    let mut system_matrix = DMatrix::zeros(total, total);
    let mut output_map = DMatrix::zeros(n * p, total);
    let mut signal_map = DMatrix::zeros(n * w, total);
    for (i, ai) in agents.iter().enumerate() {
        let (oi, si) = (offsets[i], ai.state_dim());
        system_matrix
            .view_mut((oi, oi), (si, si))
            .copy_from(ai.a_t());
        output_map.view_mut((i * p, oi), (p, si)).copy_from(ai.c_t());
        for (j, aj) in agents.iter().enumerate() {
            let lij = l[(i, j)];
            if lij == 0.0 {
                continue;
            }
            let (oj, sj) = (offsets[j], aj.state_dim());
            let coupling = aj.h_t() * lij;
            signal_map
                .view_mut((i * w, oj), (w, sj))
                .copy_from(&coupling);
            let block = ai.b_t() * &coupling;
            let mut dst = system_matrix.view_mut((oi, oj), (si, sj));
            dst += block;
        }
    }

    Ok(NetworkSystem {
        agents,
        laplacian: l.clone(),
        offsets,
        system_matrix,
        output_map,
        signal_map,
        output_dim: p,
        exchange_dim: r,
    })
}
