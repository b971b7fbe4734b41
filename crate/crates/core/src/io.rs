//! Graph files and trajectory CSV.
//!
//! Node numbers in files are one-based. Two graph formats are accepted:
//!
//! * JSON: `{"n": 3, "edges": [{"from": 1, "to": 3, "weight": 0.5}]}`,
//!   `weight` defaulting to 1.
//! * Edge list: one `from to [weight]` triple per line, `#` comments, and an
//!   optional `nodes N` line; without it `n` is the largest node mentioned.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedWeightedGraph;
use crate::sim::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    #[serde(default = "unit")]
    pub weight: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

impl GraphSpec {
    pub fn to_graph(&self) -> Result<DirectedWeightedGraph> {
        let edges = self
            .edges
            .iter()
            .map(|e| {
                if e.from == 0 || e.to == 0 || e.from > self.n || e.to > self.n {
                    return Err(Error::validation(format!(
                        "edge {} -> {} is outside nodes 1..={}",
                        e.from, e.to, self.n
                    )));
                }
                Ok((e.from - 1, e.to - 1, e.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        DirectedWeightedGraph::from_edges(self.n, &edges)
    }
}

impl From<&DirectedWeightedGraph> for GraphSpec {
    fn from(g: &DirectedWeightedGraph) -> Self {
        Self {
            n: g.node_count(),
            edges: g
                .edges()
                .into_iter()
                .map(|(from, to, weight)| EdgeSpec {
                    from: from + 1,
                    to: to + 1,
                    weight,
                })
                .collect(),
        }
    }
}

/// Pretty JSON dump, edges sorted by `(from, to)`, trailing newline.
pub fn graph_to_json(g: &DirectedWeightedGraph) -> String {
    let mut s = serde_json::to_string_pretty(&GraphSpec::from(g)).expect("graph serializes");
    s.push('\n');
    s
}

pub fn parse_graph_json(text: &str) -> Result<DirectedWeightedGraph> {
    let spec: GraphSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: "graph json".into(),
        message: e.to_string(),
    })?;
    spec.to_graph()
}

pub fn parse_edge_list(text: &str) -> Result<DirectedWeightedGraph> {
    let err = |line: usize, message: String| Error::Parse {
        context: format!("edge list line {line}"),
        message,
    };
    let mut declared = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "nodes" {
            let n = fields
                .get(1)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| err(lineno, "expected `nodes N`".into()))?;
            declared = Some(n);
            continue;
        }
        if !(2..=3).contains(&fields.len()) {
            return Err(err(lineno, format!("expected `from to [weight]`, got `{line}`")));
        }
        let node = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| err(lineno, format!("`{s}` is not a node number (1-based)")))
        };
        let from = node(fields[0])?;
        let to = node(fields[1])?;
        let weight = match fields.get(2) {
            Some(w) => w
                .parse::<f64>()
                .map_err(|_| err(lineno, format!("`{w}` is not a weight")))?,
            None => 1.0,
        };
        edges.push(EdgeSpec { from, to, weight });
    }
    let max_node = edges.iter().map(|e| e.from.max(e.to)).max().unwrap_or(0);
    let n = declared.unwrap_or(max_node);
    GraphSpec { n, edges }.to_graph()
}

/// Reads a graph, choosing the format by extension (`.json` or anything
/// else for an edge list).
pub fn load_graph(path: &Path) -> Result<DirectedWeightedGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_graph_json(&text)
    } else {
        parse_edge_list(&text)
    }
}

fn header(tr: &Trajectory) -> Vec<String> {
    let nx = tr.states.first().map_or(0, Vec::len);
    let ny = tr.agent_count * tr.output_dim;
    let ne = tr.exchange.first().map_or(0, Vec::len);
    let mut h = vec!["t".to_string()];
    h.extend((0..nx).map(|i| format!("x[{i}]")));
    h.extend((0..ny).map(|i| format!("y[{i}]")));
    h.extend((0..ny).map(|i| format!("zeta[{i}]")));
    h.extend((0..ne).map(|i| format!("eta[{i}]")));
    h
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv<W: std::io::Write>(tr: &Trajectory, out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Parse {
        context: "trajectory csv".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(tr)).map_err(to_err)?;
    for t in 0..tr.len() {
        let row = std::iter::once(tr.times[t])
            .chain(tr.states[t].iter().copied())
            .chain(tr.outputs[t].iter().copied())
            .chain(tr.signals[t].iter().copied())
            .chain(tr.exchange[t].iter().copied())
            .map(fmt);
        w.write_record(row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Parse {
        context: "trajectory csv".into(),
        message: e.to_string(),
    })
}

/// Reads a CSV written by [`write_trajectory_csv`]. The output dimension
/// cannot be recovered from the header alone and is passed in.
pub fn read_trajectory_csv<R: std::io::Read>(input: R, output_dim: usize) -> Result<Trajectory> {
    let perr = |message: String| Error::Parse {
        context: "trajectory csv".into(),
        message,
    };
    let mut r = csv::Reader::from_reader(input);
    let head = r.headers().map_err(|e| perr(e.to_string()))?.clone();
    let count = |prefix: &str| head.iter().filter(|h| h.starts_with(prefix)).count();
    let (nx, ny, nz, ne) = (count("x["), count("y["), count("zeta["), count("eta["));
    if head.get(0) != Some("t") || ny != nz || output_dim == 0 || ny % output_dim != 0 {
        return Err(perr(format!(
            "unexpected header layout (x={nx}, y={ny}, zeta={nz}, output_dim={output_dim})"
        )));
    }
    let mut tr = Trajectory {
        agent_count: ny / output_dim,
        output_dim,
        times: Vec::new(),
        states: Vec::new(),
        outputs: Vec::new(),
        signals: Vec::new(),
        exchange: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| perr(format!("bad number `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != 1 + nx + ny + nz + ne {
            return Err(perr(format!("row has {} fields", vals.len())));
        }
        let mut it = vals.into_iter();
        tr.times.push(it.next().expect("t column"));
        tr.states.push(it.by_ref().take(nx).collect());
        tr.outputs.push(it.by_ref().take(ny).collect());
        tr.signals.push(it.by_ref().take(nz).collect());
        tr.exchange.push(it.collect());
    }
    Ok(tr)
}
