//! Static SVG line plots of network signals and per-bicomponent
//! disagreement.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::SyncReport;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sim::Trajectory;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;

/// One panel: several series sharing the x grid.
pub struct Panel {
    pub title: String,
    pub y_label: String,
    pub series: Vec<Vec<f64>>,
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

fn render_panel(svg: &mut String, times: &[f64], panel: &Panel, y0: f64) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (t0, t1) = (times[0], *times.last().expect("non-empty"));
    let t_span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let (mut lo, mut hi) = panel
        .series
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let sx = |t: f64| MARGIN_LEFT + (t - t0) / t_span * plot_w;
    let sy = |v: f64| y0 + MARGIN_TOP + (hi - v) / (hi - lo) * plot_h;

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        y0 + MARGIN_TOP - 10.0,
        panel.title
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_LEFT:.1}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#444"/>"##,
        y0 + MARGIN_TOP
    );
    for v in ticks(lo, hi) {
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{MARGIN_LEFT:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{v:.3e}</text>"##,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            y + 3.0
        );
    }
    for t in ticks(t0, t0 + t_span) {
        let x = sx(t);
        let yb = y0 + MARGIN_TOP + plot_h;
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{yb:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{t:.4}</text>"##,
            yb + 5.0,
            yb + 17.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">t</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        y0 + PANEL_HEIGHT - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        y0 + MARGIN_TOP + plot_h / 2.0,
        y0 + MARGIN_TOP + plot_h / 2.0,
        panel.y_label
    );
    for (idx, s) in panel.series.iter().enumerate() {
        let mut d = String::new();
        for (k, (&t, &v)) in times.iter().zip(s).enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, sx(t), sy(v));
        }
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1"/>"#,
            PALETTE[idx % PALETTE.len()]
        );
    }
}

/// Renders stacked panels into one SVG document.
pub fn render_svg(times: &[f64], panels: &[Panel]) -> Result<String> {
    if times.is_empty() {
        return Err(Error::validation("cannot plot an empty trajectory"));
    }
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut svg, times, p, i as f64 * PANEL_HEIGHT);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// `|zeta_i(t)|_inf` for every agent.
pub fn zeta_panel(tr: &Trajectory) -> Panel {
    Panel {
        title: "Network signals".into(),
        y_label: "|zeta_i|".into(),
        series: (0..tr.agent_count)
            .map(|i| (0..tr.len()).map(|t| linalg::inf_norm(tr.signal(t, i))).collect())
            .collect(),
    }
}

/// `y_a - y_first` per output channel for every member of `group`.
pub fn disagreement_panel(tr: &Trajectory, group: &[usize], label: usize) -> Panel {
    let first = group[0];
    let mut series = Vec::new();
    for &a in group {
        for ch in 0..tr.output_dim {
            series.push(
                (0..tr.len())
                    .map(|t| tr.output(t, a)[ch] - tr.output(t, first)[ch])
                    .collect(),
            );
        }
    }
    Panel {
        title: format!("Basic bicomponent {label}: disagreement"),
        y_label: "y_a - y_1".into(),
        series,
    }
}

/// Writes `zeta.svg` and one `bicomponent-<i>.svg` per basic bicomponent
/// (disagreement above, synchronized output below). Nothing is written when
/// the trajectory is empty.
pub fn emit_plots(tr: &Trajectory, report: &SyncReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if tr.is_empty() {
        return Err(Error::validation("cannot plot an empty trajectory"));
    }
    let mut docs = vec![("zeta.svg".to_string(), render_svg(&tr.times, &[zeta_panel(tr)])?)];
    for (i, g) in report.groups.iter().enumerate() {
        let label = i + 1;
        let sync = &report.synchronized_outputs[i];
        let sync_panel = Panel {
            title: format!("Basic bicomponent {label}: synchronized output"),
            y_label: "y_s".into(),
            series: (0..tr.output_dim)
                .map(|ch| sync.iter().map(|row| row[ch]).collect())
                .collect(),
        };
        let doc = render_svg(
            &tr.times,
            &[disagreement_panel(tr, &g.nodes, label), sync_panel],
        )?;
        docs.push((format!("bicomponent-{label}.svg"), doc));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(docs.len());
    for (name, doc) in docs {
        let path = out_dir.join(name);
        fs::write(&path, doc).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
