//! Minimal SVG report: meridian sections of the snapshots and diagnostic curves.

use std::fmt::Write as _;

use crate::diagnostics::DiagnosticsRecord;
use crate::hypersurface::{chart_points, SupportState};

const PANEL: f64 = 360.0;
const PAD: f64 = 30.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Panel {
    x: f64,
    y: f64,
    bounds: [f64; 4],
}

impl Panel {
    fn new(x: f64, y: f64, pts: impl Iterator<Item = (f64, f64)>, equal_axes: bool) -> Self {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for (px, py) in pts.filter(|(a, c)| a.is_finite() && c.is_finite()) {
            b = [b[0].min(px), b[1].max(px), b[2].min(py), b[3].max(py)];
        }
        if !b[0].is_finite() {
            b = [0.0, 1.0, 0.0, 1.0];
        }
        for k in [0, 2] {
            if b[k + 1] - b[k] < 1e-12 {
                b[k] -= 0.5;
                b[k + 1] += 0.5;
            }
        }
        if equal_axes {
            let half = 0.5 * (b[1] - b[0]).max(b[3] - b[2]);
            let (cx, cy) = (0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3]));
            b = [cx - half, cx + half, cy - half, cy + half];
        }
        Self { x, y, bounds: b }
    }

    fn map(&self, px: f64, py: f64) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.bounds;
        let inner = PANEL - 2.0 * PAD;
        (
            self.x + PAD + (px - x0) / (x1 - x0) * inner,
            self.y + PANEL - PAD - (py - y0) / (y1 - y0) * inner,
        )
    }

    fn frame(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{PANEL}" height="{PANEL}" fill="none" stroke="gray"/>"#,
            self.x, self.y
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="13" font-family="sans-serif">{title}</text>"#,
            self.x + PAD,
            self.y + 18.0
        );
        let [x0, x1, y0, y1] = self.bounds;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" font-family="sans-serif" fill="dimgray">x [{x0:.3}, {x1:.3}]  y [{y0:.3}, {y1:.3}]</text>"#,
            self.x + PAD,
            self.y + PANEL - 8.0
        );
    }

    fn polyline(&self, out: &mut String, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|&(a, b)| {
                let (u, v) = self.map(a, b);
                format!("{u:.2},{v:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            coords.join(" ")
        );
    }
}

/// Closed meridian section `phi in {0, pi}` of a state in chart coordinates.
fn meridian(state: &SupportState) -> Vec<(f64, f64)> {
    let g = state.grid();
    let pts = chart_points(state);
    let (front, back) = (0, g.ni() / 2);
    let mut curve: Vec<(f64, f64)> = (0..g.nj()).map(|j| pts[g.index(front, j)]).map(|p| (p[0], p[2])).collect();
    curve.extend((0..g.nj()).rev().map(|j| pts[g.index(back, j)]).map(|p| (p[0], p[2])));
    if let Some(&first) = curve.first() {
        curve.push(first);
    }
    curve
}

pub fn render(snapshots: &[SupportState], records: &[DiagnosticsRecord]) -> String {
    // at most six evenly spread snapshots
    let picks: Vec<&SupportState> = if snapshots.len() <= COLORS.len() {
        snapshots.iter().collect()
    } else {
        (0..COLORS.len())
            .map(|k| &snapshots[k * (snapshots.len() - 1) / (COLORS.len() - 1)])
            .collect()
    };
    let curves: Vec<Vec<(f64, f64)>> = picks.iter().map(|s| meridian(s)).collect();
    let pinch: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.pinch)).collect();
    let q: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.q)).collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{PANEL}" viewBox="0 0 {} {PANEL}">"#,
        3.0 * PANEL,
        3.0 * PANEL
    );
    let prof = Panel::new(0.0, 0.0, curves.iter().flatten().copied(), true);
    prof.frame(&mut out, "meridian section");
    for (k, c) in curves.iter().enumerate() {
        prof.polyline(&mut out, c, COLORS[k % COLORS.len()]);
    }
    for (k, s) in picks.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" font-family="sans-serif" fill="{}">t = {:.4}</text>"#,
            PANEL - 80.0,
            34.0 + 12.0 * k as f64,
            COLORS[k % COLORS.len()],
            s.t
        );
    }
    let pp = Panel::new(PANEL, 0.0, pinch.iter().copied(), false);
    pp.frame(&mut out, "pinch = max k2/k1");
    pp.polyline(&mut out, &pinch, COLORS[1]);
    let qp = Panel::new(2.0 * PANEL, 0.0, q.iter().copied(), false);
    qp.frame(&mut out, "q = min k1/F");
    qp.polyline(&mut out, &q, COLORS[2]);
    out.push_str("</svg>\n");
    out
}
