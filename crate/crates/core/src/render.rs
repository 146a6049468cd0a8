//! Static SVG output: a cluster choropleth and simple line charts. Output is
//! a pure function of the inputs with coordinates rounded to two decimals.

use std::fmt::Write;

use crate::dataset::{Calendar, UnitGeometry};
use crate::repro::RtSeries;

/// Categorical colors cycled by cluster label (label 1 takes the first).
pub const PALETTE: [&str; 12] = [
    "#a6cee3", "#1f78b4", "#b2df8a", "#33a02c", "#fb9a99", "#e31a1c", "#fdbf6f", "#ff7f00", "#cab2d6", "#6a3d9a",
    "#ffff99", "#b15928",
];

pub fn cluster_color(label: usize) -> &'static str {
    PALETTE[label.saturating_sub(1) % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const MAP_WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const LEGEND_WIDTH: f64 = 140.0;

/// Choropleth of `labels` (one per geometry, 1-based). Units without a
/// polygon are drawn as dots at their centroid.
pub fn choropleth_svg(geoms: &[UnitGeometry], labels: &[usize], title: &str) -> String {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for g in geoms {
        let [x0, y0, x1, y1] = g.bbox().unwrap_or([g.centroid.x, g.centroid.y, g.centroid.x, g.centroid.y]);
        b = [b[0].min(x0), b[1].min(y0), b[2].max(x1), b[3].max(y1)];
    }
    if geoms.is_empty() {
        b = [0.0, 0.0, 1.0, 1.0];
    }
    let span_x = (b[2] - b[0]).max(f64::MIN_POSITIVE);
    let span_y = (b[3] - b[1]).max(f64::MIN_POSITIVE);
    let scale = if span_x >= span_y || b[3] == b[1] {
        MAP_WIDTH / span_x
    } else {
        MAP_WIDTH / span_y
    };
    let (w, h) = (span_x * scale, span_y * scale);
    let tx = |x: f64| MARGIN + (x - b[0]) * scale;
    let ty = |y: f64| MARGIN + 30.0 + (b[3] - y) * scale;
    let total_w = w + 2.0 * MARGIN + LEGEND_WIDTH;
    let total_h = h + 2.0 * MARGIN + 30.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.2}" height="{total_h:.2}" viewBox="0 0 {total_w:.2} {total_h:.2}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.2}" font-family="sans-serif" font-size="16">{}</text>"#,
        MARGIN + 10.0,
        escape(title)
    );
    for (g, &label) in geoms.iter().zip(labels) {
        let fill = cluster_color(label);
        let id = escape(&g.unit.id);
        match &g.polygon {
            Some(parts) => {
                let mut d = String::new();
                for ring in parts.iter().flat_map(|p| p.rings()) {
                    for (i, p) in ring.iter().enumerate() {
                        let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, tx(p.x), ty(p.y));
                    }
                    d.push_str("Z ");
                }
                let _ = writeln!(
                    s,
                    r##"<path d="{}" fill="{fill}" fill-rule="evenodd" stroke="#555555" stroke-width="0.5"><title>{id}: {label}</title></path>"##,
                    d.trim_end()
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{fill}" stroke="#555555" stroke-width="0.5"><title>{id}: {label}</title></circle>"##,
                    tx(g.centroid.x),
                    ty(g.centroid.y)
                );
            }
        }
    }
    let k = labels.iter().copied().max().unwrap_or(0);
    let lx = w + 2.0 * MARGIN;
    for label in 1..=k {
        let y = MARGIN + 30.0 + (label - 1) as f64 * 22.0;
        let _ = writeln!(
            s,
            r##"<rect x="{lx:.2}" y="{y:.2}" width="16" height="16" fill="{}" stroke="#555555" stroke-width="0.5"/>"##,
            cluster_color(label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">Zone {label}</text>"#,
            lx + 22.0,
            y + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One line of a chart; `None` values break the line.
#[derive(Debug, Clone)]
pub struct Line {
    pub name: String,
    pub color: String,
    pub values: Vec<Option<f64>>,
}

const CHART_W: f64 = 760.0;
const CHART_H: f64 = 360.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;

/// Line chart over a shared x axis with tick labels `x_labels`. A dashed
/// horizontal line is drawn at `reference` when given.
pub fn line_chart_svg(title: &str, y_label: &str, x_labels: &[String], lines: &[Line], reference: Option<f64>) -> String {
    let n = x_labels.len().max(lines.iter().map(|l| l.values.len()).max().unwrap_or(0));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in lines.iter().flat_map(|l| l.values.iter().flatten()).chain(reference.iter()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo, hi) = (lo - pad, hi + pad);
    let x = |i: usize| LEFT + if n > 1 { i as f64 * CHART_W / (n - 1) as f64 } else { CHART_W / 2.0 };
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * CHART_H;
    let total_w = LEFT + CHART_W + 180.0;
    let total_h = TOP + CHART_H + 60.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.2}" height="{total_h:.2}" viewBox="0 0 {total_w:.2} {total_h:.2}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="24" font-family="sans-serif" font-size="16">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{CHART_W}" height="{CHART_H}" fill="none" stroke="#999999"/>"##
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y(v) + 3.0
        );
    }
    let step = (n / 8).max(1);
    for (i, label) in x_labels.iter().enumerate().step_by(step) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            x(i),
            TOP + CHART_H + 16.0,
            escape(label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {:.2})" text-anchor="middle">{}</text>"#,
        TOP + CHART_H / 2.0,
        TOP + CHART_H / 2.0,
        escape(y_label)
    );
    if let Some(r) = reference {
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#444444" stroke-dasharray="4 3"/>"##,
            y(r),
            LEFT + CHART_W,
            y(r)
        );
    }
    for (li, line) in lines.iter().enumerate() {
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (i, v) in line.values.iter().enumerate() {
            match v {
                Some(v) => runs.last_mut().unwrap().push((x(i), y(*v))),
                None => runs.push(Vec::new()),
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            if let [(cx, cy)] = run[..] {
                let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2" fill="{}"/>"#, line.color);
            } else {
                let points: Vec<String> = run.iter().map(|(px, py)| format!("{px:.2},{py:.2}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                    points.join(" "),
                    line.color
                );
            }
        }
        let ly = TOP + 10.0 + li as f64 * 18.0;
        let lx = LEFT + CHART_W + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="3"/>"#,
            lx + 18.0,
            line.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Mean R(t) of each cluster over the units valid on that day.
pub fn cluster_mean_trends(rt: &[RtSeries], labels: &[usize]) -> Vec<Vec<Option<f64>>> {
    let k = labels.iter().copied().max().unwrap_or(0);
    let days = rt.first().map_or(0, |r| r.values.len());
    let mut sums = vec![vec![(0.0, 0usize); days]; k];
    for (series, &label) in rt.iter().zip(labels) {
        for (d, v) in series.values.iter().enumerate() {
            if let Some(v) = v {
                let cell = &mut sums[label - 1][d];
                cell.0 += v;
                cell.1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|row| row.into_iter().map(|(s, c)| (c > 0).then(|| s / c as f64)).collect())
        .collect()
}

/// Per-cluster mean R(t) lines with a reference at R = 1.
pub fn trends_svg(rt: &[RtSeries], labels: &[usize], calendar: Calendar) -> String {
    let lines: Vec<Line> = cluster_mean_trends(rt, labels)
        .into_iter()
        .enumerate()
        .map(|(c, values)| Line {
            name: format!("Zone {}", c + 1),
            color: cluster_color(c + 1).to_string(),
            values,
        })
        .collect();
    let dates: Vec<String> = calendar.dates().map(|d| d.format("%m-%d").to_string()).collect();
    line_chart_svg("Mean R(t) per zone", "R(t)", &dates, &lines, Some(1.0))
}
