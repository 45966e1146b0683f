//! Deterministic SVG 1.1 output for [`PlotSpec`].

use super::{ChartKind, Glyph, PlotSpec, SeriesData, Shape, Thickness, VizError};
use std::fmt::Write;
use std::path::Path;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 56.0;
const PLOT_W: f64 = 470.0;
const PLOT_H: f64 = 330.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"];
const GREY: &str = "#c8c8c8";
const LINK_RED: &str = "#c0392b";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn color(cluster: usize, greyed: bool) -> &'static str {
    if greyed {
        GREY
    } else {
        PALETTE[cluster % PALETTE.len()]
    }
}

fn glyph(out: &mut String, class: &str, g: &Glyph, x: f64, y: f64, r: f64, color: &str) {
    let paint = if g.hollow() {
        format!(r#"fill="none" stroke="{color}" stroke-width="1.5""#)
    } else {
        format!(r#"fill="{color}" stroke="none""#)
    };
    let _ = match g.shape {
        Shape::Circle => writeln!(out, r#"<circle class="{class}" cx="{x:.2}" cy="{y:.2}" r="{r:.2}" {paint}/>"#),
        Shape::Square => writeln!(
            out,
            r#"<rect class="{class}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {paint}/>"#,
            x - r,
            y - r,
            2.0 * r,
            2.0 * r
        ),
        Shape::Triangle => writeln!(
            out,
            r#"<polygon class="{class}" points="{x:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" {paint}/>"#,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r
        ),
        Shape::Diamond => writeln!(
            out,
            r#"<polygon class="{class}" points="{x:.2},{:.2} {:.2},{y:.2} {x:.2},{:.2} {:.2},{y:.2}" {paint}/>"#,
            y - r,
            x + r,
            y + r,
            x - r
        ),
        Shape::Cross => writeln!(
            out,
            r#"<path class="{class}" d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            x - r,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r,
            x + r,
            y - r
        ),
    };
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="{size}">{}</text>"#,
        esc(s)
    );
}

fn frame(out: &mut String) {
    let _ = writeln!(
        out,
        r##"<path d="M{LEFT},{TOP}V{:.2}H{:.2}" fill="none" stroke="#333333" stroke-width="1"/>"##,
        TOP + PLOT_H,
        LEFT + PLOT_W
    );
}

fn value_ticks(out: &mut String, ticks: &[String], vertical: bool) {
    let m = ticks.len();
    for (t, label) in ticks.iter().enumerate() {
        let f = if m > 1 { t as f64 / (m - 1) as f64 } else { 0.5 };
        if vertical {
            let y = TOP + PLOT_H - f * PLOT_H;
            text(out, LEFT - 6.0, y + 4.0, "end", 10.0, label);
        } else {
            let x = LEFT + f * PLOT_W;
            text(out, x, TOP + PLOT_H + 16.0, "middle", 10.0, label);
        }
    }
}

fn span(min: Option<f64>, max: Option<f64>) -> (f64, f64) {
    let lo = min.unwrap_or(0.0);
    let hi = max.unwrap_or(1.0);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn scatter2d(out: &mut String, spec: &PlotSpec) {
    frame(out);
    let (x0, x1) = span(spec.axes[0].min, spec.axes[0].max);
    let (y0, y1) = span(spec.axes[1].min, spec.axes[1].max);
    value_ticks(out, &spec.axes[0].ticks, false);
    value_ticks(out, &spec.axes[1].ticks, true);
    text(out, LEFT + PLOT_W / 2.0, TOP + PLOT_H + 36.0, "middle", 12.0, &spec.axes[0].name);
    axis_title_y(out, &spec.axes[1].name);
    for s in &spec.series {
        let SeriesData::Points(points) = &s.data else { continue };
        let c = color(s.cluster_id, s.greyed);
        for p in points {
            let x = LEFT + (p.x - x0) / (x1 - x0) * PLOT_W;
            let y = TOP + PLOT_H - (p.y - y0) / (y1 - y0) * PLOT_H;
            glyph(out, "point", &s.glyph, x, y, 4.0, c);
        }
    }
}

fn axis_title_y(out: &mut String, name: &str) {
    let x = LEFT - 52.0;
    let y = TOP + PLOT_H / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
        esc(name)
    );
}

/// Orthographic view: rotate by the azimuth about the vertical axis, then
/// tilt by the elevation. Returns screen x, screen y and depth toward the viewer.
pub(crate) fn project(x: f64, y: f64, z: f64) -> (f64, f64, f64) {
    let (az, el) = (45f64.to_radians(), 30f64.to_radians());
    let xr = x * az.cos() - y * az.sin();
    let yr = x * az.sin() + y * az.cos();
    (xr, yr * el.sin() + z * el.cos(), yr * el.cos() - z * el.sin())
}

fn scatter3d(out: &mut String, spec: &PlotSpec) {
    let ranges: Vec<(f64, f64)> = spec
        .axes
        .iter()
        .map(|a| match (a.min, a.max) {
            (Some(lo), Some(hi)) => span(Some(lo), Some(hi)),
            _ => span(Some(0.0), Some(a.ticks.len().saturating_sub(1) as f64)),
        })
        .collect();
    let unit = |v: f64, (lo, hi): (f64, f64)| 2.0 * (v - lo) / (hi - lo) - 1.0;
    let extent = 1.8;
    let to_screen = |sx: f64, sy: f64| {
        (LEFT + (sx + extent) / (2.0 * extent) * PLOT_W, TOP + PLOT_H - (sy + extent) / (2.0 * extent) * PLOT_H)
    };
    let corner = project(-1.0, -1.0, -1.0);
    let ends = [project(1.0, -1.0, -1.0), project(-1.0, 1.0, -1.0), project(-1.0, -1.0, 1.0)];
    let (ox, oy) = to_screen(corner.0, corner.1);
    for (a, end) in spec.axes.iter().zip(ends) {
        let (ex, ey) = to_screen(end.0, end.1);
        let _ = writeln!(out, r##"<line x1="{ox:.2}" y1="{oy:.2}" x2="{ex:.2}" y2="{ey:.2}" stroke="#333333" stroke-width="1"/>"##);
        text(out, ex, ey - 6.0, "middle", 11.0, &a.name);
    }
    for s in &spec.series {
        let SeriesData::Points(points) = &s.data else { continue };
        let c = color(s.cluster_id, s.greyed);
        for p in points {
            let (sx, sy, depth) =
                project(unit(p.x, ranges[0]), unit(p.y, ranges[1]), unit(p.z.unwrap_or(0.0), ranges[2]));
            let (x, y) = to_screen(sx, sy);
            let r = 2.0 + 2.5 * ((depth + extent) / (2.0 * extent)).clamp(0.0, 1.0);
            glyph(out, "point", &s.glyph, x, y, r, c);
        }
    }
}

fn bars(out: &mut String, spec: &PlotSpec) {
    frame(out);
    let cats = &spec.axes[0].ticks;
    let overall = spec.overall.as_deref().unwrap_or(&[]);
    let max = spec
        .series
        .iter()
        .filter_map(|s| match &s.data {
            SeriesData::Bars(b) => Some(b.iter().map(|b| b.value).fold(0.0, f64::max)),
            _ => None,
        })
        .chain(overall.iter().map(|b| b.value))
        .fold(0.0, f64::max);
    let top = if max > 0.0 { max * 1.05 } else { 1.0 };
    let y_of = |v: f64| TOP + PLOT_H - v / top * PLOT_H;
    let group_w = PLOT_W / cats.len().max(1) as f64;
    let ns = spec.series.len().max(1) as f64;
    let bar_w = group_w * 0.8 / ns;
    for t in 0..=4 {
        let v = top * t as f64 / 4.0;
        text(out, LEFT - 6.0, y_of(v) + 4.0, "end", 10.0, &format!("{v:.1}"));
    }
    for (g, cat) in cats.iter().enumerate() {
        let gx = LEFT + g as f64 * group_w;
        text(out, gx + group_w / 2.0, TOP + PLOT_H + 16.0, "middle", 10.0, cat);
        for (si, s) in spec.series.iter().enumerate() {
            let SeriesData::Bars(bs) = &s.data else { continue };
            if let Some(b) = bs.iter().find(|b| &b.category == cat) {
                let x = gx + group_w * 0.1 + si as f64 * bar_w;
                let y = y_of(b.value);
                let c = color(s.cluster_id, s.greyed);
                let paint = if s.glyph.hollow() {
                    format!(r#"fill="none" stroke="{c}" stroke-width="1.5""#)
                } else {
                    format!(r#"fill="{c}""#)
                };
                let _ = writeln!(
                    out,
                    r#"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" {paint}/>"#,
                    TOP + PLOT_H - y
                );
            }
        }
        if let Some(b) = overall.iter().find(|b| &b.category == cat) {
            let y = y_of(b.value);
            let _ = writeln!(
                out,
                r##"<line class="overall" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#000000" stroke-width="2" stroke-dasharray="4 2"/>"##,
                gx + group_w * 0.05,
                gx + group_w * 0.95
            );
        }
    }
    text(out, LEFT + PLOT_W / 2.0, TOP + PLOT_H + 36.0, "middle", 12.0, &spec.axes[0].name);
    let y_name = spec.axes.get(1).map_or("count", |a| a.name.as_str());
    axis_title_y(out, if spec.chart == ChartKind::GroupedBar { y_name } else { "count" });
}

fn link(out: &mut String, spec: &PlotSpec) {
    let Some(link) = &spec.link else { return };
    let m = link.nodes.len();
    let (cx, cy, r) = (LEFT + PLOT_W / 2.0, TOP + PLOT_H / 2.0, PLOT_H * 0.38);
    let pos = |i: usize| {
        let a = -std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * i as f64 / m as f64;
        (cx + r * a.cos(), cy + r * a.sin())
    };
    let index = |name: &str| link.nodes.iter().position(|n| n == name).unwrap_or(0);
    for e in &link.edges {
        let (x1, y1) = pos(index(&e.a));
        let (x2, y2) = pos(index(&e.b));
        let w = match e.thickness {
            Thickness::Thin => 1.5,
            Thickness::Medium => 3.5,
            Thickness::Thick => 6.0,
        };
        let _ = writeln!(
            out,
            r#"<line class="edge" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{LINK_RED}" stroke-width="{w}"/>"#
        );
        text(out, (x1 + x2) / 2.0, (y1 + y2) / 2.0 - 4.0, "middle", 10.0, &format!("{:.2}", e.weight));
    }
    for (i, name) in link.nodes.iter().enumerate() {
        let (x, y) = pos(i);
        let _ = writeln!(out, r##"<circle class="node" cx="{x:.2}" cy="{y:.2}" r="7" fill="#ffffff" stroke="#333333" stroke-width="1.5"/>"##);
        text(out, x, y - 12.0, "middle", 11.0, name);
    }
}

fn legend(out: &mut String, spec: &PlotSpec) {
    let x = LEFT + PLOT_W + 24.0;
    let mut y = TOP + 8.0;
    for s in &spec.series {
        glyph(out, "legend", &s.glyph, x, y, 5.0, color(s.cluster_id, s.greyed));
        let label = if s.greyed { format!("{} (bad)", s.label) } else { s.label.clone() };
        text(out, x + 12.0, y + 4.0, "start", 11.0, &label);
        y += 18.0;
    }
    if spec.overall.is_some() && spec.chart != ChartKind::Histogram {
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#000000" stroke-width="2" stroke-dasharray="4 2"/>"##,
            x - 6.0,
            x + 6.0
        );
        text(out, x + 12.0, y + 4.0, "start", 11.0, "all records");
    }
}

/// SVG document for `spec`. Identical specs give identical bytes.
pub fn to_svg(spec: &PlotSpec) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    text(&mut out, WIDTH / 2.0, 28.0, "middle", 15.0, &spec.title);
    match spec.chart {
        ChartKind::Scatter2D => scatter2d(&mut out, spec),
        ChartKind::Scatter3D => scatter3d(&mut out, spec),
        ChartKind::Histogram | ChartKind::Bar | ChartKind::GroupedBar => bars(&mut out, spec),
        ChartKind::LinkChart => link(&mut out, spec),
    }
    legend(&mut out, spec);
    let mut y = TOP + PLOT_H + 62.0;
    for a in &spec.annotations {
        text(&mut out, LEFT, y, "start", 11.0, a);
        y += 15.0;
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_svg(spec: &PlotSpec, path: &Path) -> Result<(), VizError> {
    std::fs::write(path, to_svg(spec)).map_err(|source| VizError::Io { path: path.to_path_buf(), source })
}
