//! Minimal SVG writers: bar charts, line charts, orientation roses and a
//! straight-line network renderer. Output depends only on the inputs, so
//! reruns are byte-identical.

use std::f64::consts::PI;
use std::fmt::Write as _;

use streetvae::graph::StreetGraph;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN / 2.0
    );
}

/// Vertical bars, one per `(label, value)`. Several series are drawn side
/// by side within each slot.
pub fn bar_chart(title: &str, labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    axes(&mut out);
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0_f64, f64::max);
    let plot_w = WIDTH - 1.5 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let slots = labels.len().max(1) as f64;
    let slot_w = plot_w / slots;
    let bar_w = 0.8 * slot_w / series.len().max(1) as f64;
    const COLORS: [&str; 4] = ["#4472c4", "#ed7d31", "#70ad47", "#7f7f7f"];
    for (s, (_, values)) in series.iter().enumerate() {
        for (i, &v) in values.iter().enumerate() {
            let h = if max > 0.0 { v / max * plot_h } else { 0.0 };
            let x = MARGIN + i as f64 * slot_w + 0.1 * slot_w + s as f64 * bar_w;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{}"/>"#,
                HEIGHT - MARGIN - h,
                COLORS[s % COLORS.len()]
            );
        }
    }
    let every = (labels.len() / 12).max(1);
    for (i, label) in labels.iter().enumerate().step_by(every) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN + (i as f64 + 0.5) * slot_w,
            HEIGHT - MARGIN + 14.0,
            escape(label)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 4.0, fmt_num(max));
    legend(&mut out, series.iter().map(|(n, _)| *n), &COLORS);
    out.push_str("</svg>\n");
    out
}

fn legend<'a>(out: &mut String, names: impl Iterator<Item = &'a str>, colors: &[&str]) {
    for (i, name) in names.enumerate() {
        if name.is_empty() {
            continue;
        }
        let y = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            WIDTH - 130.0,
            y - 9.0,
            colors[i % colors.len()],
            WIDTH - 115.0,
            y,
            escape(name)
        );
    }
}

fn fmt_num(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// A polyline through `(x, y)` points with the x range on the axis.
pub fn line_chart(title: &str, points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    axes(&mut out);
    if points.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (x0, x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let sx = |x: f64| MARGIN + if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 } * (WIDTH - 1.5 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 } * (HEIGHT - 2.0 * MARGIN);
    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#4472c4" stroke-width="2"/>"##, path.join(" "));
    for &(x, y) in points {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4472c4"/>"##, sx(x), sy(y));
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(x0), HEIGHT - MARGIN + 14.0, fmt_num(x0));
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(x1), HEIGHT - MARGIN + 14.0, fmt_num(x1));
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 4.0, sy(y1) + 4.0, fmt_num(y1));
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 4.0, sy(y0) + 4.0, fmt_num(y0));
    out.push_str("</svg>\n");
    out
}

/// Polar rose of an orientation histogram; bin `i` is centred on `10 i` degrees
/// clockwise from north.
pub fn rose(title: &str, bins: &[f64]) -> String {
    let size = 320.0;
    let mut out = String::new();
    header(&mut out, size, size, title);
    let (cx, cy, r) = (size / 2.0, size / 2.0 + 10.0, size / 2.0 - 40.0);
    let _ = writeln!(out, r##"<circle cx="{cx}" cy="{cy}" r="{r}" fill="none" stroke="#bbbbbb"/>"##);
    let max = bins.iter().copied().fold(0.0_f64, f64::max);
    let n = bins.len().max(1) as f64;
    let half = PI / n;
    for (i, &v) in bins.iter().enumerate() {
        if v <= 0.0 || max <= 0.0 {
            continue;
        }
        let len = r * v / max;
        let centre = 2.0 * PI * i as f64 / n;
        let point = |a: f64| (cx + len * a.sin(), cy - len * a.cos());
        let (ax, ay) = point(centre - half);
        let (bx, by) = point(centre + half);
        let _ = writeln!(
            out,
            r##"<path d="M{cx:.2} {cy:.2} L{ax:.2} {ay:.2} A{len:.2} {len:.2} 0 0 1 {bx:.2} {by:.2} Z" fill="#4472c4" fill-opacity="0.8" stroke="#ffffff" stroke-width="0.5"/>"##
        );
    }
    let _ = writeln!(out, r#"<text x="{cx}" y="{:.1}" text-anchor="middle">N</text>"#, cy - r - 4.0);
    out.push_str("</svg>\n");
    out
}

/// Straight-line drawing of a network, fitted to a square canvas with
/// north up.
pub fn network(title: &str, g: &StreetGraph) -> String {
    let size = 400.0;
    let pad = 30.0;
    let mut out = String::new();
    header(&mut out, size, size, title);
    let Some(bbox) = streetvae::geom::BBox::of(&g.nodes) else {
        out.push_str("</svg>\n");
        return out;
    };
    let span = (bbox.max.x - bbox.min.x).max(bbox.max.y - bbox.min.y).max(f64::MIN_POSITIVE);
    let s = (size - 2.0 * pad) / span;
    let tx = |x: f64| pad + (x - bbox.min.x) * s;
    let ty = |y: f64| size - pad - (y - bbox.min.y) * s;
    for e in &g.edges {
        let pts: Vec<String> = g
            .edge_polyline(e)
            .iter()
            .map(|p| format!("{:.2},{:.2}", tx(p.x), ty(p.y)))
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.2"/>"#, pts.join(" "));
    }
    for p in &g.nodes {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#c00000"/>"##, tx(p.x), ty(p.y));
    }
    out.push_str("</svg>\n");
    out
}
