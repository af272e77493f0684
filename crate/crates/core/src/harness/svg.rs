//! Standalone SVG charts for phase maps, sweeps and iteration histograms.
//!
//! Output is plain text with fixed number formatting, so identical inputs give
//! identical files.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::PhaseMap;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];

/// A named polyline for [`line_chart`].
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn axis_labels(svg: &mut String, x_label: &str, y_label: &str) {
    let cx = (LEFT + WIDTH - RIGHT) / 2.0;
    let cy = (TOP + HEIGHT - BOTTOM) / 2.0;
    let _ = writeln!(
        svg,
        r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 18 {cy:.1})">{}</text>"#,
        escape(y_label)
    );
}

fn frame(svg: &mut String) {
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Grey-scale heatmap of success rates, `m` on the vertical axis increasing
/// upwards and `K` on the horizontal axis. Infeasible cells (`m <= K`) are
/// hatched.
pub fn phase_heatmap(map: &PhaseMap) -> String {
    let mut svg = String::new();
    open(
        &mut svg,
        &format!("Success rate of {} over (m, K)", map.algorithm),
    );
    let rows = map.m_grid.len().max(1) as f64;
    let cols = map.k_grid.len().max(1) as f64;
    let cw = (WIDTH - LEFT - RIGHT) / cols;
    let ch = (HEIGHT - TOP - BOTTOM) / rows;
    let _ = writeln!(
        svg,
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse"><path d="M0,6 L6,0" stroke="#c00" stroke-width="1"/></pattern></defs>"##
    );
    for (i, &m) in map.m_grid.iter().enumerate() {
        let y = HEIGHT - BOTTOM - (i as f64 + 1.0) * ch;
        for (j, _) in map.k_grid.iter().enumerate() {
            let x = LEFT + j as f64 * cw;
            let rate = map.rates[i][j].clamp(0.0, 1.0);
            let level = (255.0 * (1.0 - rate)).round() as u8;
            let _ = writeln!(
                svg,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{cw:.1}" height="{ch:.1}" fill="#{level:02x}{level:02x}{level:02x}"><title>m={m} K={} rate={rate:.3}</title></rect>"##,
                map.k_grid[j]
            );
            if map.infeasible[i][j] {
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x:.1}" y="{y:.1}" width="{cw:.1}" height="{ch:.1}" fill="url(#hatch)" fill-opacity="0.35"/>"#
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{m}</text>"#,
            LEFT - 6.0,
            y + ch / 2.0 + 4.0
        );
    }
    for (j, &k) in map.k_grid.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#,
            LEFT + (j as f64 + 0.5) * cw,
            HEIGHT - BOTTOM + 16.0
        );
    }
    frame(&mut svg);
    axis_labels(&mut svg, "sparsity K", "measurements m");
    // Colour bar.
    let bx = WIDTH - RIGHT + 30.0;
    for step in 0..=10 {
        let rate = step as f64 / 10.0;
        let level = (255.0 * (1.0 - rate)).round() as u8;
        let y = HEIGHT - BOTTOM - (step as f64 + 1.0) * (HEIGHT - TOP - BOTTOM) / 11.0;
        let _ = writeln!(
            svg,
            r##"<rect x="{bx:.1}" y="{y:.1}" width="20" height="{:.1}" fill="#{level:02x}{level:02x}{level:02x}" stroke="black" stroke-width="0.3"/>"##,
            (HEIGHT - TOP - BOTTOM) / 11.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{rate:.1}</text>"#,
            bx + 26.0,
            y + 12.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Line chart of one or more series with a shared linear scale and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut svg = String::new();
    open(&mut svg, title);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 1.0f64);
    for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * ph;

    for step in 0..=4 {
        let fx = x0 + (x1 - x0) * step as f64 / 4.0;
        let fy = y0 + (y1 - y0) * step as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#ddd"/>"##,
            sy(fy),
            WIDTH - RIGHT
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(fy) + 4.0,
            tick_label(fy)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            HEIGHT - BOTTOM + 16.0,
            tick_label(fx)
        );
    }
    frame(&mut svg);
    axis_labels(&mut svg, x_label, y_label);

    for (idx, s) in series.iter().enumerate() {
        let colour = PALETTE[idx % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for p in &path {
            let (cx, cy) = p.split_once(',').expect("formatted as x,y");
            let _ = writeln!(
                svg,
                r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>"#
            );
        }
        let ly = TOP + 10.0 + idx as f64 * 18.0;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bar chart of a histogram. The bin equal to `overflow` (failed runs) is
/// drawn in red.
pub fn bar_chart(title: &str, hist: &BTreeMap<usize, usize>, overflow: Option<usize>) -> String {
    let mut svg = String::new();
    open(&mut svg, title);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let max = hist.values().copied().max().unwrap_or(0).max(1) as f64;
    let bars = hist.len().max(1) as f64;
    let bw = pw / bars;
    for (i, (&bin, &count)) in hist.iter().enumerate() {
        let h = count as f64 / max * ph;
        let x = LEFT + i as f64 * bw;
        let colour = if Some(bin) == overflow {
            "#d62728"
        } else {
            PALETTE[0]
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{colour}"><title>{bin}: {count}</title></rect>"#,
            x + bw * 0.1,
            HEIGHT - BOTTOM - h,
            bw * 0.8
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{bin}</text>"#,
            x + bw / 2.0,
            HEIGHT - BOTTOM + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{count}</text>"#,
            x + bw / 2.0,
            HEIGHT - BOTTOM - h - 4.0
        );
    }
    frame(&mut svg);
    axis_labels(&mut svg, "iterations", "trials");
    svg.push_str("</svg>\n");
    svg
}
