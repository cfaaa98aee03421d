//! Hand-written SVG charts. Coordinates are printed with fixed precision so the
//! same inputs always give the same bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{ClassSummary, EntropyBin, RegressionLine, SampleStats};

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 100.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const PLOT_W: f64 = W - LEFT - RIGHT;
const PLOT_H: f64 = H - TOP - BOTTOM;

const ENTROPY_COLOR: &str = "#4c72b0";
const ACCURACY_COLOR: &str = "#55a868";
const CERTAINTY_COLOR: &str = "#c44e52";

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + PLOT_W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// Frame, ticks and axis labels; `xs`/`ys` are (value, label) pairs already in
// data units, mapped through `fx`/`fy`.
fn axes(
    out: &mut String,
    xs: &[(f64, String)],
    ys: &[(f64, String)],
    fx: impl Fn(f64) -> f64,
    fy: impl Fn(f64) -> f64,
    xlabel: &str,
    ylabel: &str,
) {
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{PLOT_W:.2}" height="{PLOT_H:.2}" fill="none" stroke="black"/>"#
    );
    let base = TOP + PLOT_H;
    for (v, label) in xs {
        let x = fx(*v);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            base + 5.0,
            base + 18.0
        );
    }
    for (v, label) in ys {
        let y = fy(*v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + PLOT_W / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0,
        escape(ylabel)
    );
}

/// Blue (certainty 0) to red (certainty 1).
fn certainty_color(c: f64) -> String {
    let t = if c.is_finite() { c.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(49.0, 214.0), lerp(54.0, 39.0), lerp(149.0, 40.0))
}

/// Entropy/accuracy scatter with bin accuracies and their regression line.
///
/// The axes are always `[0, ln C] x [0, 1]`.
pub fn eac_scatter_svg(
    stats: &[SampleStats],
    bins: &[EntropyBin],
    regression: Option<RegressionLine>,
    num_classes: usize,
    title: &str,
) -> String {
    let max_h = (num_classes.max(2) as f64).ln();
    let fx = |h: f64| LEFT + PLOT_W * (h / max_h).clamp(0.0, 1.0);
    let fy = |a: f64| TOP + PLOT_H * (1.0 - a.clamp(0.0, 1.0));

    let mut out = String::new();
    header(&mut out, title);
    let xs: Vec<(f64, String)> = (0..=4)
        .map(|i| {
            let v = max_h * i as f64 / 4.0;
            (v, format!("{v:.2}"))
        })
        .collect();
    let ys: Vec<(f64, String)> = (0..=5).map(|i| (i as f64 / 5.0, format!("{:.1}", i as f64 / 5.0))).collect();
    axes(&mut out, &xs, &ys, fx, fy, "entropy (nats)", "accuracy");
    let _ = writeln!(
        out,
        r#"<clipPath id="plot-area"><rect x="{LEFT:.2}" y="{TOP:.2}" width="{PLOT_W:.2}" height="{PLOT_H:.2}"/></clipPath>"#
    );

    let _ = writeln!(out, r#"<g class="samples" fill-opacity="0.6">"#);
    for s in stats {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
            fx(s.entropy),
            fy(s.mean_correct),
            certainty_color(s.certainty)
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g class="bins" stroke="black" stroke-width="2.5">"#);
    for b in bins {
        let (x, y) = (fx(b.midpoint()), fy(b.accuracy));
        let _ = writeln!(
            out,
            r#"<path d="M{:.2} {y:.2}H{:.2}M{x:.2} {:.2}V{:.2}"/>"#,
            x - 6.0,
            x + 6.0,
            y - 6.0,
            y + 6.0
        );
    }
    let _ = writeln!(out, "</g>");

    if let Some(line) = regression.filter(|_| bins.len() >= 2) {
        let _ = writeln!(
            out,
            r#"<line class="regression" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5" stroke-dasharray="6 4" clip-path="url(#plot-area)"/>"#,
            LEFT,
            TOP + PLOT_H * (1.0 - line.at(0.0)),
            LEFT + PLOT_W,
            TOP + PLOT_H * (1.0 - line.at(max_h))
        );
    }

    // certainty colour bar
    let bar_x = LEFT + PLOT_W + 30.0;
    let steps = 20;
    for i in 0..steps {
        let c = (i as f64 + 0.5) / steps as f64;
        let h = PLOT_H / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x:.2}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            TOP + PLOT_H - (i + 1) as f64 * h,
            h,
            certainty_color(c)
        );
    }
    for (v, y) in [(0.0, TOP + PLOT_H), (1.0, TOP)] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{v:.1}</text>"#, bar_x + 18.0, y + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">certainty</text>"#,
        bar_x + 7.0,
        TOP - 6.0
    );
    out.push_str("</svg>\n");
    out
}

fn clip_pct(v: Option<f64>, what: &str, class: usize) -> f64 {
    let Some(v) = v else { return 0.0 };
    if !(0.0..=100.0).contains(&v) {
        log::warn!("class {class}: {what} {v} outside [0, 100], clipped");
    }
    if v.is_finite() {
        v.clamp(0.0, 100.0)
    } else {
        0.0
    }
}

/// Grouped bars per class: entropy as % of `ln C`, accuracy %, certainty %.
pub fn eac_bars_svg(rows: &[ClassSummary], title: &str) -> String {
    let fy = |p: f64| TOP + PLOT_H * (1.0 - p / 100.0);
    let groups = rows.len().max(1) as f64;
    let group_w = PLOT_W / groups;
    let bar_w = group_w * 0.8 / 3.0;

    let mut out = String::new();
    header(&mut out, title);
    let xs: Vec<(f64, String)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i as f64, r.class.to_string()))
        .collect();
    let ys: Vec<(f64, String)> = (0..=5).map(|i| (i as f64 * 20.0, format!("{}", i * 20))).collect();
    axes(&mut out, &xs, &ys, |i| LEFT + group_w * (i + 0.5), fy, "class", "percent");

    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(out, r#"<g class="class-{}">"#, r.class);
        let values = [
            ("entropy", ENTROPY_COLOR, clip_pct(r.entropy_pct, "entropy", r.class)),
            ("accuracy", ACCURACY_COLOR, clip_pct(r.accuracy.map(|a| a * 100.0), "accuracy", r.class)),
            ("certainty", CERTAINTY_COLOR, clip_pct(r.certainty.map(|c| c * 100.0), "certainty", r.class)),
        ];
        for (j, (name, color, v)) in values.iter().enumerate() {
            let x = LEFT + group_w * (i as f64 + 0.1) + bar_w * j as f64;
            let y = fy(*v);
            let _ = writeln!(
                out,
                r#"<rect class="{name}" x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" fill="{color}"/>"#,
                TOP + PLOT_H - y
            );
        }
        let _ = writeln!(out, "</g>");
    }

    let lx = LEFT + PLOT_W + 12.0;
    for (k, (name, color)) in [("entropy", ENTROPY_COLOR), ("accuracy", ACCURACY_COLOR), ("certainty", CERTAINTY_COLOR)]
        .iter()
        .enumerate()
    {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{y:.2}" width="12" height="12" fill="{color}"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            lx + 16.0,
            y + 10.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn write(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

pub fn emit_eac_scatter(
    stats: &[SampleStats],
    bins: &[EntropyBin],
    regression: Option<RegressionLine>,
    num_classes: usize,
    title: &str,
    path: &Path,
) -> Result<()> {
    write(path, &eac_scatter_svg(stats, bins, regression, num_classes, title))
}

pub fn emit_eac_bars(rows: &[ClassSummary], title: &str, path: &Path) -> Result<()> {
    write(path, &eac_bars_svg(rows, title))
}
