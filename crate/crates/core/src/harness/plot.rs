//! Minimal static SVG charts rendered from episode and summary data.

use super::{EpisodeRecord, EvalSummary};
use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(svg: &mut String, title: &str, x_label: &str, y_label: &str, (y0, y1): (f64, f64)) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>
"#,
        WIDTH / 2.0,
        escape(title),
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(x_label),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label),
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN,
    );
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let y = HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
            MARGIN - 5.0,
            y + 4.0,
            v
        );
    }
}

/// Line chart of several series sharing axes.
pub fn line_chart(path: impl AsRef<Path>, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut svg = String::new();
    frame(&mut svg, title, x_label, y_label, (y0, y1));
    for k in 0..=4 {
        let v = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{:.1}</text>"#,
            sx(v),
            HEIGHT - MARGIN + 16.0,
            v
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 5.0,
            MARGIN + 14.0 * (i + 1) as f64,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// Bar chart with symmetric error bars.
pub fn bar_chart(path: impl AsRef<Path>, title: &str, y_label: &str, bars: &[(String, f64, f64)]) -> Result<()> {
    let (mut y0, mut y1) = bounds(bars.iter().flat_map(|b| [b.1 - b.2, b.1 + b.2, 0.0]));
    if y0 > 0.0 {
        y0 = 0.0;
    }
    if y1 < 0.0 {
        y1 = 0.0;
    }
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut svg = String::new();
    frame(&mut svg, title, "", y_label, (y0, y1));
    let slot = (WIDTH - 2.0 * MARGIN) / bars.len().max(1) as f64;
    for (i, (label, value, err)) in bars.iter().enumerate() {
        let x = MARGIN + slot * (i as f64 + 0.2);
        let w = slot * 0.6;
        let (top, bottom) = if *value >= 0.0 { (sy(*value), sy(0.0)) } else { (sy(0.0), sy(*value)) };
        let color = COLORS[i % COLORS.len()];
        let cx = x + w / 2.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" fill="{color}"/>
<line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="black"/>
<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            (bottom - top).max(0.5),
            sy(value - err),
            sy(value + err),
            HEIGHT - MARGIN + 16.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// Nusselt number against time for a set of episodes.
pub fn plot_episodes(path: impl AsRef<Path>, title: &str, records: &[EpisodeRecord]) -> Result<()> {
    let series: Vec<Series> = records
        .iter()
        .map(|r| Series {
            name: r.checkpoint.clone(),
            points: r.time.iter().copied().zip(r.nusselt.iter().copied()).collect(),
        })
        .collect();
    line_chart(path, title, "time", "Nu", &series)
}

/// Mean Nusselt reduction per summary row.
pub fn plot_summaries(path: impl AsRef<Path>, summaries: &[EvalSummary]) -> Result<()> {
    let bars: Vec<(String, f64, f64)> = summaries
        .iter()
        .map(|s| {
            (
                format!("{} a={} Ra={:e}", s.controller, s.alpha, s.ra),
                s.nu_reduction_mean,
                s.nu_reduction_std,
            )
        })
        .collect();
    bar_chart(path, "Nusselt reduction vs. uncontrolled", "Nu reduction (%)", &bars)
}
