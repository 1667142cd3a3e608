use std::fmt::Write;

use super::bundle::PlotData;
use crate::metric::Metric;
use crate::stats::{pain_score, PainMode};
use crate::MetroSummary;

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One bar per metro, the worst pair's pain under `mode`, tallest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Bar {
    pub metro: String,
    pub pain: f64,
    pub annotation: String,
}

pub fn bars(summaries: &[MetroSummary], metric: Metric, mode: PainMode) -> Vec<Bar> {
    let mut out: Vec<Bar> = summaries
        .iter()
        .filter_map(|s| {
            let m = s.metric(metric)?;
            let w = m.worst_for(mode);
            Some(Bar {
                metro: s.metro.clone(),
                pain: pain_score(&w.stat, mode),
                annotation: format!("AS{} {} vs {}", w.client_asn, w.server_a, w.server_b),
            })
        })
        .collect();
    out.sort_by(|a, b| b.pain.total_cmp(&a.pain).then_with(|| a.metro.cmp(&b.metro)));
    out
}

pub fn render_bars(summaries: &[MetroSummary], metric: Metric, mode: PainMode) -> String {
    let bars = bars(summaries, metric, mode);
    let (left, top, bar_w, gap, plot_h) = (60.0, 40.0, 48.0, 16.0, 300.0);
    let width = left + 20.0 + (bars.len().max(1) as f64) * (bar_w + gap);
    let height = top + plot_h + 120.0;
    let y_max = bars.iter().map(|b| b.pain).fold(1.0f64, f64::max) * 1.1;
    let title = match mode {
        PainMode::Ks => format!("Worst-case {metric} pain per metro (10 x KS distance)"),
        PainMode::Spread => format!("Worst-case {metric} pain per metro (folded spread)"),
    };
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{left}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(&title)).unwrap();
    let base = top + plot_h;
    writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{base}" x2="{:.2}" y2="{base}" stroke="black"/>"#, width - 10.0).unwrap();
    for tick in 0..=4 {
        let v = y_max * tick as f64 / 4.0;
        let y = base - plot_h * tick as f64 / 4.0;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.2}</text>"#, left - 6.0, y + 3.0).unwrap();
    }
    if bars.is_empty() {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">no metro has difference statistics for this metric</text>"#, left + 10.0, top + plot_h / 2.0).unwrap();
    }
    for (i, bar) in bars.iter().enumerate() {
        let x = left + gap / 2.0 + i as f64 * (bar_w + gap);
        let h = plot_h * bar.pain / y_max;
        let y = base - h;
        writeln!(s, r#"<g class="bar" data-metro="{}" data-pain="{}">"#, escape(&bar.metro), bar.pain).unwrap();
        writeln!(s, r#"<title>{}: {} ({})</title>"#, escape(&bar.metro), bar.pain, escape(&bar.annotation)).unwrap();
        writeln!(s, r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{}"/>"#, PALETTE[0]).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{:.2}</text>"#, x + bar_w / 2.0, y - 4.0, bar.pain).unwrap();
        let lx = x + bar_w / 2.0;
        writeln!(s, r#"<text x="{lx:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#, base + 14.0, escape(&bar.metro)).unwrap();
        let ay = base + 26.0;
        writeln!(s, r#"<text x="{lx:.2}" y="{ay:.2}" font-family="sans-serif" font-size="9" transform="rotate(45 {lx:.2} {ay:.2})">{}</text>"#, escape(&bar.annotation)).unwrap();
        writeln!(s, "</g>").unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Per-server density curves on a log x axis.
pub fn render_plot(plot: &PlotData) -> String {
    let (left, top, plot_w, plot_h) = (60.0, 40.0, 560.0, 300.0);
    let width = left + plot_w + 220.0;
    let height = top + plot_h + 60.0;
    let xs = plot.series.iter().flat_map(|s| s.points.iter().map(|p| p.x.log10()));
    let (mut x_lo, mut x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !x_lo.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
    }
    x_lo = x_lo.floor();
    x_hi = x_hi.ceil().max(x_lo + 1.0);
    let y_max = plot
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.density))
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.1;
    let px = |x: f64| left + plot_w * (x.log10() - x_lo) / (x_hi - x_lo);
    let py = |y: f64| top + plot_h - plot_h * y / y_max;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let title = format!("{} AS{} {}: per-server density (log axis)", plot.metro, plot.client_asn, plot.metric);
    writeln!(s, r#"<text x="{left}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(&title)).unwrap();
    let base = top + plot_h;
    writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{base}" x2="{:.2}" y2="{base}" stroke="black"/>"#, left + plot_w).unwrap();
    let mut decade = x_lo as i32;
    while decade as f64 <= x_hi {
        let x = left + plot_w * (decade as f64 - x_lo) / (x_hi - x_lo);
        let label = 10f64.powi(decade);
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{label}</text>"#, base + 14.0).unwrap();
        decade += 1;
    }
    for (i, series) in plot.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = series.points.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.density))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        let ly = top + 14.0 * i as f64;
        writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, left + plot_w + 12.0, ly).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#, left + plot_w + 26.0, ly + 9.0, escape(&series.label)).unwrap();
    }
    for (i, foot) in plot.below_gate.iter().enumerate() {
        let ly = top + 14.0 * (plot.series.len() + 1 + i) as f64;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9" fill="gray">{} omitted (n={})</text>"#, left + plot_w + 12.0, ly + 9.0, escape(&foot.server_id), foot.samples).unwrap();
    }
    if let Some(note) = &plot.note {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#, left + 10.0, top + plot_h / 2.0, escape(note)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
