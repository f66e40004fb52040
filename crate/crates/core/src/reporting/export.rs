use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::summary::{quantile, trace_value_at, BudgetMode, SummaryTable};
use super::ReportError;
use crate::engine::{StrategyKind, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

impl FromStr for ExportFormat {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

/// `strategy,fraction,median,q25,q75`, one row per cell.
pub fn render_csv(summary: &SummaryTable) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["strategy", "fraction", "median", "q25", "q75"])?;
    for c in &summary.rows {
        w.write_record([
            c.strategy.as_str().to_string(),
            c.fraction.to_string(),
            c.median.to_string(),
            c.q25.to_string(),
            c.q75.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::io("csv buffer", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const GRID: usize = 60;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Median incumbent value against cumulative cost with a quartile band per
/// strategy, up to the smallest total cost of any trace.
pub fn render_svg(summary: &SummaryTable, traces: &[Vec<TraceRecord>]) -> String {
    let mut groups: BTreeMap<StrategyKind, Vec<&[TraceRecord]>> = BTreeMap::new();
    for t in traces.iter().filter(|t| !t.is_empty()) {
        groups.entry(t[0].strategy).or_default().push(t);
    }
    let max_cost = traces
        .iter()
        .filter_map(|t| t.last().map(|r| r.cum_cost))
        .fold(f64::INFINITY, f64::min);
    let min_cost = traces
        .iter()
        .filter_map(|t| t.first().map(|r| r.cum_cost))
        .fold(f64::INFINITY, f64::min)
        .min(max_cost);
    let xs: Vec<f64> = (0..GRID).map(|i| min_cost + (max_cost - min_cost) * i as f64 / (GRID - 1) as f64).collect();

    let mut curves = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (s, ts) in &groups {
        let mut pts = Vec::with_capacity(GRID);
        for &c in &xs {
            let vals: Vec<f64> = ts.iter().map(|t| trace_value_at(t, BudgetMode::Cost, c)).collect();
            let (q25, med, q75) = (quantile(&vals, 0.25), quantile(&vals, 0.5), quantile(&vals, 0.75));
            lo = lo.min(q25);
            hi = hi.max(q75);
            pts.push((c, q25, med, q75));
        }
        curves.push((*s, pts));
    }
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let span_x = (max_cost - min_cost).max(1e-12);
    let px = |c: f64| MARGIN + (c - min_cost) / span_x * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(&summary.problem)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let c = min_cost + f * span_x;
        let v = lo + f * (hi - lo);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.3}</text>"#,
            px(c),
            y0 + 16.0,
            c
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{:.3}</text>"#,
            x0 - 6.0,
            py(v) + 4.0,
            v
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">cumulative cost</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle" font-family="sans-serif" font-size="12">incumbent value</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (s, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band = String::new();
        for (j, p) in pts.iter().enumerate() {
            let _ = write!(band, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, px(p.0), py(p.3));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "L{:.2},{:.2} ", px(p.0), py(p.1));
        }
        let _ = writeln!(out, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band);
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.2))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 90.0,
            ly + 12.0,
            escape(s.as_str())
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `summary__{problem}.csv` or `{problem}.svg` into `dir`.
pub fn export(summary: &SummaryTable, traces: &[Vec<TraceRecord>], format: ExportFormat, dir: &Path) -> Result<PathBuf, ReportError> {
    let (name, body) = match format {
        ExportFormat::Csv => (format!("summary__{}.csv", summary.problem), render_csv(summary)?),
        ExportFormat::Svg => (format!("{}.svg", summary.problem), render_svg(summary, traces)),
    };
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| ReportError::io(&path, e))?;
    Ok(path)
}
