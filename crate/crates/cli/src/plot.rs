//! Depth-over-time scatter data for reorg logs, as CSV and a bare SVG.

use std::fmt::Write as _;

use clap::ValueEnum;
use retaliate_core::ingest::{ReorgClass, ReorgEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum XAxis {
    Height,
    Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotPoint {
    pub x: i64,
    pub depth: u64,
    pub series: ReorgClass,
}

pub fn series_name(c: ReorgClass) -> &'static str {
    match c {
        ReorgClass::Random => "Random",
        ReorgClass::DoubleSpend => "DoubleSpend",
    }
}

pub fn plot_points(events: &[ReorgEvent], classes: &[ReorgClass], axis: XAxis) -> Vec<PlotPoint> {
    let mut points: Vec<PlotPoint> = events
        .iter()
        .zip(classes)
        .map(|(e, c)| PlotPoint {
            x: match axis {
                XAxis::Height => e.height as i64,
                XAxis::Timestamp => e.timestamp,
            },
            depth: e.depth,
            series: *c,
        })
        .collect();
    points.sort_by(|a, b| (a.x, a.depth, series_name(a.series)).cmp(&(b.x, b.depth, series_name(b.series))));
    points
}

/// `x,depth,series` rows sorted by x; just the header for an empty log.
pub fn emit_plot_data(events: &[ReorgEvent], classes: &[ReorgClass], axis: XAxis) -> String {
    let mut out = String::from("x,depth,series\n");
    for p in plot_points(events, classes, axis) {
        let _ = writeln!(out, "{},{},{}", p.x, p.depth, series_name(p.series));
    }
    out
}

pub fn render_svg(points: &[PlotPoint]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const M: f64 = 40.0;
    let (x_min, x_max) = points
        .iter()
        .fold((i64::MAX, i64::MIN), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let y_max = points.iter().map(|p| p.depth).max().unwrap_or(1).max(1) as f64;
    let span = if points.is_empty() {
        1.0
    } else {
        (x_max - x_min).max(1) as f64
    };
    let sx = |x: i64| M + (x - x_min) as f64 / span * (W - 2.0 * M);
    let sy = |d: u64| H - M - d as f64 / y_max * (H - 2.0 * M);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    let _ = writeln!(
        svg,
        "<path d=\"M{M} {M} V{b} H{r}\" fill=\"none\" stroke=\"black\"/>",
        b = H - M,
        r = W - M
    );
    let _ = writeln!(
        svg,
        "<text x=\"{M}\" y=\"{}\" font-size=\"12\">depth (max {y_max})</text>",
        M - 10.0
    );
    for p in points {
        let (fill, radius) = match p.series {
            ReorgClass::Random => ("#808080", 2.5),
            ReorgClass::DoubleSpend => ("#d62728", 4.0),
        };
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius}\" fill=\"{fill}\"><title>{}</title></circle>",
            sx(p.x),
            sy(p.depth),
            series_name(p.series)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#808080\">Random</text>",
        W - 160.0,
        M - 10.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#d62728\">DoubleSpend</text>",
        W - 100.0,
        M - 10.0
    );
    svg.push_str("</svg>\n");
    svg
}
