//! SVG charts from trace files.
//!
//! Line charts overlay one series per trace against the epoch axis; the CV
//! chart scatters every per-minibatch raw CV estimate at its position
//! within its epoch, so the spread of points inside an epoch shows how
//! noisy the estimates themselves are.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::trace::{read_trace, TraceRecord};
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Scatter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub mark: Mark,
    pub log_y: bool,
    pub x_range: (f64, f64),
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    pub notices: Vec<String>,
}

/// Fractional epoch position of each record: record `j` of the `n` records
/// in epoch `e` sits at `e + j / n`.
pub fn epoch_positions(records: &[TraceRecord]) -> Vec<f64> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.epoch).or_default() += 1;
    }
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    records
        .iter()
        .map(|r| {
            let j = seen.entry(r.epoch).or_default();
            let x = r.epoch as f64 + *j as f64 / counts[&r.epoch] as f64;
            *j += 1;
            x
        })
        .collect()
}

/// `[first epoch, last epoch + 1]` over all traces.
fn epoch_range(traces: &[(String, Vec<TraceRecord>)]) -> (f64, f64) {
    let epochs = traces.iter().flat_map(|(_, r)| r.iter().map(|r| r.epoch));
    let lo = epochs.clone().min().unwrap_or(0);
    let hi = epochs.max().unwrap_or(0);
    (lo as f64, hi as f64 + 1.0)
}

fn line_chart(
    traces: &[(String, Vec<TraceRecord>)],
    title: &str,
    y_label: &str,
    log_y: bool,
    value: impl Fn(&TraceRecord) -> Option<f64>,
    at_epoch_end: bool,
) -> Option<Chart> {
    let series: Vec<Series> = traces
        .iter()
        .map(|(name, recs)| {
            let xs = epoch_positions(recs);
            let points = recs
                .iter()
                .zip(xs)
                .filter_map(|(r, x)| {
                    let x = if at_epoch_end { r.epoch as f64 + 1.0 } else { x };
                    value(r).map(|y| (x, y))
                })
                .collect();
            Series {
                name: name.clone(),
                points,
            }
        })
        .filter(|s: &Series| !s.points.is_empty())
        .collect();
    if series.is_empty() {
        return None;
    }
    Some(Chart {
        title: title.into(),
        x_label: "epoch".into(),
        y_label: y_label.into(),
        mark: Mark::Line,
        log_y,
        x_range: epoch_range(traces),
        series,
    })
}

pub fn cv_scatter(traces: &[(String, Vec<TraceRecord>)]) -> Option<Chart> {
    let series: Vec<Series> = traces
        .iter()
        .map(|(name, recs)| Series {
            name: name.clone(),
            points: recs
                .iter()
                .zip(epoch_positions(recs))
                .filter_map(|(r, x)| r.cv_raw.map(|c| (x, c)))
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    if series.is_empty() {
        return None;
    }
    Some(Chart {
        title: "Per-minibatch coefficient of variation".into(),
        x_label: "epoch".into(),
        y_label: "CV estimate".into(),
        mark: Mark::Scatter,
        log_y: false,
        x_range: epoch_range(traces),
        series,
    })
}

/// Every chart the traces support, keyed by file stem, plus notices for the
/// ones skipped.
pub fn build_charts(traces: &[(String, Vec<TraceRecord>)]) -> (Vec<(&'static str, Chart)>, Vec<String>) {
    let mut charts = Vec::new();
    let mut notices = Vec::new();
    let mut add = |stem: &'static str, chart: Option<Chart>, what: &str| match chart {
        Some(c) => charts.push((stem, c)),
        None => notices.push(format!("skipping {stem}.svg: no trace has {what} values")),
    };
    add(
        "true_risk",
        line_chart(traces, "Risk", "true risk", true, |r| r.true_risk, false),
        "true_risk",
    );
    add(
        "accuracy",
        line_chart(traces, "Test accuracy", "accuracy", false, |r| r.accuracy, true),
        "accuracy",
    );
    add(
        "test_error",
        line_chart(
            traces,
            "Error on the test set",
            "mean test cost",
            false,
            |r| r.accuracy.map(|_| r.est_risk),
            true,
        ),
        "accuracy",
    );
    add(
        "beta",
        line_chart(traces, "Momentum", "beta", false, |r| Some(r.beta), false),
        "beta",
    );
    add("cv_scatter", cv_scatter(traces), "cv_raw");
    (charts, notices)
}

/// Read traces and write one SVG per chart kind into `out_dir`.
pub fn emit_plots(trace_paths: &[PathBuf], out_dir: &Path) -> Result<PlotOutput> {
    if trace_paths.is_empty() {
        return Err(Error::InvalidParameter("no trace files given".into()));
    }
    let traces = trace_paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            read_trace(p).map(|r| (name, r))
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (charts, notices) = build_charts(&traces);
    let mut files = Vec::new();
    for (stem, chart) in charts {
        let path = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&path, chart.to_svg()).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(PlotOutput { files, notices })
}

/// Roughly five round tick values covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if span <= 0.0 || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    fn y_range(&self) -> Option<(f64, f64)> {
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .filter(|y| y.is_finite() && (!self.log_y || *y > 0.0))
            .map(|y| if self.log_y { y.log10() } else { y });
        let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        if !lo.is_finite() {
            return None;
        }
        if self.log_y {
            Some((lo.floor(), hi.ceil().max(lo.floor() + 1.0)))
        } else if hi > lo {
            let pad = 0.05 * (hi - lo);
            Some((lo - pad, hi + pad))
        } else {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            Some((lo - pad, hi + pad))
        }
    }

    pub fn to_svg(&self) -> String {
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let (x0, x1) = self.x_range;
        let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0, x0 + 1.0) };
        let (y0, y1) = self.y_range().unwrap_or((0.0, 1.0));
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" font-size="18" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
        );

        for t in nice_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="#333"/><text x="{x:.2}" y="{ty}" font-size="12" text-anchor="middle">{}</text>"##,
                fmt_tick(t),
                b = MARGIN_TOP + plot_h,
                b2 = MARGIN_TOP + plot_h + 5.0,
                ty = MARGIN_TOP + plot_h + 20.0,
            );
        }
        let y_ticks: Vec<f64> = if self.log_y {
            (y0 as i64..=y1 as i64).map(|e| e as f64).collect()
        } else {
            nice_ticks(y0, y1)
        };
        for t in y_ticks {
            let y = sy(t);
            let label = if self.log_y { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
            let _ = writeln!(
                svg,
                r##"<line x1="{a}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" stroke="#333"/><line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#eee"/><text x="{tx}" y="{ty:.2}" font-size="12" text-anchor="end">{label}</text>"##,
                a = MARGIN_LEFT - 5.0,
                r = MARGIN_LEFT + plot_w,
                tx = MARGIN_LEFT - 8.0,
                ty = y + 4.0,
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="20" y="{y}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {y})">{}</text>"#,
            escape(&self.y_label),
            y = MARGIN_TOP + plot_h / 2.0,
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|(_, y)| y.is_finite() && (!self.log_y || *y > 0.0))
                .map(|&(x, y)| (sx(x), sy(if self.log_y { y.log10() } else { y })))
                .collect();
            match self.mark {
                Mark::Line => {
                    let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        svg,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        d.join(" ")
                    );
                }
                Mark::Scatter => {
                    let _ = writeln!(svg, r#"<g fill="{color}" fill-opacity="0.6">"#);
                    for (x, y) in pts {
                        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2"/>"#);
                    }
                    let _ = writeln!(svg, "</g>");
                }
            }
            let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
            let lx = MARGIN_LEFT + plot_w + 10.0;
            let _ = writeln!(
                svg,
                r#"<rect x="{lx}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}" font-size="12">{}</text>"#,
                ly - 10.0,
                lx + 18.0,
                ly,
                escape(&s.name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: u64, iteration: u64, cv: Option<f64>, acc: Option<f64>) -> TraceRecord {
        TraceRecord {
            epoch,
            iteration,
            true_risk: None,
            est_risk: 1.0,
            cv_raw: cv,
            cv_smoothed: cv,
            alpha: 0.1,
            beta: 0.5,
            accuracy: acc,
            theta_norm: 1.0,
        }
    }

    #[test]
    fn positions_spread_within_epochs() {
        let r = vec![rec(0, 1, None, None), rec(0, 2, None, None), rec(1, 3, None, None)];
        assert_eq!(epoch_positions(&r), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn scatter_spans_epoch_range() {
        let r: Vec<TraceRecord> = (0..12).map(|i| rec(2 + i / 4, i + 1, Some(0.3), None)).collect();
        let c = cv_scatter(&[("t".into(), r)]).unwrap();
        assert_eq!(c.x_range, (2.0, 5.0));
        assert_eq!(c.series[0].points.len(), 12);
    }

    #[test]
    fn no_accuracy_skips_chart_with_notice() {
        let r = vec![rec(0, 1, Some(0.1), None)];
        let (charts, notices) = build_charts(&[("t".into(), r)]);
        assert!(charts.iter().all(|(s, _)| *s != "accuracy"));
        assert!(notices.iter().any(|n| n.contains("accuracy.svg")));
    }

    #[test]
    fn single_trace_gives_single_series() {
        let r = vec![rec(0, 1, Some(0.1), Some(0.5)), rec(1, 2, Some(0.2), Some(0.7))];
        let (charts, _) = build_charts(&[("only".into(), r)]);
        for (_, c) in &charts {
            assert_eq!(c.series.len(), 1);
        }
        let acc = &charts.iter().find(|(s, _)| *s == "accuracy").unwrap().1;
        assert_eq!(acc.series[0].points, vec![(1.0, 0.5), (2.0, 0.7)]);
        let svg = acc.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(nice_ticks(3.0, 3.0), vec![3.0]);
    }
}
