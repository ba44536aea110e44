//! CSV output of run sets and SVG convergence plots.
//!
//! A run set is written as two files: `<stem>.csv` with one row per recorded
//! trace point and `<stem>.aggregate.csv` with the across-seed mean and
//! variance on the shared checkpoint grid.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, run_err, Result};
use crate::harness::RunSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: String,
    pub config_id: String,
    pub seed: u64,
    pub grad_evals: u64,
    pub objective: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub config_id: String,
    pub grad_evals: u64,
    pub mean_objective: f64,
    pub variance: f64,
}

/// `runs.csv` -> `runs.aggregate.csv`
pub fn aggregate_path(runs_csv: &Path) -> PathBuf {
    let stem = runs_csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    runs_csv.with_file_name(format!("{stem}.aggregate.csv"))
}

fn sci(x: f64) -> String {
    // 17 significant digits round-trip every f64.
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> crate::error::HarnessError {
    run_err(format!("{}: {e}", path.display()))
}

/// Writes the per-point CSV at `path` and the aggregate CSV next to it.
pub fn emit_csv(runs: &RunSet, path: &Path) -> Result<(PathBuf, PathBuf)> {
    if runs.configs.is_empty() || runs.configs.iter().all(|c| c.traces.is_empty()) {
        return Err(run_err("refusing to write an empty run set"));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| csv_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["method", "config_id", "seed", "grad_evals", "objective", "wall_seconds"])
        .map_err(|e| csv_err(path, e))?;
    for c in &runs.configs {
        for t in &c.traces {
            for p in &t.points {
                w.write_record([
                    c.method.to_string(),
                    c.config_id.clone(),
                    t.seed.to_string(),
                    p.grad_evals.to_string(),
                    sci(p.objective),
                    format!("{:.6}", p.wall_seconds),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| csv_err(path, e))?;

    let agg = aggregate_path(path);
    let mut w = csv::Writer::from_path(&agg).map_err(|e| csv_err(&agg, e))?;
    w.write_record(["method", "config_id", "grad_evals", "mean_objective", "variance"])
        .map_err(|e| csv_err(&agg, e))?;
    for (c, points) in runs.configs.iter().zip(&runs.aggregates) {
        for p in points {
            w.write_record([c.method.to_string(), c.config_id.clone(), p.grad_evals.to_string(), sci(p.mean), sci(p.variance)])
                .map_err(|e| csv_err(&agg, e))?;
        }
    }
    w.flush().map_err(|e| csv_err(&agg, e))?;
    Ok((path.to_path_buf(), agg))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>> {
    read_rows(path)
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    read_rows(path)
}

/// One plotted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub config_id: String,
    /// `(grad_evals, mean, variance)`
    pub points: Vec<(u64, f64, f64)>,
}

impl Series {
    /// Text before `:` in the config id, if any.
    pub fn panel(&self) -> Option<&str> {
        self.config_id.split_once(':').map(|(p, _)| p)
    }

    fn label(&self) -> &str {
        self.config_id.split_once(':').map_or(self.config_id.as_str(), |(_, l)| l)
    }
}

/// Groups aggregate rows into series, keeping first-appearance order.
pub fn series_from_rows(rows: &[AggregateRow]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in rows {
        let point = (r.grad_evals, r.mean_objective, r.variance);
        match out.iter_mut().find(|s| s.config_id == r.config_id) {
            Some(s) => s.points.push(point),
            None => out.push(Series { config_id: r.config_id.clone(), points: vec![point] }),
        }
    }
    out
}

pub fn series_from_runset(runs: &RunSet) -> Vec<Series> {
    runs.configs
        .iter()
        .zip(&runs.aggregates)
        .map(|(c, a)| Series { config_id: c.config_id.clone(), points: a.iter().map(|p| (p.grad_evals, p.mean, p.variance)).collect() })
        .collect()
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 380.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const LEGEND_ROW: f64 = 18.0;

/// `0`, `750`, `5e3`, `1.5e4`
fn tick_label(g: f64) -> String {
    if g < 1e3 {
        return format!("{g}");
    }
    let e = format!("{g:.2e}");
    let (mantissa, exp) = e.split_once('e').expect("exponent form");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{mantissa}e{exp}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axes {
    x0: f64,
    y0: f64,
    x_max: f64,
    lo_decade: i32,
    hi_decade: i32,
}

impl Axes {
    fn width(&self) -> f64 {
        PANEL_W - MARGIN_L - MARGIN_R
    }

    fn height(&self) -> f64 {
        PANEL_H - MARGIN_T - MARGIN_B
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + MARGIN_L + x / self.x_max * self.width()
    }

    fn py(&self, y: f64) -> f64 {
        let span = (self.hi_decade - self.lo_decade) as f64;
        let t = (y.log10() - self.lo_decade as f64) / span;
        self.y0 + MARGIN_T + (1.0 - t.clamp(0.0, 1.0)) * self.height()
    }
}

fn panel_svg(out: &mut String, title: &str, series: &[(usize, &Series)], x0: f64, legend_rows: usize) -> Result<()> {
    let positive = series.iter().flat_map(|(_, s)| &s.points).map(|p| p.1).filter(|v| v.is_finite() && *v > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return Err(run_err(format!("panel {title:?} has no positive finite values to plot")));
    }
    let lo_decade = lo.log10().floor() as i32;
    let hi_decade = (hi.log10().ceil() as i32).max(lo_decade + 1);
    let x_max = series.iter().flat_map(|(_, s)| &s.points).map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let ax = Axes { x0, y0: 0.0, x_max, lo_decade, hi_decade };

    writeln!(out, r#"<g class="panel">"#).unwrap();
    let (left, top) = (x0 + MARGIN_L, MARGIN_T);
    writeln!(out, r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#000"/>"##, ax.width(), ax.height()).unwrap();
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, left + ax.width() / 2.0, escape(title)).unwrap();
    for d in lo_decade..=hi_decade {
        let y = ax.py(10f64.powi(d));
        writeln!(out, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, left + ax.width()).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">1e{d}</text>"#, left - 6.0, y + 4.0).unwrap();
    }
    for k in 0..=4 {
        let g = x_max * k as f64 / 4.0;
        let x = ax.px(g);
        let bottom = top + ax.height();
        writeln!(out, r##"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, bottom + 5.0).unwrap();
        writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#, bottom + 18.0, tick_label(g.round())).unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">component gradients</text>"#,
        left + ax.width() / 2.0,
        top + ax.height() + 40.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle" font-size="12">objective</text>"#,
        x0 + 16.0,
        top + ax.height() / 2.0
    )
    .unwrap();

    for (color_idx, s) in series {
        let color = PALETTE[color_idx % PALETTE.len()];
        // mean +- one standard deviation, clipped to the positive axis
        let band: Vec<(f64, f64, f64)> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite() && p.1 > 0.0 && p.2.is_finite())
            .map(|&(g, m, v)| {
                let sd = v.max(0.0).sqrt();
                (g as f64, (m + sd).max(f64::MIN_POSITIVE), (m - sd).max(m * 1e-3).max(f64::MIN_POSITIVE))
            })
            .collect();
        if band.len() > 1 {
            let mut pts = String::new();
            for &(g, up, _) in &band {
                write!(pts, "{:.2},{:.2} ", ax.px(g), ax.py(up)).unwrap();
            }
            for &(g, _, down) in band.iter().rev() {
                write!(pts, "{:.2},{:.2} ", ax.px(g), ax.py(down)).unwrap();
            }
            writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, pts.trim_end()).unwrap();
        }
        // polyline segments, broken at non-finite or non-positive means
        let mut segment = String::new();
        let flush = |segment: &mut String, out: &mut String| {
            if segment.contains(' ') {
                writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#, segment.trim_end()).unwrap();
            }
            segment.clear();
        };
        for &(g, m, _) in &s.points {
            if m.is_finite() && m > 0.0 {
                write!(segment, "{:.2},{:.2} ", ax.px(g as f64), ax.py(m)).unwrap();
            } else {
                flush(&mut segment, out);
            }
        }
        flush(&mut segment, out);
    }

    let legend_top = PANEL_H + 6.0;
    for (row, (color_idx, s)) in series.iter().enumerate() {
        let color = PALETTE[color_idx % PALETTE.len()];
        let y = legend_top + row as f64 * LEGEND_ROW;
        writeln!(
            out,
            r#"<g class="legend-entry"><line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text></g>"#,
            left + 24.0,
            left + 30.0,
            y + 4.0,
            escape(s.label())
        )
        .unwrap();
    }
    debug_assert!(series.len() <= legend_rows);
    writeln!(out, "</g>").unwrap();
    Ok(())
}

/// Renders one panel per config-id prefix (text before `:`); ids without a
/// prefix share a panel titled `title`.
pub fn render_svg(series: &[Series], title: &str) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(run_err("refusing to plot an empty run set"));
    }
    let mut panels: Vec<(String, Vec<(usize, &Series)>)> = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let name = s.panel().unwrap_or(title).to_string();
        match panels.iter_mut().find(|(p, _)| *p == name) {
            Some((_, v)) => v.push((i, s)),
            None => panels.push((name, vec![(i, s)])),
        }
    }
    let legend_rows = panels.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let width = PANEL_W * panels.len() as f64;
    let height = PANEL_H + 16.0 + legend_rows as f64 * LEGEND_ROW;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (k, (name, members)) in panels.iter().enumerate() {
        panel_svg(&mut out, name, members, k as f64 * PANEL_W, legend_rows)?;
    }
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

pub fn emit_plot(series: &[Series], title: &str, path: &Path) -> Result<()> {
    let svg = render_svg(series, title)?;
    fs::write(path, svg).map_err(|e| run_err(format!("{}: {e}", path.display())))
}

/// Resolves the aggregate file for a runs CSV (or accepts one directly).
pub fn locate_aggregate(path: &Path) -> Result<PathBuf> {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let agg = if name.ends_with(".aggregate.csv") { path.to_path_buf() } else { aggregate_path(path) };
    if !agg.exists() {
        return Err(config_err(format!("aggregate file {} not found", agg.display())));
    }
    Ok(agg)
}
