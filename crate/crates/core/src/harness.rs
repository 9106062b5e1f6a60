//! Convergence sweeps, solver comparisons and CSV/SVG reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::backward_op::OperatorConfig;
use crate::baselines::{cole_hopf_exact, howard_fd_solve_detailed, HowardConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::problem::ProblemSpec;
use crate::scheme::{self, step_count, SchemeSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Splitting,
    Howard,
}

impl Solver {
    pub fn label(self) -> &'static str {
        match self {
            Solver::Splitting => "splitting",
            Solver::Howard => "howard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Closed-form Cole-Hopf solution.
    Exact,
    /// The solve at the smallest Δ of the sweep.
    Finest,
}

impl Reference {
    pub fn label(self) -> &'static str {
        match self {
            Reference::Exact => "exact",
            Reference::Finest => "finest",
        }
    }
}

/// Solver settings shared by every Δ of a sweep; `operator.delta` is
/// overwritten per row.
#[derive(Debug, Clone, Default)]
pub struct SweepSettings {
    pub operator: OperatorConfig,
    /// Controls for Howard's method; derived from the problem when absent.
    pub howard: Option<HowardConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub seconds: f64,
    /// Set when the solve for this Δ failed; the numeric fields are NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub solver: Solver,
    /// Sorted by Δ descending.
    pub rows: Vec<ConvergenceRow>,
    pub probe: (f64, f64),
    pub reference: Reference,
    pub reference_value: f64,
    pub fitted_rate: Option<f64>,
    /// Layer `t = 0` of the finest successful solve.
    pub finest_initial_layer: Option<GridFunction>,
}

fn run_solver(
    prob: &ProblemSpec,
    grid: &Grid,
    delta: f64,
    solver: Solver,
    settings: &SweepSettings,
) -> Result<SchemeSolution> {
    match solver {
        Solver::Splitting => {
            let cfg = OperatorConfig {
                delta,
                ..settings.operator.clone()
            };
            scheme::solve(prob, grid, &cfg)
        }
        Solver::Howard => {
            let cfg = match &settings.howard {
                Some(c) => c.clone(),
                None => HowardConfig::for_problem(prob, settings.operator.radius_safety)?,
            };
            let out = howard_fd_solve_detailed(prob, grid, delta, &cfg)?;
            for w in &out.warnings {
                eprintln!("warning: {w}; layer accepted");
            }
            Ok(out.solution)
        }
    }
}

/// One solve per Δ, each evaluated at `probe` and compared with the exact
/// solution when the problem has one, otherwise with the finest-Δ solve.
pub fn run_convergence(
    prob: &ProblemSpec,
    grid: &Grid,
    deltas: &[f64],
    probe: (f64, f64),
    solver: Solver,
    settings: &SweepSettings,
) -> Result<ConvergenceReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("empty Δ list".into()));
    }
    for &d in deltas {
        step_count(prob.horizon, d)?;
    }
    let (t, x) = probe;
    if !(t >= 0.0 && t < prob.horizon) || !(x > grid.x_min() && x < grid.x_max()) {
        return Err(Error::OutOfRange {
            what: "probe",
            value: x,
            lo: grid.x_min(),
            hi: grid.x_max(),
        });
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();

    let mut raw = Vec::with_capacity(sorted.len());
    let mut finest_initial_layer = None;
    for &delta in &sorted {
        let start = Instant::now();
        let result = run_solver(prob, grid, delta, solver, settings);
        let seconds = start.elapsed().as_secs_f64();
        match result.and_then(|sol| Ok((sol.evaluate(t, x)?, sol))) {
            Ok((value, sol)) => {
                finest_initial_layer = Some(sol.layers[0].clone());
                raw.push((delta, Ok(value), seconds));
            }
            Err(e) => raw.push((delta, Err(e.to_string()), seconds)),
        }
    }

    let (reference, reference_value) = match &prob.benchmark {
        Some(params) => (Reference::Exact, cole_hopf_exact(params, t, x)?),
        None => match raw.last() {
            Some((_, Ok(v), _)) => (Reference::Finest, *v),
            _ => return Err(Error::DegenerateFit("finest-Δ reference solve failed".into())),
        },
    };
    let rows = raw
        .into_iter()
        .map(|(delta, value, seconds)| match value {
            Ok(value) => {
                let abs_error = (value - reference_value).abs();
                ConvergenceRow {
                    delta,
                    value,
                    abs_error,
                    rel_error: abs_error / reference_value.abs(),
                    seconds,
                    failure: None,
                }
            }
            Err(msg) => ConvergenceRow {
                delta,
                value: f64::NAN,
                abs_error: f64::NAN,
                rel_error: f64::NAN,
                seconds,
                failure: Some(msg),
            },
        })
        .collect();
    let mut report = ConvergenceReport {
        solver,
        rows,
        probe,
        reference,
        reference_value,
        fitted_rate: None,
        finest_initial_layer,
    };
    report.fitted_rate = estimate_rate(&report).ok();
    Ok(report)
}

/// Least-squares slope of `log(abs_error)` against `log(Δ)`.
pub fn estimate_rate(report: &ConvergenceReport) -> Result<f64> {
    let points: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.failure.is_none())
        .map(|r| (r.delta, r.abs_error))
        .collect();
    fit_log_slope(&points)
}

/// Least-squares slope of `log(e)` against `log(d)` over `(d, e)` pairs.
/// Pairs with `e == 0` are excluded; fewer than two usable pairs is a
/// `DegenerateFit`.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(d, e)| *e > 0.0 && *d > 0.0 && e.is_finite())
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "{} usable point(s), {excluded} excluded for zero or invalid error",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all Δ equal".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Splitting,
    Howard,
    Tie,
}

#[derive(Debug, Clone)]
pub struct SchemeComparison {
    pub grid: Grid,
    pub splitting: ConvergenceReport,
    pub howard: ConvergenceReport,
    /// Per Δ (descending), the solver with the smaller absolute error.
    pub winners: Vec<(f64, Winner)>,
}

impl SchemeComparison {
    pub fn splitting_always_better(&self) -> bool {
        self.winners.iter().all(|(_, w)| *w == Winner::Splitting)
    }
}

/// Runs both solvers on the same grid and Δ sweep.
pub fn compare_schemes(
    prob: &ProblemSpec,
    grid: &Grid,
    deltas: &[f64],
    probe: (f64, f64),
    settings: &SweepSettings,
) -> Result<SchemeComparison> {
    let splitting = run_convergence(prob, grid, deltas, probe, Solver::Splitting, settings)?;
    let howard = run_convergence(prob, grid, deltas, probe, Solver::Howard, settings)?;
    let winners = splitting
        .rows
        .iter()
        .zip(&howard.rows)
        .map(|(s, h)| {
            // errors at rounding level are indistinguishable
            let tol = 1e-12 * (1.0 + splitting.reference_value.abs());
            let w = if (s.abs_error - h.abs_error).abs() <= tol {
                Winner::Tie
            } else if s.abs_error < h.abs_error {
                Winner::Splitting
            } else if h.abs_error < s.abs_error {
                Winner::Howard
            } else {
                Winner::Tie
            };
            (s.delta, w)
        })
        .collect();
    Ok(SchemeComparison {
        grid: *grid,
        splitting,
        howard,
        winners,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats { csv: true, svg: true }
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

/// CSV text with header `delta,value,abs_error,rel_error,seconds`, one block
/// of rows per report in the order given.
pub fn convergence_csv(reports: &[&ConvergenceReport]) -> String {
    let mut out = String::from("delta,value,abs_error,rel_error,seconds\n");
    for r in reports {
        for row in &r.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6}",
                row.delta,
                fmt_num(row.value),
                fmt_num(row.abs_error),
                fmt_num(row.rel_error),
                row.seconds
            );
        }
    }
    out
}

/// Side-by-side table of a comparison.
pub fn comparison_csv(cmp: &SchemeComparison) -> String {
    let mut out = String::from(
        "delta,splitting_value,splitting_rel_error,splitting_seconds,howard_value,howard_rel_error,howard_seconds,better\n",
    );
    for ((s, h), (_, w)) in cmp.splitting.rows.iter().zip(&cmp.howard.rows).zip(&cmp.winners) {
        let better = match w {
            Winner::Splitting => "splitting",
            Winner::Howard => "howard",
            Winner::Tie => "tie",
        };
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{},{},{:.6},{better}",
            s.delta,
            fmt_num(s.value),
            fmt_num(s.rel_error),
            s.seconds,
            fmt_num(h.value),
            fmt_num(h.rel_error),
            h.seconds
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `convergence.csv` and, when requested and there is data,
/// `convergence.svg` and `solution.svg`. Returns the paths written.
pub fn emit_report(reports: &[&ConvergenceReport], out_dir: &Path, formats: Formats) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    if formats.csv {
        let path = out_dir.join("convergence.csv");
        write_file(&path, &convergence_csv(reports))?;
        written.push(path);
    }
    let has_rows = reports.iter().any(|r| !r.rows.is_empty());
    if formats.svg && has_rows {
        let path = out_dir.join("convergence.svg");
        write_file(&path, &convergence_svg(reports))?;
        written.push(path);
        let layers: Vec<(String, &GridFunction)> = reports
            .iter()
            .filter_map(|r| {
                r.finest_initial_layer
                    .as_ref()
                    .map(|l| (format!("{} u(0,x)", r.solver.label()), l))
            })
            .collect();
        if !layers.is_empty() {
            let path = out_dir.join("solution.svg");
            write_file(&path, &solution_svg(&layers, None))?;
            written.push(path);
        }
    }
    Ok(written)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_L: f64 = 90.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 70.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="800" height="600" viewBox="0 0 800 600">
<rect width="800" height="600" fill="white"/>
<text x="400" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#
    );
}

fn svg_frame(out: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">{xlabel}</text>
<text x="20" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {})">{ylabel}</text>"#,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B,
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 20.0,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn svg_polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    out.push_str(r#"<polyline fill="none" stroke=""#);
    out.push_str(color);
    out.push_str(r#"" stroke-width="2" points=""#);
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

fn svg_legend(out: &mut String, labels: &[String]) {
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN_T + 20.0 + 20.0 * i as f64;
        let x = WIDTH - MARGIN_R - 190.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{label}</text>"#,
            x + 25.0,
            COLORS[i % COLORS.len()],
            x + 32.0,
            y + 4.0
        );
    }
    out.push_str("</g>\n");
}

/// Log-log chart of relative error against Δ, one polyline per report.
pub fn convergence_svg(reports: &[&ConvergenceReport]) -> String {
    let pts: Vec<Vec<(f64, f64)>> = reports
        .iter()
        .map(|r| {
            r.rows
                .iter()
                .filter(|row| row.rel_error > 0.0 && row.rel_error.is_finite())
                .map(|row| (row.delta.log10(), row.rel_error.log10()))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-2.0, -1.0, -4.0, -3.0);
    }
    let axes = Axes {
        x: (x0.floor(), x1.ceil().max(x0.floor() + 1.0)),
        y: (y0.floor(), y1.ceil().max(y0.floor() + 1.0)),
    };
    let mut out = String::new();
    svg_open(&mut out, "Relative error at the probe");
    svg_frame(&mut out, "time step Δ (log scale)", "relative error (log scale)");
    for d in axes.x.0 as i32..=axes.x.1 as i32 {
        let px = axes.px(d as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">1e{d}</text>"#,
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 6.0,
            HEIGHT - MARGIN_B + 22.0
        );
    }
    for d in axes.y.0 as i32..=axes.y.1 as i32 {
        let py = axes.py(d as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{MARGIN_L}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">1e{d}</text>"#,
            MARGIN_L - 6.0,
            MARGIN_L - 10.0,
            py + 4.0
        );
    }
    let mut labels = Vec::new();
    for (i, (r, p)) in reports.iter().zip(&pts).enumerate() {
        let mapped: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (axes.px(x), axes.py(y))).collect();
        svg_polyline(&mut out, &mapped, COLORS[i % COLORS.len()]);
        labels.push(match r.fitted_rate {
            Some(rate) => format!("{} (slope {rate:.2})", r.solver.label()),
            None => r.solver.label().to_string(),
        });
    }
    svg_legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Value-against-x chart of grid functions, optionally restricted to an
/// x-window.
pub fn solution_svg(series: &[(String, &GridFunction)], window: Option<(f64, f64)>) -> String {
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::with_capacity(series.len());
    for (_, f) in series {
        let g = f.grid();
        let (lo, hi) = window.unwrap_or((g.x_min(), g.x_max()));
        let stride = (g.len() / 800).max(1);
        pts.push(
            (0..g.len())
                .step_by(stride)
                .map(|i| (g.x(i), f.values()[i]))
                .filter(|(x, _)| *x >= lo && *x <= hi)
                .collect(),
        );
    }
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.iter().flatten() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let axes = Axes {
        x: (x0, x1.max(x0 + 1e-12)),
        y: (y0 - pad, y1 + pad),
    };
    let mut out = String::new();
    svg_open(&mut out, "Approximate values of u(0,x)");
    svg_frame(&mut out, "x", "u");
    for k in 0..=5 {
        let xv = axes.x.0 + (axes.x.1 - axes.x.0) * k as f64 / 5.0;
        let yv = axes.y.0 + (axes.y.1 - axes.y.0) * k as f64 / 5.0;
        let (px, py) = (axes.px(xv), axes.py(yv));
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{xv:.3}</text><text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{yv:.3}</text>"#,
            HEIGHT - MARGIN_B + 22.0,
            MARGIN_L - 10.0,
            py + 4.0
        );
    }
    for (i, p) in pts.iter().enumerate() {
        let mapped: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (axes.px(x), axes.py(y))).collect();
        svg_polyline(&mut out, &mapped, COLORS[i % COLORS.len()]);
    }
    let labels: Vec<String> = series.iter().map(|(l, _)| l.clone()).collect();
    svg_legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}
