//! Run configuration files.
//!
//! A sectioned `key = value` format:
//!
//! ```text
//! seed = 7
//!
//! [problem]
//! name = "cole-hopf"    # or quadratic-drift, quartic, custom
//! K = 5
//! T = 1
//!
//! [grid]
//! x_min = -15
//! x_max = 25
//! h = 0.01
//!
//! [scheme]
//! delta_list = 0.1, 0.05, 0.025, 0.01
//! ```
//!
//! Values are numbers, booleans, double-quoted strings or comma-separated
//! lists of those. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::backward_op::OperatorConfig;
use crate::baselines::HowardConfig;
use crate::error::{Error, Result};
use crate::expectation::ExpectationMethod;
use crate::expr::{parse_expression, Expr, Var};
use crate::grid::Grid;
use crate::harness::{Formats, SweepSettings};
use crate::problem::{CoefficientField, HamiltonianSpec, ProblemSpec, SampleBox, TerminalDatum};
use crate::scheme::step_count;

const GLOBAL: &str = "global";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
            Value::List(_) => "list",
        }
    }
}

/// Parsed but untyped contents: section name to key to value. Keys before
/// the first section header land in `global`.
pub type RawConfig = BTreeMap<String, BTreeMap<String, Value>>;

fn parse_scalar(text: &str) -> std::result::Result<Value, String> {
    let text = text.trim();
    if let Some(inner) = text.strip_prefix('"') {
        return match inner.strip_suffix('"') {
            Some(s) if !s.contains('"') => Ok(Value::Str(s.to_string())),
            _ => Err(format!("unterminated string {text}")),
        };
    }
    match text {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        "" => return Err("empty value".into()),
        _ => {}
    }
    text.parse::<f64>()
        .map(Value::Num)
        .map_err(|_| format!("cannot parse `{text}` (strings must be quoted)"))
}

/// Splits on commas outside double quotes.
fn split_list(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut in_str = false;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '"' => in_str = !in_str,
            ',' if !in_str => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::new();
    let mut section = GLOBAL.to_string();
    raw.entry(section.clone()).or_default();
    for (ln, line) in text.lines().enumerate() {
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("line {}", ln + 1);
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(&section, &at, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::config(name, &at, "unknown section"));
            }
            section = name.to_string();
            if raw.contains_key(&section) && !raw[&section].is_empty() {
                return Err(Error::config(&section, &at, "section appears twice"));
            }
            raw.entry(section.clone()).or_default();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(&section, &at, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::config(&section, &at, "empty key"));
        }
        let parts = split_list(value);
        let value = if parts.len() > 1 {
            Value::List(
                parts
                    .into_iter()
                    .map(parse_scalar)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|m| Error::config(&section, key, m))?,
            )
        } else {
            parse_scalar(value).map_err(|m| Error::config(&section, key, m))?
        };
        let entries = raw.entry(section.clone()).or_default();
        if entries.insert(key.to_string(), value).is_some() {
            return Err(Error::config(&section, key, "key appears twice"));
        }
    }
    Ok(raw)
}

const SECTIONS: [&str; 5] = ["problem", "grid", "scheme", "howard", "output"];

/// Typed access to one section; every key read is marked so leftovers can be
/// reported as unknown.
struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, Value>,
}

impl<'a> Section<'a> {
    fn new(raw: &mut RawConfig, name: &'a str) -> Self {
        Section {
            name,
            entries: raw.remove(name).unwrap_or_default(),
        }
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::config(self.name, key, msg)
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Value::Num(v)) if v.is_finite() => Ok(Some(v)),
            Some(v) => Err(self.err(key, format!("expected a finite number, got {}", v.describe()))),
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>> {
        match self.num(key)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
            Some(v) => Err(self.err(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(b)),
            Some(v) => Err(self.err(key, format!("expected true or false, got {}", v.describe()))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Value::Str(s)) => Ok(Some(s)),
            Some(v) => Err(self.err(key, format!("expected a quoted string, got {}", v.describe()))),
        }
    }

    fn strings(&mut self, key: &str) -> Result<Option<Vec<String>>> {
        let items = match self.entries.remove(key) {
            None => return Ok(None),
            Some(Value::List(items)) => items,
            Some(v) => vec![v],
        };
        items
            .into_iter()
            .map(|v| match v {
                Value::Str(s) => Ok(s),
                other => Err(self.err(key, format!("expected strings, got {}", other.describe()))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn nums(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let items = match self.entries.remove(key) {
            None => return Ok(None),
            Some(Value::List(items)) => items,
            Some(v) => vec![v],
        };
        items
            .into_iter()
            .map(|v| match v {
                Value::Num(x) if x.is_finite() => Ok(x),
                other => Err(self.err(key, format!("expected numbers, got {}", other.describe()))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn expr(&mut self, key: &str, allowed: &[Var]) -> Result<Option<Expr>> {
        match self.string(key)? {
            None => Ok(None),
            Some(src) => {
                let e = parse_expression(&src).map_err(|e| self.err(key, e.to_string()))?;
                e.restrict(allowed, key)
                    .map_err(|e| self.err(key, e.to_string()))?;
                Ok(Some(e))
            }
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    ColeHopf,
    QuadraticDrift,
    Quartic,
    Custom,
}

/// Expressions of a user-defined problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomProblem {
    pub sigma: Expr,
    pub drift: Expr,
    pub hamiltonian: Expr,
    pub dual: Option<Expr>,
    pub terminal: Expr,
    /// Piecewise-linear coercivity table `(y, K_H(y))`, nondecreasing.
    pub coercivity: Vec<(f64, f64)>,
    pub coeff_bound: Option<f64>,
    pub coeff_lip: Option<f64>,
    pub terminal_lip: Option<f64>,
    pub terminal_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub k: f64,
    pub horizon: f64,
    /// Shift `a` of the `quadratic-drift` Hamiltonian `ap + p²/2`.
    pub a: f64,
    pub radius_constant: f64,
    pub custom: Option<CustomProblem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    /// Step used by `solve`.
    pub delta: f64,
    /// Steps swept by `convergence` and `compare`, descending.
    pub delta_list: Vec<f64>,
    pub quadrature_order: usize,
    pub refine: bool,
    pub radius_safety: f64,
    pub expectation: ExpectationMethod,
    pub probe: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HowardSettings {
    /// Derived from the problem when absent.
    pub q_max: Option<f64>,
    pub q_points: usize,
    pub value_tol: f64,
    pub max_policy_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Formats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub scheme: SchemeConfig,
    pub howard: HowardSettings,
    pub output: OutputConfig,
    pub seed: u64,
    pub threads: Option<usize>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut raw = parse_raw(text)?;

    let mut global = Section::new(&mut raw, GLOBAL);
    let seed = global.count("seed")?.unwrap_or(0) as u64;
    let threads = global.count("threads")?;
    if threads == Some(0) {
        return Err(global.err("threads", "must be >= 1"));
    }
    global.finish()?;

    let problem = parse_problem(Section::new(&mut raw, "problem"))?;

    let mut s = Section::new(&mut raw, "grid");
    let grid = GridConfig {
        x_min: s.num("x_min")?.unwrap_or(-15.0),
        x_max: s.num("x_max")?.unwrap_or(25.0),
        h: s.num("h")?.unwrap_or(0.01),
    };
    if !(grid.h > 0.0) {
        return Err(s.err("h", "must be > 0"));
    }
    if !(grid.x_min < grid.x_max) {
        return Err(s.err(
            "x_max",
            format!("x_min = {} must be < x_max = {}", grid.x_min, grid.x_max),
        ));
    }
    Grid::from_range(grid.x_min, grid.x_max, grid.h).map_err(|e| s.err("h", e.to_string()))?;
    s.finish()?;

    let scheme = parse_scheme(Section::new(&mut raw, "scheme"), &problem, &grid)?;

    let mut s = Section::new(&mut raw, "howard");
    let howard = HowardSettings {
        q_max: s.num("q_max")?,
        q_points: s.count("q_points")?.unwrap_or(201),
        value_tol: s.num("value_tol")?.unwrap_or(1e-12),
        max_policy_iters: s.count("max_policy_iters")?.unwrap_or(50),
    };
    if let Some(q) = howard.q_max {
        if !(q > 0.0) {
            return Err(s.err("q_max", "must be > 0"));
        }
    }
    if howard.q_points < 3 || howard.q_points.is_multiple_of(2) {
        return Err(s.err("q_points", "must be odd and >= 3 so the control grid contains 0"));
    }
    if !(howard.value_tol >= 0.0) {
        return Err(s.err("value_tol", "must be >= 0"));
    }
    if howard.max_policy_iters == 0 {
        return Err(s.err("max_policy_iters", "must be >= 1"));
    }
    s.finish()?;

    let mut s = Section::new(&mut raw, "output");
    let dir = PathBuf::from(s.string("dir")?.unwrap_or_else(|| "out".into()));
    let formats = match s.strings("formats")? {
        None => Formats::default(),
        Some(list) => {
            let mut f = Formats {
                csv: false,
                svg: false,
            };
            for item in &list {
                match item.as_str() {
                    "csv" => f.csv = true,
                    "svg" => f.svg = true,
                    other => return Err(s.err("formats", format!("unknown format `{other}`"))),
                }
            }
            f
        }
    };
    s.finish()?;

    Ok(RunConfig {
        problem,
        grid,
        scheme,
        howard,
        output: OutputConfig { dir, formats },
        seed,
        threads,
    })
}

fn parse_problem(mut s: Section<'_>) -> Result<ProblemConfig> {
    let name = s.string("name")?.unwrap_or_else(|| "cole-hopf".into());
    let kind = match name.as_str() {
        "cole-hopf" => ProblemKind::ColeHopf,
        "quadratic-drift" => ProblemKind::QuadraticDrift,
        "quartic" => ProblemKind::Quartic,
        "custom" => ProblemKind::Custom,
        other => return Err(s.err("name", format!("unknown problem `{other}`"))),
    };
    let k = s.num("K")?.unwrap_or(5.0);
    let horizon = s.num("T")?.unwrap_or(1.0);
    if !(k > 0.0) {
        return Err(s.err("K", "must be > 0"));
    }
    if !(horizon > 0.0) {
        return Err(s.err("T", "must be > 0"));
    }
    let a = s.num("a")?.unwrap_or(0.0);
    let radius_constant = s.num("radius_constant")?.unwrap_or(1.0);
    if !(radius_constant > 0.0) {
        return Err(s.err("radius_constant", "must be > 0"));
    }
    let custom = if kind == ProblemKind::Custom {
        let tx = [Var::T, Var::X];
        let required = |s: &mut Section<'_>, key: &str, allowed: &[Var]| -> Result<Expr> {
            s.expr(key, allowed)?
                .ok_or_else(|| s.err(key, "required for a custom problem"))
        };
        let sigma = required(&mut s, "sigma", &tx)?;
        let drift = required(&mut s, "b", &tx)?;
        let hamiltonian = required(&mut s, "hamiltonian", &[Var::T, Var::X, Var::P])?;
        let dual = s.expr("dual", &[Var::T, Var::X, Var::Q])?;
        let terminal = required(&mut s, "terminal", &[Var::X])?;
        let ys = s
            .nums("coercivity_y")?
            .ok_or_else(|| s.err("coercivity_y", "required for a custom problem"))?;
        let rs = s
            .nums("coercivity_r")?
            .ok_or_else(|| s.err("coercivity_r", "required for a custom problem"))?;
        if ys.len() != rs.len() || ys.is_empty() {
            return Err(s.err("coercivity_r", "must have as many entries as coercivity_y"));
        }
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(s.err("coercivity_y", "must be strictly increasing"));
        }
        if rs.windows(2).any(|w| w[1] < w[0]) || rs[0] < 0.0 {
            return Err(s.err("coercivity_r", "must be nonnegative and nondecreasing"));
        }
        let nonneg = |s: &mut Section<'_>, key: &str| -> Result<Option<f64>> {
            match s.num(key)? {
                Some(v) if v < 0.0 => Err(s.err(key, "must be >= 0")),
                v => Ok(v),
            }
        };
        Some(CustomProblem {
            sigma,
            drift,
            hamiltonian,
            dual,
            terminal,
            coercivity: ys.into_iter().zip(rs).collect(),
            coeff_bound: nonneg(&mut s, "coeff_bound")?,
            coeff_lip: nonneg(&mut s, "coeff_lip")?,
            terminal_lip: nonneg(&mut s, "terminal_lip")?,
            terminal_bound: nonneg(&mut s, "terminal_bound")?,
        })
    } else {
        None
    };
    s.finish()?;
    Ok(ProblemConfig {
        kind,
        k,
        horizon,
        a,
        radius_constant,
        custom,
    })
}

fn parse_scheme(mut s: Section<'_>, problem: &ProblemConfig, grid: &GridConfig) -> Result<SchemeConfig> {
    let delta = s.num("delta")?;
    let list = s.nums("delta_list")?;
    let (delta, mut delta_list) = match (delta, list) {
        (Some(d), Some(l)) => (d, l),
        (Some(d), None) => (d, vec![d]),
        (None, Some(l)) => (l.iter().copied().fold(f64::NAN, f64::max), l),
        (None, None) => (0.1, vec![0.1, 0.05, 0.025, 0.01]),
    };
    if delta_list.is_empty() {
        return Err(s.err("delta_list", "must not be empty"));
    }
    for (key, d) in std::iter::once(("delta", delta)).chain(delta_list.iter().map(|&d| ("delta_list", d))) {
        if !(d > 0.0) {
            return Err(s.err(key, format!("Δ = {d} must be > 0")));
        }
        step_count(problem.horizon, d)?;
    }
    delta_list.sort_by(|a, b| b.total_cmp(a));
    delta_list.dedup();
    let quadrature_order = s.count("quadrature_order")?.unwrap_or(16);
    if !(1..=200).contains(&quadrature_order) {
        return Err(s.err("quadrature_order", "must be in 1..=200"));
    }
    let refine = s.boolean("refine")?.unwrap_or(true);
    let radius_safety = s.num("radius_safety")?.unwrap_or(2.0);
    if !(radius_safety >= 1.0) {
        return Err(s.err("radius_safety", "must be >= 1"));
    }
    let expectation = match s.string("expectation")? {
        None => ExpectationMethod::Auto,
        Some(m) => m
            .parse()
            .map_err(|e: Error| s.err("expectation", e.to_string()))?,
    };
    let probe = match s.nums("probe")? {
        None => (0.0, problem.k),
        Some(p) if p.len() == 2 => (p[0], p[1]),
        Some(_) => return Err(s.err("probe", "expected `t, x`")),
    };
    if !(probe.0 >= 0.0 && probe.0 < problem.horizon) {
        return Err(s.err("probe", format!("t = {} outside [0, T)", probe.0)));
    }
    if !(probe.1 > grid.x_min && probe.1 < grid.x_max) {
        return Err(s.err("probe", format!("x = {} outside the grid interior", probe.1)));
    }
    s.finish()?;
    Ok(SchemeConfig {
        delta,
        delta_list,
        quadrature_order,
        refine,
        radius_safety,
        expectation,
        probe,
    })
}

/// Piecewise-linear interpolation of a nondecreasing table, extended
/// linearly with the last slope.
fn coercivity_from_table(table: Vec<(f64, f64)>) -> impl Fn(f64) -> f64 + Send + Sync {
    move |y: f64| {
        let n = table.len();
        if n == 1 || y <= table[0].0 {
            return table[0].1;
        }
        for w in table.windows(2) {
            let ((y0, r0), (y1, r1)) = (w[0], w[1]);
            if y <= y1 {
                return r0 + (r1 - r0) * (y - y0) / (y1 - y0);
            }
        }
        let ((y0, r0), (y1, r1)) = (table[n - 2], table[n - 1]);
        r1 + (r1 - r0) / (y1 - y0) * (y - y1)
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::from_range(self.grid.x_min, self.grid.x_max, self.grid.h)
    }

    pub fn sample_box(&self) -> SampleBox {
        SampleBox::new(0.0, self.problem.horizon, self.grid.x_min, self.grid.x_max)
    }

    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        let prob = match p.kind {
            ProblemKind::ColeHopf => ProblemSpec::cole_hopf(p.k, p.horizon)?,
            ProblemKind::QuadraticDrift => ProblemSpec::quadratic_drift(p.a, p.k, p.horizon)?,
            ProblemKind::Quartic => ProblemSpec::quartic(p.k, p.horizon)?,
            ProblemKind::Custom => self.build_custom(p.custom.as_ref().expect("custom problem parsed"))?,
        };
        Ok(prob.with_radius_constant(p.radius_constant))
    }

    fn build_custom(&self, c: &CustomProblem) -> Result<ProblemSpec> {
        let sample = self.sample_box();
        let (sigma, drift) = (c.sigma.clone(), c.drift.clone());
        let lattice: Vec<(f64, f64)> = sample.lattice().collect();
        let coeff_bound = c.coeff_bound.unwrap_or_else(|| {
            lattice
                .iter()
                .map(|&(t, x)| {
                    sigma
                        .eval_at(t, x, 0.0, 0.0)
                        .abs()
                        .max(drift.eval_at(t, x, 0.0, 0.0).abs())
                })
                .fold(0.0, f64::max)
        });
        let coeff_lip = c.coeff_lip.unwrap_or_else(|| {
            let eps = 1e-4;
            lattice
                .iter()
                .map(|&(t, x)| {
                    let ds = (sigma.eval_at(t, x + eps, 0.0, 0.0) - sigma.eval_at(t, x, 0.0, 0.0)).abs();
                    let db = (drift.eval_at(t, x + eps, 0.0, 0.0) - drift.eval_at(t, x, 0.0, 0.0)).abs();
                    ds.max(db) / eps
                })
                .fold(0.0, f64::max)
        });
        let coeffs = CoefficientField::new(
            Arc::new(move |t, x| sigma.eval_at(t, x, 0.0, 0.0)),
            Arc::new(move |t, x| drift.eval_at(t, x, 0.0, 0.0)),
            coeff_bound,
            coeff_lip,
        );

        let h_expr = c.hamiltonian.clone();
        let tx_free = !h_expr.variables().iter().any(|v| matches!(v, Var::T | Var::X));
        let mut hamiltonian = HamiltonianSpec::new(
            Arc::new(move |t, x, p| h_expr.eval_at(t, x, p, 0.0)),
            Arc::new(coercivity_from_table(c.coercivity.clone())),
        );
        if let Some(dual) = &c.dual {
            let dual = dual.clone();
            hamiltonian = hamiltonian.with_dual(Arc::new(move |t, x, q| dual.eval_at(t, x, 0.0, q)));
        }
        if tx_free {
            hamiltonian = hamiltonian.independent_of_tx();
        }

        let grid = self.grid()?;
        let u_expr = c.terminal.clone();
        let sampled = grid.sample(|x| u_expr.eval_at(0.0, x, 0.0, 0.0));
        if let Some(i) = sampled.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::config(
                "problem",
                "terminal",
                format!("not finite at x = {}", grid.x(i)),
            ));
        }
        let terminal = TerminalDatum::new(
            Arc::new(move |x| u_expr.eval_at(0.0, x, 0.0, 0.0)),
            c.terminal_lip.unwrap_or_else(|| sampled.lipschitz()),
            c.terminal_bound.unwrap_or_else(|| sampled.sup_norm()),
        );
        ProblemSpec::new(
            "custom",
            coeffs,
            hamiltonian,
            terminal,
            self.problem.horizon,
            sample,
        )
    }

    pub fn operator_config(&self, delta: f64) -> OperatorConfig {
        OperatorConfig {
            delta,
            quadrature_order: self.scheme.quadrature_order,
            refine: self.scheme.refine,
            radius_safety: self.scheme.radius_safety,
            expectation: self.scheme.expectation,
        }
    }

    pub fn howard_config(&self, prob: &ProblemSpec) -> Result<HowardConfig> {
        let h = &self.howard;
        let q_max = match h.q_max {
            Some(q) => q,
            None => HowardConfig::for_problem(prob, self.scheme.radius_safety)?
                .q_grid
                .last()
                .copied()
                .expect("nonempty control grid"),
        };
        HowardConfig::uniform(q_max, h.q_points, h.max_policy_iters, h.value_tol)
    }

    pub fn sweep_settings(&self, prob: &ProblemSpec) -> Result<SweepSettings> {
        Ok(SweepSettings {
            operator: self.operator_config(self.scheme.delta),
            howard: Some(self.howard_config(prob)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: Error) -> (String, String) {
        match e {
            Error::Config { section, key, .. } => (section, key),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn builtin_cole_hopf() {
        let cfg = parse_config_str("[problem]\nname = \"cole-hopf\"\nK = 5\nT = 1\n[scheme]\ndelta = 0.1\n")
            .unwrap();
        let prob = cfg.build_problem().unwrap();
        assert_eq!(prob.name, "cole-hopf");
        assert!(prob.benchmark.is_some());
        assert_eq!(prob.coeffs.sigma(0.3, 1.0), 1.0);
        assert_eq!(prob.coeffs.drift(0.3, 1.0), 0.0);
        assert_eq!(prob.hamiltonian.eval(0.0, 0.0, 3.0), 4.5);
        assert_eq!(prob.terminal.eval(7.0), 5.0);
        assert_eq!(prob.horizon, 1.0);
        assert_eq!(cfg.grid().unwrap().len(), 4001);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(
            cfg.howard,
            HowardSettings {
                q_max: None,
                q_points: 201,
                value_tol: 1e-12,
                max_policy_iters: 50
            }
        );
        assert_eq!(cfg.scheme.quadrature_order, 16);
        assert!(cfg.scheme.refine);
        assert_eq!(cfg.scheme.radius_safety, 2.0);
        assert_eq!(
            cfg.grid,
            GridConfig {
                x_min: -15.0,
                x_max: 25.0,
                h: 0.01
            }
        );
        assert_eq!(cfg.scheme.delta_list, vec![0.1, 0.05, 0.025, 0.01]);
        assert_eq!(cfg.scheme.probe, (0.0, 5.0));
        let prob = cfg.build_problem().unwrap();
        let hc = cfg.howard_config(&prob).unwrap();
        assert!((hc.q_grid[200] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bad_delta_is_step_mismatch() {
        let e = parse_config_str("[scheme]\ndelta = 0.3\n").unwrap_err();
        assert!(matches!(e, Error::StepMismatch { .. }), "{e:?}");
        let e = parse_config_str("[scheme]\ndelta_list = 0.1, 0.3\n").unwrap_err();
        assert!(matches!(e, Error::StepMismatch { .. }), "{e:?}");
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let cases = [
            ("[grid]\nx_min = 3\nx_max = 1\n", "grid", "x_max"),
            ("[grid]\nh = -0.1\n", "grid", "h"),
            ("[grid]\nx_min = 0\nx_max = 1\nh = 0.3\n", "grid", "h"),
            ("[scheme]\ndelta = -1\n", "scheme", "delta"),
            ("[scheme]\nradius_safety = 0.5\n", "scheme", "radius_safety"),
            ("[scheme]\nquadrature_order = 0\n", "scheme", "quadrature_order"),
            ("[scheme]\nrefine = 1\n", "scheme", "refine"),
            ("[scheme]\nprobe = 0, 100\n", "scheme", "probe"),
            ("[scheme]\nexpectation = \"simpson\"\n", "scheme", "expectation"),
            ("[howard]\nq_points = 200\n", "howard", "q_points"),
            ("[howard]\nmax_policy_iters = 0\n", "howard", "max_policy_iters"),
            ("[problem]\nname = \"heat\"\n", "problem", "name"),
            ("[problem]\nT = 0\n", "problem", "T"),
            ("[problem]\nK = -1\n", "problem", "K"),
            ("[output]\nformats = \"pdf\"\n", "output", "formats"),
            ("[output]\ncolour = \"red\"\n", "output", "colour"),
            ("threads = 0\n", "global", "threads"),
        ];
        for (text, section, key) in cases {
            let (s, k) = key_of(parse_config_str(text).unwrap_err());
            assert_eq!((s.as_str(), k.as_str()), (section, key), "{text}");
        }
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(parse_config_str("[problem\n").is_err());
        assert!(parse_config_str("[colours]\n").is_err());
        assert!(parse_config_str("[grid]\nh 0.1\n").is_err());
        assert!(parse_config_str("[grid]\nh = 0.1\nh = 0.2\n").is_err());
        assert!(parse_config_str("[problem]\nname = cole-hopf\n").is_err());
    }

    #[test]
    fn comments_lists_and_strings() {
        let raw = parse_raw("a = 1, 2.5 # trailing\nb = \"x # y, z\"\n# whole line\nc = true\n").unwrap();
        let g = &raw["global"];
        assert_eq!(g["a"], Value::List(vec![Value::Num(1.0), Value::Num(2.5)]));
        assert_eq!(g["b"], Value::Str("x # y, z".into()));
        assert_eq!(g["c"], Value::Bool(true));
    }

    #[test]
    fn custom_problem_from_expressions() {
        let text = r#"
seed = 3
[problem]
name = "custom"
T = 1
sigma = "1"
b = "0"
hamiltonian = "p^2/2"
dual = "q^2/2"
terminal = "clamp(x, 0, 5)"
coercivity_y = 0, 1
coercivity_r = 0, 2
[grid]
x_min = -5
x_max = 10
h = 0.05
[scheme]
delta = 0.25
"#;
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.seed, 3);
        let custom = cfg.build_problem().unwrap();
        assert!(custom.hamiltonian.is_tx_free());
        assert!((custom.terminal.lipschitz - 1.0).abs() < 1e-9);
        assert_eq!(custom.terminal.bound, 5.0);
        assert!((custom.hamiltonian.coercivity_radius(3.0) - 6.0).abs() < 1e-12);
        assert!(custom.validate().is_empty(), "{:?}", custom.validate());

        let builtin = ProblemSpec::cole_hopf(5.0, 1.0).unwrap();
        let grid = cfg.grid().unwrap();
        let op = cfg.operator_config(0.25);
        let a = crate::scheme::solve(&custom, &grid, &op).unwrap();
        let b = crate::scheme::solve(&builtin, &grid, &op).unwrap();
        assert_eq!(a.layers[0].values(), b.layers[0].values());
    }

    #[test]
    fn custom_problem_requires_expressions() {
        let (s, k) = key_of(parse_config_str("[problem]\nname = \"custom\"\nsigma = \"1\"\n").unwrap_err());
        assert_eq!((s.as_str(), k.as_str()), ("problem", "b"));
        let (_, k) = key_of(parse_config_str("[problem]\nname = \"custom\"\nsigma = \"p\"\n").unwrap_err());
        assert_eq!(k, "sigma");
    }
}
