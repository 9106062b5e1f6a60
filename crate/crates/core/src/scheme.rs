//! Backward iteration `u(t) = S_t(Δ) u(t+Δ)` from the horizon down to 0.

use std::fmt::Write as _;
use std::path::Path;

use crate::backward_op::{BackwardOperator, OperatorConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::problem::ProblemSpec;

const TIME_TOL: f64 = 1e-9;

/// Number of steps `N = T/Δ`, or `StepMismatch` when `Δ` does not divide `T`.
pub fn step_count(horizon: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0) || !(horizon > 0.0) {
        return Err(Error::StepMismatch { delta, horizon });
    }
    let n = (horizon / delta).round();
    if n < 1.0 || (n * delta - horizon).abs() > TIME_TOL {
        return Err(Error::StepMismatch { delta, horizon });
    }
    Ok(n as usize)
}

/// All time layers of a backward solve. `layers[k]` holds `t_k = kΔ`, so the
/// last entry is the gridded terminal datum.
#[derive(Debug, Clone)]
pub struct SchemeSolution {
    pub delta: f64,
    pub horizon: f64,
    pub layers: Vec<GridFunction>,
    pub problem: ProblemSpec,
}

impl SchemeSolution {
    pub fn steps(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn grid(&self) -> &Grid {
        self.layers[0].grid()
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps() {
            self.horizon
        } else {
            k as f64 * self.delta
        }
    }

    pub fn layer_at(&self, t: f64) -> Option<&GridFunction> {
        let k = (t / self.delta).round();
        if k >= 0.0 && (k * self.delta - t).abs() <= TIME_TOL && (k as usize) < self.layers.len() {
            Some(&self.layers[k as usize])
        } else {
            None
        }
    }

    /// `g(t,x) = ω₁U(x) + ω₂(S_{T-Δ}U)(x)` for `t ∈ (T-Δ, T]`.
    pub fn terminal_layer(&self, t: f64, x: f64) -> Result<f64> {
        let (big_t, delta) = (self.horizon, self.delta);
        if !(t > big_t - delta - TIME_TOL && t <= big_t + TIME_TOL) {
            return Err(Error::OutOfRange {
                what: "terminal layer time",
                value: t,
                lo: big_t - delta,
                hi: big_t,
            });
        }
        let w1 = ((t + delta - big_t) / delta).clamp(0.0, 1.0);
        let w2 = 1.0 - w1;
        let s_u = self.layers[self.steps() - 1].interpolate(x);
        Ok(w1 * self.problem.terminal.eval(x) + w2 * s_u)
    }

    /// Value at `(t, x)`. Layer times interpolate in `x`; times in
    /// `(T-Δ, T]` use [`SchemeSolution::terminal_layer`]; other times
    /// interpolate linearly between neighbouring layers.
    pub fn evaluate(&self, t: f64, x: f64) -> Result<f64> {
        if !(t >= -TIME_TOL && t <= self.horizon + TIME_TOL) {
            return Err(Error::OutOfRange {
                what: "evaluation time",
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        if (t - self.horizon).abs() <= TIME_TOL {
            return Ok(self.problem.terminal.eval(x));
        }
        if let Some(layer) = self.layer_at(t) {
            return Ok(layer.interpolate(x));
        }
        if t > self.horizon - self.delta {
            return self.terminal_layer(t, x);
        }
        let k = ((t / self.delta).floor() as usize).min(self.steps() - 1);
        let w = (t - self.time(k)) / self.delta;
        Ok((1.0 - w) * self.layers[k].interpolate(x) + w * self.layers[k + 1].interpolate(x))
    }

    /// Writes `layer_<j>.csv` for every layer (j counted back from the
    /// horizon, `t_j = T - jΔ`) and a `layers.csv` manifest `j,t,file`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let n = self.steps();
        let width = n.to_string().len();
        let mut manifest = String::from("j,t,file\n");
        for j in 0..=n {
            let k = n - j;
            let file = format!("layer_{j:0width$}.csv");
            self.layers[k].write_csv(&dir.join(&file))?;
            let _ = writeln!(manifest, "{j},{:.12},{file}", self.time(k));
        }
        let path = dir.join("layers.csv");
        std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }
}

/// Runs the backward iteration on `grid`.
pub fn solve(prob: &ProblemSpec, grid: &Grid, cfg: &OperatorConfig) -> Result<SchemeSolution> {
    solve_with(prob, grid, cfg, |_, _| {})
}

/// Like [`solve`], calling `progress(k, N)` after each layer `k` is done.
pub fn solve_with(
    prob: &ProblemSpec,
    grid: &Grid,
    cfg: &OperatorConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<SchemeSolution> {
    let n = step_count(prob.horizon, cfg.delta)?;
    let op = BackwardOperator::new(prob, cfg)?;
    let mut layers = Vec::with_capacity(n + 1);
    layers.push(grid.sample(|x| prob.terminal.eval(x)));
    for k in (0..n).rev() {
        let next = layers.last().expect("terminal layer present");
        let layer = op.apply(k as f64 * cfg.delta, next)?;
        layers.push(layer);
        progress(k, n);
    }
    layers.reverse();
    Ok(SchemeSolution {
        delta: cfg.delta,
        horizon: prob.horizon,
        layers,
        problem: prob.clone(),
    })
}

/// Only the `t = 0` layer, holding two layers in memory at a time.
pub fn solve_initial_layer(prob: &ProblemSpec, grid: &Grid, cfg: &OperatorConfig) -> Result<GridFunction> {
    let n = step_count(prob.horizon, cfg.delta)?;
    let op = BackwardOperator::new(prob, cfg)?;
    let mut layer = grid.sample(|x| prob.terminal.eval(x));
    for k in (0..n).rev() {
        layer = op.apply(k as f64 * cfg.delta, &layer)?;
    }
    Ok(layer)
}

/// Per-layer defects `(u_k - S_{t_k}(Δ)u_{k+1})/Δ`, `k = 0..N-1`.
pub fn layer_residuals(
    prob: &ProblemSpec,
    cfg: &OperatorConfig,
    layers: &[GridFunction],
) -> Result<Vec<GridFunction>> {
    let op = BackwardOperator::new(prob, cfg)?;
    (0..layers.len() - 1)
        .map(|k| {
            let s = op.apply(k as f64 * cfg.delta, &layers[k + 1])?;
            Ok(layers[k].combine(1.0 / cfg.delta, &s, -1.0 / cfg.delta))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub max_violation: f64,
    pub worst_layer: usize,
    pub worst_node: usize,
}

/// Checks `u - v <= sup(u_N - v_N)^+ + (T - t_k)·sup_{j>=k}(h1_j - h2_j)^+`
/// at every node and layer, for `u` a sub-solution with defect `h1` and `v`
/// a super-solution with defect `h2`.
pub fn scheme_comparison_check(
    u: &[GridFunction],
    v: &[GridFunction],
    h1: &[GridFunction],
    h2: &[GridFunction],
    delta: f64,
) -> ComparisonReport {
    assert_eq!(u.len(), v.len(), "u and v have different layer counts");
    assert_eq!(h1.len(), h2.len(), "h1 and h2 have different layer counts");
    assert_eq!(h1.len() + 1, u.len(), "need one defect per step");
    let n = u.len() - 1;
    let positive_sup = |a: &GridFunction, b: &GridFunction| {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max(x - y))
    };
    let terminal_excess = positive_sup(&u[n], &v[n]);
    let mut report = ComparisonReport {
        max_violation: 0.0,
        worst_layer: n,
        worst_node: 0,
    };
    let mut defect_gap = 0.0f64;
    for k in (0..=n).rev() {
        if k < n {
            defect_gap = defect_gap.max(positive_sup(&h1[k], &h2[k]));
        }
        let bound = terminal_excess + (n - k) as f64 * delta * defect_gap;
        for (i, (a, b)) in u[k].values().iter().zip(v[k].values()).enumerate() {
            let violation = a - b - bound;
            if violation > report.max_violation {
                report = ComparisonReport {
                    max_violation: violation,
                    worst_layer: k,
                    worst_node: i,
                };
            }
        }
    }
    report
}
