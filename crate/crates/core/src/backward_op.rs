//! The backward operator
//!
//! ```text
//! S_t(Δ)φ(x) = min_y { Δ L(t, x, (x-y)/Δ) + E[φ(y + b(t,y)Δ + σ(t,y)(W_{t+Δ} - W_t))] }
//! ```
//!
//! evaluated independently at every node of φ's grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expectation::{expect_fd_explicit, frozen_step, Expectation, ExpectationMethod};
use crate::grid::{Grid, GridFunction};
use crate::optimize::golden_min;
use crate::problem::{minimizer_radius, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorConfig {
    pub delta: f64,
    pub quadrature_order: usize,
    pub refine: bool,
    pub radius_safety: f64,
    pub expectation: ExpectationMethod,
}

impl OperatorConfig {
    pub fn new(delta: f64) -> Self {
        OperatorConfig {
            delta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("Δ = {} must be > 0", self.delta)));
        }
        if self.quadrature_order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
        }
        if !(self.radius_safety >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "radius_safety = {} must be >= 1",
                self.radius_safety
            )));
        }
        Ok(())
    }
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            delta: 0.1,
            quadrature_order: 16,
            refine: true,
            radius_safety: 2.0,
            expectation: ExpectationMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeResult {
    pub y_star: f64,
    pub value: f64,
    pub candidates_scanned: usize,
    pub radius_bound_active: bool,
}

/// Per-layer data shared by all nodes: the expectation at every node and
/// the candidate radius.
#[derive(Debug, Clone)]
pub struct LayerContext {
    node_expectations: Vec<f64>,
    /// Candidate half-width in x units.
    pub radius: f64,
}

/// A backward operator bound to a problem and configuration.
#[derive(Debug, Clone)]
pub struct BackwardOperator<'a> {
    prob: &'a ProblemSpec,
    cfg: OperatorConfig,
    expectation: Expectation,
}

impl<'a> BackwardOperator<'a> {
    pub fn new(prob: &'a ProblemSpec, cfg: &OperatorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(BackwardOperator {
            prob,
            cfg: cfg.clone(),
            expectation: Expectation::new(cfg.expectation, cfg.quadrature_order)?,
        })
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.prob
    }

    /// `E[φ(Y^{t,y}_{t+Δ})]` at an arbitrary `y`.
    #[inline]
    pub fn expectation_at(&self, t: f64, y: f64, phi: &GridFunction) -> f64 {
        let step = frozen_step(&self.prob.coeffs, t, self.cfg.delta, y);
        self.expectation.eval(phi, step)
    }

    /// `Δ·L(t,x,(x-y)/Δ) + E[φ(Y^{t,y})]`.
    pub fn objective(&self, t: f64, x: f64, y: f64, phi: &GridFunction) -> Result<f64> {
        let delta = self.cfg.delta;
        let running = delta * self.prob.dual.eval(t, x, (x - y) / delta)?;
        Ok(running + self.expectation_at(t, y, phi))
    }

    pub fn layer_context(&self, t: f64, phi: &GridFunction) -> Result<LayerContext> {
        let grid = phi.grid();
        let delta = self.cfg.delta;
        let xi = minimizer_radius(&self.prob.dual, phi.lipschitz())?;
        let radius = self.cfg.radius_safety * delta * xi;
        let node_expectations = match self.cfg.expectation {
            ExpectationMethod::FiniteDifference => (0..grid.len())
                .into_par_iter()
                .map(|j| expect_fd_explicit(phi, &self.prob.coeffs, t, delta, j))
                .collect::<Result<Vec<_>>>()?,
            _ => (0..grid.len())
                .into_par_iter()
                .map(|j| self.expectation_at(t, grid.x(j), phi))
                .collect(),
        };
        Ok(LayerContext {
            node_expectations,
            radius,
        })
    }

    fn node_objective(&self, t: f64, x: f64, j: usize, grid: &Grid, ctx: &LayerContext) -> Result<f64> {
        let delta = self.cfg.delta;
        let y = grid.x(j);
        Ok(delta * self.prob.dual.eval(t, x, (x - y) / delta)? + ctx.node_expectations[j])
    }

    /// Discrete scan over nodes within `radius` of `x`.
    fn scan(
        &self,
        t: f64,
        x: f64,
        phi: &GridFunction,
        ctx: &LayerContext,
        radius: f64,
    ) -> Result<(usize, usize, Vec<f64>, bool)> {
        let grid = phi.grid();
        let h = grid.h();
        let n = grid.len() as isize;
        let lo_f = ((x - radius - grid.x_min()) / h).ceil() as isize;
        let hi_f = ((x + radius - grid.x_min()) / h).floor() as isize;
        let (mut lo, mut hi) = (lo_f.max(0), hi_f.min(n - 1));
        let forced = hi - lo + 1 < 3;
        if forced {
            let c = grid.nearest(x) as isize;
            lo = (c - 1).max(0);
            hi = (c + 1).min(n - 1);
            if hi - lo < 2 {
                if lo == 0 {
                    hi = (lo + 2).min(n - 1);
                } else {
                    lo = (hi - 2).max(0);
                }
            }
        }
        let (lo, hi) = (lo as usize, hi as usize);
        let vals = (lo..=hi)
            .map(|j| self.node_objective(t, x, j, grid, ctx))
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for k in 1..vals.len() {
            let (yk, yb) = (grid.x(lo + k), grid.x(lo + best));
            let closer = (x - yk).abs() < (x - yb).abs() || ((x - yk).abs() == (x - yb).abs() && yk < yb);
            if vals[k] < vals[best] || (vals[k] == vals[best] && closer) {
                best = k;
            }
        }
        // the bound binds only where the radius, not the grid, cut the scan
        let at_low_cut = best == 0 && lo_f > 0 && !forced;
        let at_high_cut = best == vals.len() - 1 && hi_f < n - 1 && !forced;
        Ok((lo, best, vals, at_low_cut || at_high_cut))
    }

    pub fn minimize_over_y(
        &self,
        t: f64,
        x: f64,
        phi: &GridFunction,
        ctx: &LayerContext,
    ) -> Result<MinimizeResult> {
        let grid = phi.grid();
        let mut radius = ctx.radius;
        let (mut lo, mut best, mut vals, mut active) = self.scan(t, x, phi, ctx, radius)?;
        let mut scanned = vals.len();
        if active {
            radius *= 2.0;
            (lo, best, vals, active) = self.scan(t, x, phi, ctx, radius)?;
            scanned += vals.len();
            if active {
                return Err(Error::RadiusExhausted { x, radius });
            }
        }
        let mut y_star = grid.x(lo + best);
        let mut value = vals[best];
        if self.cfg.refine && self.cfg.expectation != ExpectationMethod::FiniteDifference {
            let h = grid.h();
            let tol_scale = 1e-9 * (1.0 + value.abs());
            // refine around every discrete local minimum so a non-unimodal
            // objective cannot hide a lower basin
            let m = vals.len();
            for k in 0..m {
                let left_ok = k == 0 || vals[k] <= vals[k - 1];
                let right_ok = k == m - 1 || vals[k] <= vals[k + 1];
                if !(left_ok && right_ok) {
                    continue;
                }
                let yk = grid.x(lo + k);
                let failure = std::cell::RefCell::new(None);
                let (y_ref, v_ref) = golden_min(yk - h, yk + h, tol_scale, |y| {
                    match self.objective(t, x, y, phi) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            f64::INFINITY
                        }
                    }
                });
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                if v_ref < value {
                    value = v_ref;
                    y_star = y_ref;
                }
            }
        }
        Ok(MinimizeResult {
            y_star,
            value,
            candidates_scanned: scanned,
            radius_bound_active: active,
        })
    }

    /// `S_t(Δ)φ` on φ's grid.
    pub fn apply(&self, t: f64, phi: &GridFunction) -> Result<GridFunction> {
        let ctx = self.layer_context(t, phi)?;
        let grid = *phi.grid();
        let vals = (0..grid.len())
            .into_par_iter()
            .map(|i| self.minimize_over_y(t, grid.x(i), phi, &ctx).map(|r| r.value))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(grid, vals)
    }
}

pub fn objective(prob: &ProblemSpec, t: f64, delta: f64, x: f64, y: f64, phi: &GridFunction) -> Result<f64> {
    let cfg = OperatorConfig::new(delta);
    BackwardOperator::new(prob, &cfg)?.objective(t, x, y, phi)
}

pub fn minimize_over_y(
    prob: &ProblemSpec,
    t: f64,
    x: f64,
    phi: &GridFunction,
    cfg: &OperatorConfig,
) -> Result<MinimizeResult> {
    let op = BackwardOperator::new(prob, cfg)?;
    let ctx = op.layer_context(t, phi)?;
    op.minimize_over_y(t, x, phi, &ctx)
}

pub fn apply(prob: &ProblemSpec, t: f64, cfg: &OperatorConfig, phi: &GridFunction) -> Result<GridFunction> {
    BackwardOperator::new(prob, cfg)?.apply(t, phi)
}

/// A smooth test function with closed-form first and second derivatives.
pub trait SmoothFunction: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// `sup |(φ - S_t(Δ)φ)/Δ - L_t φ|` over nodes at least `margin` away from the
/// grid ends, where `L_t φ = -½σ²φ'' - bφ' + H(t,x,φ')`.
pub fn consistency_residual(
    prob: &ProblemSpec,
    t: f64,
    cfg: &OperatorConfig,
    phi: &dyn SmoothFunction,
    grid: &Grid,
    margin: f64,
) -> Result<f64> {
    let gridded = grid.sample(|x| phi.value(x));
    let s_phi = apply(prob, t, cfg, &gridded)?;
    let delta = cfg.delta;
    let mut worst: f64 = 0.0;
    for (i, x) in grid.xs().enumerate() {
        if x < grid.x_min() + margin || x > grid.x_max() - margin {
            continue;
        }
        let sigma = prob.coeffs.sigma(t, x);
        let b = prob.coeffs.drift(t, x);
        let p = phi.d1(x);
        let generator = -0.5 * sigma * sigma * phi.d2(x) - b * p + prob.hamiltonian.eval(t, x, p);
        let r = (gridded.values()[i] - s_phi.values()[i]) / delta - generator;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}
