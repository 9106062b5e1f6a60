//! Reference solutions: the closed-form Cole-Hopf benchmark and an implicit
//! finite-difference solver using Howard's policy iteration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::problem::{minimizer_radius, ProblemSpec};
use crate::scheme::{step_count, SchemeSolution};

/// Clamp level `K` and horizon `T` of the Cole-Hopf benchmark
/// `U(x) = clamp(x, 0, K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColeHopfParams {
    pub k: f64,
    pub horizon: f64,
}

impl ColeHopfParams {
    pub fn new(k: f64, horizon: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("K = {k} must be > 0")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("T = {horizon} must be > 0")));
        }
        Ok(ColeHopfParams { k, horizon })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `Φ(a) - Φ(b)` for `a >= b`, evaluated on the tail that avoids cancellation.
fn normal_mass(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        normal_cdf(-b) - normal_cdf(-a)
    } else {
        normal_cdf(a) - normal_cdf(b)
    }
}

/// Exact solution `u = -log v` of the Cole-Hopf benchmark for `0 <= t < T`.
pub fn cole_hopf_exact(params: &ColeHopfParams, t: f64, x: f64) -> Result<f64> {
    let tau = params.horizon - t;
    if !(t >= 0.0 && tau > 0.0) {
        return Err(Error::OutOfRange {
            what: "Cole-Hopf time",
            value: t,
            lo: 0.0,
            hi: params.horizon,
        });
    }
    let k = params.k;
    let s = tau.sqrt();
    let middle = normal_mass((k - x + tau) / s, (tau - x) / s);
    let v = normal_cdf(-x / s)
        + if middle > 0.0 {
            (-x + 0.5 * tau).exp() * middle
        } else {
            0.0
        }
        + (-k).exp() * normal_cdf((x - k) / s);
    Ok(-v.ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HowardConfig {
    pub q_grid: Vec<f64>,
    pub max_policy_iters: usize,
    pub value_tol: f64,
}

impl HowardConfig {
    /// `points` uniform controls on `[-q_max, q_max]`.
    pub fn uniform(q_max: f64, points: usize, max_policy_iters: usize, value_tol: f64) -> Result<Self> {
        if !(q_max > 0.0 && q_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("q_max = {q_max} must be > 0")));
        }
        if points < 3 || points.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "q_points = {points} must be odd and >= 3 so the grid contains 0"
            )));
        }
        let half = (points / 2) as f64;
        let q_grid = (0..points).map(|i| q_max * (i as f64 - half) / half).collect();
        let cfg = HowardConfig {
            q_grid,
            max_policy_iters,
            value_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 201 controls on `[-Q, Q]` with `Q = radius_safety·ξ(C·lip(U))`.
    pub fn for_problem(prob: &ProblemSpec, radius_safety: f64) -> Result<Self> {
        let q_max = radius_safety * minimizer_radius(&prob.dual, prob.terminal.lipschitz)?;
        HowardConfig::uniform(q_max, 201, 50, 1e-12)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_policy_iters == 0 {
            return Err(Error::InvalidArgument("max_policy_iters must be >= 1".into()));
        }
        if !self.q_grid.contains(&0.0) {
            return Err(Error::InvalidArgument("q_grid must contain 0".into()));
        }
        if !(self.value_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("value_tol = {}", self.value_tol)));
        }
        Ok(())
    }
}

/// Solution plus per-layer policy-iteration diagnostics.
#[derive(Debug)]
pub struct HowardOutcome {
    pub solution: SchemeSolution,
    /// Policy iterations used per step, indexed like the layers they produced.
    pub iterations: Vec<usize>,
    /// Layers accepted without policy convergence.
    pub warnings: Vec<Error>,
}

/// Solves `a_i x_{i-1} + d_i x_i + c_i x_{i+1} = r_i` in place of `r`.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

struct HowardLayer<'a> {
    prob: &'a ProblemSpec,
    grid: Grid,
    delta: f64,
    t: f64,
    /// `L(q)` per control when the Hamiltonian ignores `(t, x)`.
    running_cost: Option<Vec<f64>>,
    cfg: &'a HowardConfig,
}

impl HowardLayer<'_> {
    fn cost(&self, i: usize, j: usize) -> Result<f64> {
        match &self.running_cost {
            Some(c) => Ok(c[j]),
            None => self.prob.dual.eval(self.t, self.grid.x(i), self.cfg.q_grid[j]),
        }
    }

    /// Generator `½σ²D²u + c·Du + L(q)` with `c = b - q`, upwinded in `c`.
    fn generator(&self, u: &[f64], i: usize, j: usize) -> Result<f64> {
        let n = u.len();
        let h = self.grid.h();
        let x = self.grid.x(i);
        let sigma = self.prob.coeffs.sigma(self.t, x);
        let c = self.prob.coeffs.drift(self.t, x) - self.cfg.q_grid[j];
        let left = if i == 0 { u[0] } else { u[i - 1] };
        let right = if i == n - 1 { u[n - 1] } else { u[i + 1] };
        let diffusion = 0.5 * sigma * sigma * (right - 2.0 * u[i] + left) / (h * h);
        let advection = if c > 0.0 {
            c * (right - u[i]) / h
        } else {
            c * (u[i] - left) / h
        };
        Ok(diffusion + advection + self.cost(i, j)?)
    }

    /// Nodewise minimizer of the generator over the control grid.
    fn improve(&self, u: &[f64]) -> Result<Vec<usize>> {
        (0..u.len())
            .into_par_iter()
            .map(|i| {
                let mut best = (usize::MAX, f64::INFINITY);
                for j in 0..self.cfg.q_grid.len() {
                    let g = self.generator(u, i, j)?;
                    let closer =
                        best.0 == usize::MAX || self.cfg.q_grid[j].abs() < self.cfg.q_grid[best.0].abs();
                    if g < best.1 || (g == best.1 && closer) {
                        best = (j, g);
                    }
                }
                Ok(best.0)
            })
            .collect()
    }

    /// Implicit step `u - Δ·(½σ²D²u + c·Du) = u_next + Δ·L` for a frozen policy.
    fn linear_solve(&self, u_next: &[f64], policy: &[usize]) -> Result<Vec<f64>> {
        let n = u_next.len();
        let h = self.grid.h();
        let delta = self.delta;
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let x = self.grid.x(i);
            let sigma = self.prob.coeffs.sigma(self.t, x);
            let c = self.prob.coeffs.drift(self.t, x) - self.cfg.q_grid[policy[i]];
            let mut a = delta * 0.5 * sigma * sigma / (h * h);
            let mut b = a;
            if c > 0.0 {
                b += delta * c / h;
            } else {
                a -= delta * c / h;
            }
            diag[i] = 1.0;
            // zero-Neumann: the ghost node repeats the boundary node
            if i > 0 {
                lower[i] = -a;
                diag[i] += a;
            }
            if i < n - 1 {
                upper[i] = -b;
                diag[i] += b;
            }
            rhs[i] = u_next[i] + delta * self.cost(i, policy[i])?;
        }
        let mut scratch = vec![0.0; n];
        thomas(&lower, &diag, &upper, &mut rhs, &mut scratch);
        Ok(rhs)
    }
}

/// Fully implicit upwind finite differences for
/// `-u_t + sup_q {-½σ²u_xx - (b-q)u_x - L(t,x,q)} = 0`, one policy iteration
/// per time layer.
pub fn howard_fd_solve_detailed(
    prob: &ProblemSpec,
    grid: &Grid,
    delta: f64,
    cfg: &HowardConfig,
) -> Result<HowardOutcome> {
    cfg.validate()?;
    let n = step_count(prob.horizon, delta)?;
    let running_cost = if prob.hamiltonian.is_tx_free() {
        Some(
            cfg.q_grid
                .iter()
                .map(|&q| prob.dual.eval(0.0, 0.0, q))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let mut layers = Vec::with_capacity(n + 1);
    layers.push(grid.sample(|x| prob.terminal.eval(x)));
    let mut iterations = vec![0; n];
    let mut warnings = Vec::new();
    for k in (0..n).rev() {
        let t = k as f64 * delta;
        let layer = HowardLayer {
            prob,
            grid: *grid,
            delta,
            t,
            running_cost: running_cost.clone(),
            cfg,
        };
        let u_next = layers.last().expect("terminal layer present").values().to_vec();
        let mut policy = layer.improve(&u_next)?;
        let mut u = layer.linear_solve(&u_next, &policy)?;
        let mut converged = false;
        let mut iters = 1;
        while iters < cfg.max_policy_iters {
            let new_policy = layer.improve(&u)?;
            if new_policy == policy {
                converged = true;
                break;
            }
            let u_new = layer.linear_solve(&u_next, &new_policy)?;
            iters += 1;
            let change = u
                .iter()
                .zip(&u_new)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            policy = new_policy;
            u = u_new;
            if change < cfg.value_tol {
                converged = true;
                break;
            }
        }
        iterations[k] = iters;
        if !converged {
            warnings.push(Error::PolicyNonConvergence { iterations: iters, t });
        }
        layers.push(GridFunction::new(*grid, u)?);
    }
    layers.reverse();
    Ok(HowardOutcome {
        solution: SchemeSolution {
            delta,
            horizon: prob.horizon,
            layers,
            problem: prob.clone(),
        },
        iterations,
        warnings,
    })
}

/// [`howard_fd_solve_detailed`] without the diagnostics.
pub fn howard_fd_solve(
    prob: &ProblemSpec,
    grid: &Grid,
    delta: f64,
    cfg: &HowardConfig,
) -> Result<SchemeSolution> {
    Ok(howard_fd_solve_detailed(prob, grid, delta, cfg)?.solution)
}
