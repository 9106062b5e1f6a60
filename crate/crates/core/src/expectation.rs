//! Gaussian expectations `E[φ(Y)]` for the frozen-coefficient step
//! `Y = y + b(t,y)Δ + σ(t,y)(W_{t+Δ} - W_t)`.
//!
//! Every method here is a positive-weight linear functional of the nodal
//! values of φ, so all of them preserve order and constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::problem::CoefficientField;

/// Law of `Y`: normal with the given mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianStep {
    pub mean: f64,
    pub std: f64,
}

impl GaussianStep {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian step needs finite mean and std >= 0, got ({mean}, {std})"
            )));
        }
        Ok(GaussianStep { mean, std })
    }
}

/// mean = y + b(t,y)Δ, std = |σ(t,y)|√Δ.
#[inline]
pub fn frozen_step(coeffs: &CoefficientField, t: f64, delta: f64, y: f64) -> GaussianStep {
    GaussianStep {
        mean: y + coeffs.drift(t, y) * delta,
        std: coeffs.sigma(t, y).abs() * delta.sqrt(),
    }
}

/// Gauss-Hermite rule for the weight `e^{-z²}`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    weight_sum: f64,
}

impl QuadratureRule {
    /// Newton iteration on the orthonormal Hermite recurrence.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 || order > 200 {
            return Err(Error::InvalidArgument(format!(
                "Gauss-Hermite order {order} outside 1..=200"
            )));
        }
        let n = order;
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => {
                    let nf = (2 * n + 1) as f64;
                    nf.sqrt() - 1.85575 * nf.powf(-0.16667)
                }
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        x.reverse();
        w.reverse();
        let weight_sum = w.iter().sum();
        Ok(QuadratureRule {
            nodes: x,
            weights: w,
            weight_sum,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Largest gap between adjacent nodes.
    pub fn max_gap(&self) -> f64 {
        self.nodes.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
    }
}

#[inline]
fn clamp_to_range(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

/// `(1/√π) Σ w_i φ̂(mean + √2·std·z_i)` with φ̂ the piecewise-linear,
/// constant-hold interpolant. Weights are normalized by their computed sum
/// so constants are reproduced to rounding.
pub fn expect_quadrature(phi: &GridFunction, step: GaussianStep, rule: &QuadratureRule) -> f64 {
    if step.std == 0.0 {
        return phi.interpolate(step.mean);
    }
    let scale = std::f64::consts::SQRT_2 * step.std;
    let mut acc = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (z, w) in rule.nodes.iter().zip(&rule.weights) {
        let v = phi.interpolate(step.mean + scale * z);
        lo = lo.min(v);
        hi = hi.max(v);
        acc += w * v;
    }
    clamp_to_range(acc / rule.weight_sum, lo, hi)
}

/// Gaussian-weighted average of the nodal values themselves: weights
/// `exp(-(x_k - mean)²/(2 std²))` over nodes within 8 std of the mean,
/// normalized to sum to one, with constant-hold values past the grid ends.
///
/// For `std` of a couple of grid spacings or more this is the trapezoidal
/// rule for a smooth Gaussian integrand and its error is exponentially small
/// in `(std/h)²`; for smaller `std` use [`expect_quadrature`].
pub fn expect_kernel(phi: &GridFunction, step: GaussianStep) -> f64 {
    if step.std == 0.0 {
        return phi.interpolate(step.mean);
    }
    let grid = phi.grid();
    let h = grid.h();
    let s = step.std;
    let half = (8.0 * s / h).ceil() as isize;
    let j0 = ((step.mean - grid.x_min()) / h).round() as isize;
    let delta = step.mean - (grid.x_min() + j0 as f64 * h);
    let c = h / s;
    let decay = (-c * c).exp();
    let u0 = -delta / s;
    let w0 = (-0.5 * u0 * u0).exp();

    let v = phi.at_index(j0);
    let mut acc = w0 * v;
    let mut total = w0;
    let mut lo = v;
    let mut hi = v;

    // upward: w_{k+1} = w_k * r_k,  r_{k+1} = r_k * e^{-c²}
    let mut wk = w0;
    let mut rk = (-c * u0 - 0.5 * c * c).exp();
    for k in 1..=half {
        wk *= rk;
        rk *= decay;
        let v = phi.at_index(j0 + k);
        lo = lo.min(v);
        hi = hi.max(v);
        acc += wk * v;
        total += wk;
    }
    // downward: w_{k-1} = w_k * r'_k,  r'_{k-1} = r'_k * e^{-c²}
    let mut wk = w0;
    let mut rk = (c * u0 - 0.5 * c * c).exp();
    for k in 1..=half {
        wk *= rk;
        rk *= decay;
        let v = phi.at_index(j0 - k);
        lo = lo.min(v);
        hi = hi.max(v);
        acc += wk * v;
        total += wk;
    }
    clamp_to_range(acc / total, lo, hi)
}

const MC_BLOCK: usize = 4096;

/// Sample mean and standard error of φ̂(Y) over `n` normal draws.
///
/// Draws are grouped in fixed blocks; block `k` uses ChaCha stream `k` under
/// `seed`, so the result does not depend on how blocks are scheduled.
pub fn expect_monte_carlo(phi: &GridFunction, step: GaussianStep, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs n >= 2, got {n}"
        )));
    }
    let blocks = n.div_ceil(MC_BLOCK);
    let samples: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let len = MC_BLOCK.min(n - b * MC_BLOCK);
            (0..len)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    phi.interpolate(step.mean + step.std * z)
                })
                .collect()
        })
        .collect();
    let nf = n as f64;
    let mean = samples.iter().flatten().sum::<f64>() / nf;
    let ss: f64 = samples.iter().flatten().map(|v| (v - mean) * (v - mean)).sum();
    let var = ss / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// One explicit finite-difference step at node `y_index`:
/// `φ + Δ[½σ² D²φ + b Dφ]`, central second difference, first difference
/// upwinded by the sign of `b`, constant hold at the boundary.
///
/// Requires `σ²Δ/h² + |b|Δ/h <= 1`, which makes the step a convex
/// combination of neighbouring values.
pub fn expect_fd_explicit(
    phi: &GridFunction,
    coeffs: &CoefficientField,
    t: f64,
    delta: f64,
    y_index: usize,
) -> Result<f64> {
    let grid = phi.grid();
    if y_index >= grid.len() {
        return Err(Error::OutOfRange {
            what: "y_index",
            value: y_index as f64,
            lo: 0.0,
            hi: (grid.len() - 1) as f64,
        });
    }
    let h = grid.h();
    let y = grid.x(y_index);
    let sigma = coeffs.sigma(t, y);
    let b = coeffs.drift(t, y);
    let diffusion = sigma * sigma * delta / (h * h);
    let advection = b.abs() * delta / h;
    if diffusion + advection > 1.0 + 1e-12 {
        return Err(Error::CflViolation { diffusion, advection });
    }
    let i = y_index as isize;
    let (left, mid, right) = (phi.at_index(i - 1), phi.at_index(i), phi.at_index(i + 1));
    let d2 = (right - 2.0 * mid + left) / (h * h);
    let d1 = if b >= 0.0 {
        (right - mid) / h
    } else {
        (mid - left) / h
    };
    Ok(mid + delta * (0.5 * sigma * sigma * d2 + b * d1))
}

/// How the backward operator evaluates `E[φ(Y)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpectationMethod {
    /// Grid kernel when the step std is at least two grid spacings,
    /// Gauss-Hermite otherwise.
    #[default]
    Auto,
    Quadrature,
    Kernel,
    /// Explicit finite-difference step; only defined at grid nodes.
    FiniteDifference,
}

impl std::str::FromStr for ExpectationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "quadrature" | "gauss-hermite" => Ok(Self::Quadrature),
            "kernel" => Ok(Self::Kernel),
            "fd" | "finite-difference" => Ok(Self::FiniteDifference),
            other => Err(Error::InvalidArgument(format!(
                "unknown expectation method `{other}` (auto, quadrature, kernel, fd)"
            ))),
        }
    }
}

/// Below this many grid spacings of std, `Auto` switches to Gauss-Hermite.
pub const KERNEL_MIN_STD_CELLS: f64 = 2.0;

/// Expectation evaluator bound to a method and a Gauss-Hermite order.
#[derive(Debug, Clone)]
pub struct Expectation {
    method: ExpectationMethod,
    rule: QuadratureRule,
    doubled: QuadratureRule,
}

impl Expectation {
    pub fn new(method: ExpectationMethod, order: usize) -> Result<Self> {
        Ok(Expectation {
            method,
            rule: QuadratureRule::gauss_hermite(order)?,
            doubled: QuadratureRule::gauss_hermite(2 * order)?,
        })
    }

    pub fn method(&self) -> ExpectationMethod {
        self.method
    }

    /// The base rule, or the doubled one when the scaled node gap exceeds 6h.
    pub fn rule_for(&self, std: f64, h: f64) -> &QuadratureRule {
        if std::f64::consts::SQRT_2 * std * self.rule.max_gap() > 6.0 * h {
            &self.doubled
        } else {
            &self.rule
        }
    }

    /// `E[φ(Y)]` at an arbitrary point. `FiniteDifference` is only meaningful
    /// at nodes and is handled by the caller; here it falls back to `Auto`.
    #[inline]
    pub fn eval(&self, phi: &GridFunction, step: GaussianStep) -> f64 {
        let h = phi.grid().h();
        match self.method {
            ExpectationMethod::Quadrature => expect_quadrature(phi, step, self.rule_for(step.std, h)),
            ExpectationMethod::Kernel => expect_kernel(phi, step),
            ExpectationMethod::Auto | ExpectationMethod::FiniteDifference => {
                if step.std >= KERNEL_MIN_STD_CELLS * h {
                    expect_kernel(phi, step)
                } else {
                    expect_quadrature(phi, step, self.rule_for(step.std, h))
                }
            }
        }
    }
}
