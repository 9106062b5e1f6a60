//! Reference computations that do not go through `splitsolve`'s own
//! numerics, plus seeded random fixtures shared by the acceptance run.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use splitsolve::{Grid, GridFunction, HamiltonianSpec};

/// Composite Simpson on `[a, b]` with `n` (even) panels; zero for `b <= a`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `-ln E[exp(-clamp(x + sqrt(horizon - t) Z, 0, k))]` by direct quadrature
/// of the Gaussian integral, split at the two kinks of the terminal datum.
pub fn cole_hopf_quadrature(k: f64, horizon: f64, t: f64, x: f64) -> f64 {
    let s = (horizon - t).sqrt();
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let integrand = |z: f64| (-(x + s * z).clamp(0.0, k)).exp() * density(z);
    let (lo, hi) = (-14.0, 14.0);
    let k1 = (-x / s).clamp(lo, hi);
    let k2 = ((k - x) / s).clamp(lo, hi);
    let n = 20_000;
    let v = simpson(integrand, lo, k1, n) + simpson(integrand, k1, k2, n) + simpson(integrand, k2, hi, n);
    -v.ln()
}

/// Hopf-Lax value of `U = |x|` under `H = p²/2` after time `t`.
pub fn hopf_lax_abs(x: f64, t: f64) -> f64 {
    if x.abs() >= t {
        x.abs() - t / 2.0
    } else {
        x * x / (2.0 * t)
    }
}

/// `max_p {p q - H(0, 0, p)}` over `p ∈ [-8, 8]` in steps of `2e-5`.
pub fn brute_conjugate(h: &HamiltonianSpec, q: f64) -> f64 {
    (0..=800_000)
        .map(|k| {
            let p = -8.0 + 2e-5 * k as f64;
            p * q - h.eval(0.0, 0.0, p)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn waves(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    (0..3)
        .map(|_| {
            (
                rng.random_range(-0.5..0.5),
                rng.random_range(0.5..2.5),
                rng.random_range(0.0..6.3),
            )
        })
        .collect()
}

/// Bounded function with a kink and Lipschitz constant at most 4.75.
pub fn random_lipschitz(grid: &Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    let w = waves(rng);
    let (b, s) = (rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
    grid.sample(|x| w.iter().map(|(a, f, c)| a * (f * x + c).sin()).sum::<f64>() + b * (x - s).abs().min(2.0))
}

/// Bounded smooth function: a few waves plus a Gaussian bump.
pub fn random_smooth(grid: &Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    let w = waves(rng);
    let (d, m, s) = (
        rng.random_range(-1.0..1.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(0.5..2.0),
    );
    grid.sample(|x| {
        w.iter().map(|(a, f, c)| a * (f * x + c).sin()).sum::<f64>()
            + d * (-(x - m) * (x - m) / (2.0 * s * s)).exp()
    })
}
