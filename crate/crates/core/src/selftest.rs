//! Small-scale invariant checks across all modules, run by `splitsolve selftest`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backward_op::{apply, OperatorConfig};
use crate::baselines::{cole_hopf_exact, howard_fd_solve, normal_cdf, ColeHopfParams, HowardConfig};
use crate::error::Result;
use crate::expectation::{expect_monte_carlo, expect_quadrature, GaussianStep, QuadratureRule};
use crate::expr::parse_expression;
use crate::grid::{Grid, GridFunction};
use crate::harness::fit_log_slope;
use crate::problem::{conjugate, CoefficientField, ProblemSpec, TerminalDatum};
use crate::scheme::{layer_residuals, scheme_comparison_check, solve};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(u64) -> Result<std::result::Result<String, String>>;

fn ok_if(cond: bool, detail: String) -> Result<std::result::Result<String, String>> {
    Ok(if cond { Ok(detail) } else { Err(detail) })
}

fn duality(_: u64) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for k in 0..=40 {
        let q = -10.0 + 0.5 * k as f64;
        let (l, _) = conjugate(|p| 0.5 * p * p, q, 20.0)?;
        worst = worst.max((l - 0.5 * q * q).abs());
    }
    let prob = ProblemSpec::quartic(5.0, 1.0)?;
    let issues = prob.validate();
    ok_if(
        worst <= 1e-8 && issues.is_empty(),
        format!(
            "max |L - q²/2| = {worst:.2e}; quartic validation issues: {}",
            issues.len()
        ),
    )
}

fn expectation(seed: u64) -> Result<std::result::Result<String, String>> {
    let grid = Grid::from_range(-10.0, 10.0, 0.01)?;
    let rule = QuadratureRule::gauss_hermite(16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (a, b) = (rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0));
        let phi = grid.sample(|x| (a * x).sin() + b * x.abs().min(3.0));
        let step = GaussianStep::new(rng.random_range(-1.0..1.0), rng.random_range(0.1..0.5))?;
        let gh = expect_quadrature(&phi, step, &rule);
        let (mc, se) = expect_monte_carlo(&phi, step, 100_000, rng.random())?;
        worst = worst.max((gh - mc).abs() / se);
    }
    ok_if(
        worst <= 4.0,
        format!("max |GH - MC| = {worst:.2} standard errors"),
    )
}

fn operator_laws(seed: u64) -> Result<std::result::Result<String, String>> {
    let prob = ProblemSpec::cole_hopf(5.0, 1.0)?;
    let grid = Grid::from_range(-3.0, 3.0, 0.05)?;
    let cfg = OperatorConfig::new(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = |rng: &mut ChaCha8Rng| {
        let (a, b, c) = (
            rng.random_range(0.5..3.0),
            rng.random_range(0.0..6.0),
            rng.random_range(-1.0..1.0),
        );
        grid.sample(|x| (a * x + b).sin() + c * x.abs())
    };
    let (phi, psi) = (random(&mut rng), random(&mut rng));
    let upper = phi.combine(1.0, &psi.map(|v| v.abs()), 1.0);
    let s_phi = apply(&prob, 0.0, &cfg, &phi)?;
    let s_shift = apply(&prob, 0.0, &cfg, &phi.map(|v| v + 0.75))?;
    let s_upper = apply(&prob, 0.0, &cfg, &upper)?;
    let s_psi = apply(&prob, 0.0, &cfg, &psi)?;
    let s_mix = apply(&prob, 0.0, &cfg, &phi.combine(0.5, &psi, 0.5))?;
    let shift_err = s_shift.combine(1.0, &s_phi, -1.0).map(|v| v - 0.75).sup_norm();
    let mono = s_phi.combine(1.0, &s_upper, -1.0).max();
    let concave = s_phi.combine(0.5, &s_psi, 0.5).combine(1.0, &s_mix, -1.0).max();
    let stable = s_phi.sup_norm() <= phi.sup_norm();
    ok_if(
        shift_err <= 1e-9 && mono <= 1e-12 && concave <= 1e-9 && stable,
        format!("shift {shift_err:.1e}, monotone {mono:.1e}, concave {concave:.1e}, stable {stable}"),
    )
}

fn hopf_lax(_: u64) -> Result<std::result::Result<String, String>> {
    let prob = ProblemSpec::cole_hopf(5.0, 1.0)?.with_coefficients(CoefficientField::constant(0.0, 0.0));
    let grid = Grid::from_range(-5.0, 5.0, 0.01)?;
    let delta = 0.1;
    let out = apply(&prob, 0.0, &OperatorConfig::new(delta), &grid.sample(f64::abs))?;
    let mut worst: f64 = 0.0;
    for (i, x) in grid.xs().enumerate().skip(1).take(grid.len() - 2) {
        let exact = if x.abs() >= delta {
            x.abs() - delta / 2.0
        } else {
            x * x / (2.0 * delta)
        };
        worst = worst.max((out.values()[i] - exact).abs());
    }
    ok_if(worst <= 1e-6, format!("max deviation from Hopf-Lax {worst:.2e}"))
}

fn scheme(seed: u64) -> Result<std::result::Result<String, String>> {
    let prob = ProblemSpec::cole_hopf(5.0, 1.0)?;
    let grid = Grid::new(-2.5, 0.1, 50)?;
    let cfg = OperatorConfig::new(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = |rng: &mut ChaCha8Rng| -> Vec<GridFunction> {
        (0..6)
            .map(|_| grid.sample(|_| rng.random_range(-1.0..1.0)))
            .collect()
    };
    let (u, v) = (layers(&mut rng), layers(&mut rng));
    let h1 = layer_residuals(&prob, &cfg, &u)?;
    let h2 = layer_residuals(&prob, &cfg, &v)?;
    let report = scheme_comparison_check(&u, &v, &h1, &h2, 0.2);
    let flat = prob.with_terminal(TerminalDatum::constant(1.25));
    let sol = solve(&flat, &grid, &OperatorConfig::new(0.25))?;
    let drift = sol
        .layers
        .iter()
        .map(|l| l.map(|x| x - 1.25).sup_norm())
        .fold(0.0, f64::max);
    ok_if(
        report.max_violation <= 1e-9 && drift <= 1e-12,
        format!(
            "comparison violation {:.1e}, constant drift {drift:.1e}",
            report.max_violation
        ),
    )
}

fn exact_solution(_: u64) -> Result<std::result::Result<String, String>> {
    let p = ColeHopfParams::new(5.0, 1.0)?;
    let e = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (t, x) = (0.05 + 0.04 * i as f64, -2.0 + 0.45 * i as f64);
        let u = |t, x| cole_hopf_exact(&p, t, x);
        let ut = (u(t + e, x)? - u(t - e, x)?) / (2.0 * e);
        let ux = (u(t, x + e)? - u(t, x - e)?) / (2.0 * e);
        let uxx = (u(t, x + e)? - 2.0 * u(t, x)? + u(t, x - e)?) / (e * e);
        worst = worst.max((-ut - 0.5 * uxx + 0.5 * ux * ux).abs());
    }
    let tail = (normal_cdf(1.0) - 0.841_344_746_068_543).abs();
    ok_if(
        worst <= 1e-6 && tail < 1e-14,
        format!("max PDE residual {worst:.2e}"),
    )
}

fn howard(_: u64) -> Result<std::result::Result<String, String>> {
    let prob = ProblemSpec::cole_hopf(5.0, 1.0)?.with_terminal(TerminalDatum::constant(-0.5));
    let grid = Grid::from_range(-2.0, 2.0, 0.05)?;
    let cfg = HowardConfig::for_problem(&prob, 2.0)?;
    let sol = howard_fd_solve(&prob, &grid, 0.25, &cfg)?;
    let drift = sol
        .layers
        .iter()
        .map(|l| l.map(|v| v + 0.5).sup_norm())
        .fold(0.0, f64::max);
    ok_if(drift <= 1e-12, format!("constant drift {drift:.1e}"))
}

fn expressions(_: u64) -> Result<std::result::Result<String, String>> {
    let cases = [("p^2/2", 4.5), ("1+2*3^2", 19.0), ("clamp(x,0,5)", 5.0)];
    for (src, want) in cases {
        let e = parse_expression(src)?;
        let got = e.eval_at(0.0, 7.0, 3.0, 0.0);
        let again = parse_expression(&e.to_string())?;
        if got != want || again != e {
            return ok_if(false, format!("`{src}` gave {got}, expected {want}"));
        }
    }
    ok_if(true, format!("{} expressions", cases.len()))
}

fn rates(_: u64) -> Result<std::result::Result<String, String>> {
    let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.01].iter().map(|&d| (d, 2.0 * d)).collect();
    let slope = fit_log_slope(&pts)?;
    ok_if((slope - 1.0).abs() < 1e-12, format!("slope {slope}"))
}

const SUITES: [(&str, Check); 9] = [
    ("duality", duality),
    ("expectation", expectation),
    ("operator-laws", operator_laws),
    ("hopf-lax", hopf_lax),
    ("scheme", scheme),
    ("exact-solution", exact_solution),
    ("howard", howard),
    ("expressions", expressions),
    ("rate-fit", rates),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs every suite; errors inside a suite count as failures.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check(seed) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(d)) => (false, d),
                Err(e) => (false, format!("error: {e}")),
            };
            SuiteResult {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
