//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::io::Write as _;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitsolve::backward_op::{apply, consistency_residual, OperatorConfig, SmoothFunction};
use splitsolve::baselines::{cole_hopf_exact, ColeHopfParams};
use splitsolve::expectation::{expect_monte_carlo, Expectation, ExpectationMethod, GaussianStep};
use splitsolve::grid::{Grid, GridFunction};
use splitsolve::harness::{
    convergence_csv, fit_log_slope, run_convergence, ConvergenceReport, Solver, SweepSettings,
};
use splitsolve::problem::{
    conjugate, numerical_legendre_transform, CoefficientField, DualHamiltonian, HamiltonianSpec, ProblemSpec,
    SampleBox, TerminalDatum,
};
use splitsolve::scheme::{layer_residuals, scheme_comparison_check, solve};
use splitsolve_validation::{
    brute_conjugate, cole_hopf_quadrature, hopf_lax_abs, random_lipschitz, random_smooth,
};

const K: f64 = 5.0;
const T: f64 = 1.0;
const DELTAS: [f64; 4] = [0.1, 0.05, 0.025, 0.01];
// Published table, ordered like DELTAS.
const TABLE_SPLIT_VALUE: [f64; 4] = [4.3674, 4.3664, 4.3658, 4.3655];
const TABLE_SPLIT_REL: [f64; 4] = [0.056e-2, 0.032e-2, 0.02e-2, 0.012e-2];
const TABLE_HOWARD_REL: [f64; 4] = [0.142e-2, 0.076e-2, 0.039e-2, 0.016e-2];

type Verdict = Result<String, String>;
type Files = Vec<(String, Vec<u8>)>;
type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

struct Sweeps {
    splitting: ConvergenceReport,
    howard: ConvergenceReport,
    fine: ConvergenceReport,
    exact: f64,
}

fn sweeps() -> Result<Sweeps, String> {
    let prob = ProblemSpec::cole_hopf(K, T).map_err(fail)?;
    let settings = SweepSettings::default();
    let grid = Grid::from_range(-15.0, 25.0, 0.01).map_err(fail)?;
    let splitting =
        run_convergence(&prob, &grid, &DELTAS, (0.0, K), Solver::Splitting, &settings).map_err(fail)?;
    let howard = run_convergence(&prob, &grid, &DELTAS, (0.0, K), Solver::Howard, &settings).map_err(fail)?;
    let fine_grid = Grid::from_range(-15.0, 25.0, 0.005).map_err(fail)?;
    let fine =
        run_convergence(&prob, &fine_grid, &DELTAS, (0.0, K), Solver::Splitting, &settings).map_err(fail)?;
    Ok(Sweeps {
        splitting,
        howard,
        fine,
        exact: cole_hopf_quadrature(K, T, 0.0, K),
    })
}

fn rel_errors(report: &ConvergenceReport, exact: f64) -> Vec<f64> {
    report
        .rows
        .iter()
        .map(|r| ((r.value - exact) / exact).abs())
        .collect()
}

fn criterion_1(s: &Sweeps) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, row) in s.splitting.rows.iter().enumerate() {
        let rel = ((row.value - s.exact) / s.exact).abs();
        let ratio = rel / TABLE_SPLIT_REL[i];
        let value_ok = (row.value - TABLE_SPLIT_VALUE[i]).abs() <= 0.003;
        let rel_ok = (0.5..=2.0).contains(&ratio);
        let time_ok = row.seconds <= 60.0;
        ok &= value_ok && rel_ok && time_ok && row.failure.is_none();
        parts.push(format!(
            "Δ={}: u={:.5} err={:.4}% (x{:.2} of table) {:.1}s",
            row.delta,
            row.value,
            100.0 * rel,
            ratio,
            row.seconds
        ));
    }
    verdict(ok, format!("exact {:.9}; {}", s.exact, parts.join("; ")))
}

fn criterion_2(s: &Sweeps) -> Verdict {
    let split = rel_errors(&s.splitting, s.exact);
    let howard = rel_errors(&s.howard, s.exact);
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, row) in s.howard.rows.iter().enumerate() {
        let ratio = howard[i] / TABLE_HOWARD_REL[i];
        let within = (0.5..=2.0).contains(&ratio);
        let better = split[i] < howard[i];
        ok &= within && better && row.failure.is_none();
        parts.push(format!(
            "Δ={}: howard err={:.4}% (x{:.2} of table), splitting {}",
            row.delta,
            100.0 * howard[i],
            ratio,
            if better { "better" } else { "not better" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn slope_of(report: &ConvergenceReport, exact: f64) -> Result<f64, String> {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .map(|r| (r.delta, (r.value - exact).abs()))
        .collect();
    fit_log_slope(&pts).map_err(fail)
}

fn criterion_3(s: &Sweeps) -> Verdict {
    let coarse = slope_of(&s.splitting, s.exact)?;
    let fine = slope_of(&s.fine, s.exact)?;
    verdict(
        (0.6..=1.3).contains(&coarse) && (0.75..=1.25).contains(&fine),
        format!("slope h=0.01: {coarse:.3}; slope h=0.005: {fine:.3}"),
    )
}

fn criterion_4() -> Verdict {
    let prob = ProblemSpec::cole_hopf(K, T).map_err(fail)?;
    let grid = Grid::from_range(-4.0, 4.0, 0.02).map_err(fail)?;
    let delta = 0.05;
    let cfg = OperatorConfig::new(delta);
    let c = prob.dual.stability_constant().map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut shift, mut mono, mut concave, mut stab, mut worst_exp) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..25 {
        let phi = random_lipschitz(&grid, &mut rng);
        let other = random_lipschitz(&grid, &mut rng);
        let (d, w, p) = (
            rng.random_range(0.0..0.5),
            rng.random_range(0.5..2.0),
            rng.random_range(0.0..6.3),
        );
        let bump = grid.sample(|x| d * (1.0 + (w * x + p).sin()));
        let upper = phi.combine(1.0, &bump, 1.0);
        let m = rng.random_range(-2.0..2.0);

        let s = |f: &GridFunction| apply(&prob, 0.0, &cfg, f).map_err(fail);
        let s_phi = s(&phi)?;
        shift = shift.max(
            s(&phi.map(|v| v + m))?
                .combine(1.0, &s_phi, -1.0)
                .map(|v| v - m)
                .sup_norm(),
        );
        mono = mono.max(s_phi.combine(1.0, &s(&upper)?, -1.0).max());
        let mix = s(&phi.combine(0.5, &other, 0.5))?;
        concave = concave.max(
            s_phi
                .combine(0.5, &s(&other)?, 0.5)
                .combine(1.0, &mix, -1.0)
                .max(),
        );
        stab = stab.max(s_phi.sup_norm() - (c * delta + phi.sup_norm()));

        let mut pts = Vec::new();
        for d in [1e-4, 1e-3, 1e-2, 1e-1] {
            let moved = apply(&prob, 0.0, &OperatorConfig::new(d), &phi).map_err(fail)?;
            pts.push((d, moved.combine(1.0, &phi, -1.0).sup_norm()));
        }
        worst_exp = worst_exp.min(fit_log_slope(&pts).map_err(fail)?);
    }
    verdict(
        shift <= 1e-9 && mono <= 1e-12 && concave <= 1e-9 && stab <= 0.0 && worst_exp >= 0.45,
        format!(
            "constants {shift:.1e}, monotone {mono:.1e}, concave {concave:.1e}, stability excess {stab:.1e}, min continuity exponent {worst_exp:.3}"
        ),
    )
}

struct HalfSine;

impl SmoothFunction for HalfSine {
    fn value(&self, x: f64) -> f64 {
        0.5 * x.sin()
    }
    fn d1(&self, x: f64) -> f64 {
        0.5 * x.cos()
    }
    fn d2(&self, x: f64) -> f64 {
        -0.5 * x.sin()
    }
}

fn criterion_5() -> Verdict {
    let prob = ProblemSpec::cole_hopf(K, T).map_err(fail)?;
    let grid = Grid::from_range(-8.0, 8.0, 0.01).map_err(fail)?;
    let residual = |d: f64| consistency_residual(&prob, 0.0, &OperatorConfig::new(d), &HalfSine, &grid, 3.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [1e-2, 5e-3, 2.5e-3] {
        let ratio = residual(d).map_err(fail)? / residual(d / 2.0).map_err(fail)?;
        ok &= (1.6..=2.4).contains(&ratio);
        parts.push(format!("Δ={d}: {ratio:.3}"));
    }
    verdict(ok, format!("ratios {}", parts.join(", ")))
}

fn criterion_6() -> Verdict {
    let base = ProblemSpec::cole_hopf(K, T)
        .map_err(fail)?
        .with_coefficients(CoefficientField::constant(0.0, 0.0));
    let grid = Grid::from_range(-10.0, 10.0, 0.01).map_err(fail)?;
    let delta = 0.1;
    let one = apply(&base, 0.0, &OperatorConfig::new(delta), &grid.sample(f64::abs)).map_err(fail)?;
    let single = grid
        .xs()
        .enumerate()
        .skip(1)
        .take(grid.len() - 2)
        .map(|(i, x)| (one.values()[i] - hopf_lax_abs(x, delta)).abs())
        .fold(0.0, f64::max);

    let prob = base.with_terminal(TerminalDatum::new(Arc::new(f64::abs), 1.0, 10.0));
    let fine = Grid::from_range(-10.0, 10.0, 0.001).map_err(fail)?;
    let sol = solve(&prob, &fine, &OperatorConfig::new(delta)).map_err(fail)?;
    let multi = fine
        .xs()
        .enumerate()
        .filter(|(_, x)| x.abs() <= 8.0)
        .map(|(i, x)| (sol.layers[0].values()[i] - hopf_lax_abs(x, T)).abs())
        .fold(0.0, f64::max);
    verdict(
        single <= 1e-6 && multi <= 1e-5,
        format!("one step {single:.2e}; {} steps vs T {multi:.2e}", sol.steps()),
    )
}

fn criterion_7() -> Verdict {
    let quad = HamiltonianSpec::quadratic().without_dual();
    let mut self_dual = 0.0f64;
    for k in 0..=200 {
        let q = -10.0 + 0.1 * k as f64;
        let l = numerical_legendre_transform(&quad, 0.0, 0.0, q).map_err(fail)?;
        self_dual = self_dual.max((l - 0.5 * q * q).abs());
    }

    let mut biconj = 0.0f64;
    for k in 0..=40 {
        let p = -5.0 + 0.25 * k as f64;
        let dual = |q: f64| numerical_legendre_transform(&quad, 0.0, 0.0, q).unwrap_or(f64::INFINITY);
        let (h, _) = conjugate(dual, p, 10.0).map_err(fail)?;
        biconj = biconj.max((h - 0.5 * p * p).abs());
    }

    let varying = HamiltonianSpec::new(
        Arc::new(|t, x: f64, p| (1.0 + 0.5 * x.sin() * t.cos()) * 0.5 * p * p + 0.2 * x * p / (1.0 + x * x)),
        Arc::new(|y| (4.0 * (y + 0.2)).max(0.0)),
    );
    let sample = SampleBox::new(0.0, 1.0, -3.0, 3.0);
    let dual = DualHamiltonian::new(varying.clone(), sample);
    let mut sandwich = 0.0f64;
    for k in 0..=20 {
        let q = -3.0 + 0.3 * k as f64;
        let (lo, hi) = dual.envelopes(q).map_err(fail)?;
        for (t, x) in sample.lattice() {
            let l = dual.eval(t, x, q).map_err(fail)?;
            sandwich = sandwich.max(lo - l).max(l - hi);
        }
    }

    let variants: Vec<HamiltonianSpec> = vec![
        HamiltonianSpec::quadratic().without_dual(),
        HamiltonianSpec::quadratic_drift(0.7).without_dual(),
        HamiltonianSpec::quartic().without_dual(),
        HamiltonianSpec::new(
            Arc::new(|_, _, p: f64| 0.5 * p * p + 0.3 * p.sin()),
            Arc::new(|y: f64| (2.0 * (y + 0.3)).max(0.0)),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut brute = 0.0f64;
    for _ in 0..100 {
        let h = &variants[rng.random_range(0..variants.len())];
        let q = rng.random_range(-3.0..3.0);
        let refined = numerical_legendre_transform(h, 0.0, 0.0, q).map_err(fail)?;
        brute = brute.max((refined - brute_conjugate(h, q)).abs());
    }
    verdict(
        self_dual <= 1e-8 && biconj <= 1e-6 && sandwich <= 0.0 && brute <= 1e-8,
        format!(
            "self-dual {self_dual:.1e}, biconjugate {biconj:.1e}, sandwich excess {sandwich:.1e}, brute force {brute:.1e}"
        ),
    )
}

fn export_bytes(sol: &splitsolve::SchemeSolution) -> Result<Files, String> {
    let dir = tempfile::tempdir().map_err(fail)?;
    sol.export(dir.path()).map_err(fail)?;
    let mut files: Files = std::fs::read_dir(dir.path())
        .map_err(fail)?
        .map(|e| {
            let e = e.map_err(fail)?;
            Ok((
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).map_err(fail)?,
            ))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn without_seconds(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_8() -> Verdict {
    let grid = Grid::from_range(-10.0, 10.0, 0.01).map_err(fail)?;
    let gh = Expectation::new(ExpectationMethod::Quadrature, 16).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut gap = |kinked: bool, seed: u64| -> Result<f64, String> {
        let mut worst = 0.0f64;
        for case in 0..50 {
            let phi = if kinked {
                random_lipschitz(&grid, &mut rng)
            } else {
                random_smooth(&grid, &mut rng)
            };
            let step =
                GaussianStep::new(rng.random_range(-2.0..2.0), rng.random_range(0.05..1.0)).map_err(fail)?;
            let (mc, se) = expect_monte_carlo(&phi, step, 1_000_000, seed + case).map_err(fail)?;
            worst = worst.max((gh.eval(&phi, step) - mc).abs() / se);
        }
        Ok(worst)
    };
    let worst = gap(false, 8_000)?;
    let kinked = gap(true, 9_000)?;

    let prob = ProblemSpec::cole_hopf(K, T).map_err(fail)?;
    let small = Grid::from_range(-4.0, 9.0, 0.02).map_err(fail)?;
    let run = |threads: usize| -> Result<(Files, String), String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(fail)?;
        pool.install(|| {
            let sol = solve(&prob, &small, &OperatorConfig::new(0.1)).map_err(fail)?;
            let report = run_convergence(
                &prob,
                &small,
                &[0.25, 0.1],
                (0.0, K),
                Solver::Splitting,
                &SweepSettings::default(),
            )
            .map_err(fail)?;
            Ok((export_bytes(&sol)?, without_seconds(&convergence_csv(&[&report]))))
        })
    };
    let reference = run(1)?;
    let identical = [1usize, 3, 8]
        .iter()
        .all(|&n| run(n).map(|r| r == reference).unwrap_or(false));
    verdict(
        worst <= 3.0 && identical,
        format!(
            "max |GH - MC| = {worst:.2} SE over 50 smooth cases ({kinked:.1} SE with kinked φ, not gated); {} layer files identical across 1/3/8 threads: {identical}",
            reference.0.len()
        ),
    )
}

fn criterion_9() -> Verdict {
    let p = ColeHopfParams::new(K, T).map_err(fail)?;
    let u = |t: f64, x: f64| cole_hopf_exact(&p, t, x).map_err(fail);
    let e = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut residual = 0.0f64;
    for _ in 0..100 {
        let (t, x) = (rng.random_range(0.0..0.9), rng.random_range(-3.0..8.0));
        let ut = (u(t + e, x)? - u(t - e, x)?) / (2.0 * e);
        let ux = (u(t, x + e)? - u(t, x - e)?) / (2.0 * e);
        let uxx = (u(t, x + e)? - 2.0 * u(t, x)? + u(t, x - e)?) / (e * e);
        residual = residual.max((-ut - 0.5 * uxx + 0.5 * ux * ux).abs());
    }
    let mut terminal = 0.0f64;
    for x in [-3.0, -1.0, -0.01, 0.01, 1.0, 2.5, 4.0, 4.99, 5.01, 6.0, 8.0] {
        terminal = terminal.max((u(T - 1e-10, x)? - f64::clamp(x, 0.0, K)).abs());
    }
    verdict(
        residual <= 1e-6 && terminal <= 1e-8,
        format!("max PDE residual {residual:.2e}; max |u(T-1e-10,x) - clamp| {terminal:.2e}"),
    )
}

fn criterion_10() -> Verdict {
    let problems = [
        ProblemSpec::cole_hopf(K, T).map_err(fail)?,
        ProblemSpec::quartic(K, T).map_err(fail)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let prob = &problems[trial % 2];
        let grid = Grid::new(rng.random_range(-3.0..0.0), rng.random_range(0.05..0.15), 50).map_err(fail)?;
        let delta = [0.1, 0.2, 0.25][rng.random_range(0..3)];
        let cfg = OperatorConfig::new(delta);
        let layers = 1 + rng.random_range(2..7);
        let base: Vec<GridFunction> = (0..layers)
            .map(|_| grid.sample(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let shift: Vec<GridFunction> = (0..layers)
            .map(|_| grid.sample(|_| rng.random_range(-0.3..0.3)))
            .collect();
        let u: Vec<GridFunction> = base.clone();
        let v: Vec<GridFunction> = if trial % 4 < 2 {
            (0..layers)
                .map(|_| grid.sample(|_| rng.random_range(-1.0..1.0)))
                .collect()
        } else {
            base.iter()
                .zip(&shift)
                .map(|(b, s)| b.combine(1.0, s, 1.0))
                .collect()
        };
        let h1 = layer_residuals(prob, &cfg, &u).map_err(fail)?;
        let h2 = layer_residuals(prob, &cfg, &v).map_err(fail)?;
        worst = worst.max(scheme_comparison_check(&u, &v, &h1, &h2, delta).max_violation);
    }
    verdict(
        worst <= 1e-9,
        format!("max violation {worst:.2e} over 100 trials"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let shared = sweeps();
    let table = |f: fn(&Sweeps) -> Verdict| -> Verdict {
        match &shared {
            Ok(s) => f(s),
            Err(e) => Err(e.clone()),
        }
    };
    let criteria: Vec<(&str, Check)> = vec![
        ("table values", Box::new(|| table(criterion_1))),
        ("howard baseline", Box::new(|| table(criterion_2))),
        ("convergence order", Box::new(|| table(criterion_3))),
        ("operator laws", Box::new(criterion_4)),
        ("consistency order", Box::new(criterion_5)),
        ("hopf-lax oracle", Box::new(criterion_6)),
        ("duality", Box::new(criterion_7)),
        ("expectation and determinism", Box::new(criterion_8)),
        ("exact solution", Box::new(criterion_9)),
        ("scheme comparison", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} ({name}): {tag} [{:.1}s] {detail}",
            i + 1,
            t0.elapsed().as_secs_f64()
        );
        let _ = std::io::stdout().flush();
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
