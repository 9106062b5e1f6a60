use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use splitsolve::config::{parse_config, RunConfig};
use splitsolve::harness::{
    self, compare_schemes, comparison_csv, emit_report, run_convergence, Solver, Winner,
};
use splitsolve::{scheme, selftest, Error};

/// Operator-splitting solver for semilinear parabolic PDEs.
///
/// Configuration files use a sectioned `key = value` format with sections
/// [problem], [grid], [scheme], [howard] and [output]. In coefficient
/// expressions `^` is right-associative exponentiation.
#[derive(Parser, Debug)]
#[command(name = "splitsolve", version, about, long_about = None)]
struct Cli {
    /// Worker threads (defaults to the config value, then all cores).
    #[arg(long, global = true, env = "SPLITSOLVE_THREADS")]
    threads: Option<usize>,

    /// Seed for randomized checks; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once with `scheme.delta` and export every time layer as CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use Howard's finite-difference solver instead of splitting.
        #[arg(long)]
        howard: bool,
    },
    /// Splitting-scheme convergence sweep over `scheme.delta_list`.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Splitting against Howard's method over `scheme.delta_list`.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant suites at small scale.
    Selftest,
}

fn load(path: &Path, cli: &Cli) -> splitsolve::Result<RunConfig> {
    let mut cfg = parse_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn warn_numerical_dual(prob: &splitsolve::ProblemSpec) {
    if !prob.hamiltonian.has_analytic_dual() {
        eprintln!(
            "warning: no `dual` expression; L is conjugated numerically at every evaluation, which is slow"
        );
    }
}

fn init_threads(n: Option<usize>) {
    if let Some(n) = n {
        // a second initialization only happens in tests; keep the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn fmt_pct(v: f64) -> String {
    if v.is_nan() {
        "failed".into()
    } else {
        format!("{:.4}%", 100.0 * v)
    }
}

fn run(cli: &Cli) -> splitsolve::Result<bool> {
    match &cli.command {
        Command::Selftest => {
            init_threads(cli.threads);
            let results = selftest::run_all(cli.seed.unwrap_or(0));
            for r in &results {
                println!(
                    "{} {:<16} {:>7.2}s  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.seconds,
                    r.detail
                );
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} suites passed", results.len() - failed, results.len());
            Ok(failed == 0)
        }
        Command::Solve { config, out, howard } => {
            let cfg = load(config, cli)?;
            init_threads(cli.threads.or(cfg.threads));
            let prob = cfg.build_problem()?;
            warn_numerical_dual(&prob);
            for issue in prob.validate() {
                eprintln!("warning: {issue}");
            }
            let grid = cfg.grid()?;
            let start = Instant::now();
            let sol = if *howard {
                splitsolve::howard_fd_solve(&prob, &grid, cfg.scheme.delta, &cfg.howard_config(&prob)?)?
            } else {
                scheme::solve(&prob, &grid, &cfg.operator_config(cfg.scheme.delta))?
            };
            let seconds = start.elapsed().as_secs_f64();
            let dir = out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            sol.export(&dir)?;
            if cfg.output.formats.svg {
                let path = dir.join("solution.svg");
                let svg = harness::solution_svg(&[("u(0,x)".to_string(), &sol.layers[0])], None);
                std::fs::write(&path, svg).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
            let (t, x) = cfg.scheme.probe;
            println!(
                "{} solve of `{}`: Δ = {}, {} layers, {:.2}s",
                if *howard { "howard" } else { "splitting" },
                prob.name,
                cfg.scheme.delta,
                sol.layers.len(),
                seconds
            );
            println!("u({t}, {x}) = {:.10}", sol.evaluate(t, x)?);
            if let Some(params) = &prob.benchmark {
                println!("exact      = {:.10}", splitsolve::cole_hopf_exact(params, t, x)?);
            }
            println!("layers written to {}", dir.display());
            Ok(true)
        }
        Command::Convergence { config, out } => {
            let cfg = load(config, cli)?;
            init_threads(cli.threads.or(cfg.threads));
            let prob = cfg.build_problem()?;
            warn_numerical_dual(&prob);
            let grid = cfg.grid()?;
            let settings = cfg.sweep_settings(&prob)?;
            let report = run_convergence(
                &prob,
                &grid,
                &cfg.scheme.delta_list,
                cfg.scheme.probe,
                Solver::Splitting,
                &settings,
            )?;
            println!(
                "reference ({}) = {:.10}",
                report.reference.label(),
                report.reference_value
            );
            println!(
                "{:>8} {:>14} {:>12} {:>10}",
                "delta", "value", "rel_error", "seconds"
            );
            for r in &report.rows {
                println!(
                    "{:>8} {:>14.8} {:>12} {:>10.2}",
                    r.delta,
                    r.value,
                    fmt_pct(r.rel_error),
                    r.seconds
                );
            }
            if let Some(rate) = report.fitted_rate {
                println!("fitted rate {rate:.3}");
            }
            let dir = out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            for p in emit_report(&[&report], &dir, cfg.output.formats)? {
                println!("wrote {}", p.display());
            }
            Ok(report.rows.iter().all(|r| r.failure.is_none()))
        }
        Command::Compare { config, out } => {
            let cfg = load(config, cli)?;
            init_threads(cli.threads.or(cfg.threads));
            let prob = cfg.build_problem()?;
            warn_numerical_dual(&prob);
            let grid = cfg.grid()?;
            let settings = cfg.sweep_settings(&prob)?;
            let cmp = compare_schemes(&prob, &grid, &cfg.scheme.delta_list, cfg.scheme.probe, &settings)?;
            println!(
                "reference ({}) = {:.10}",
                cmp.splitting.reference.label(),
                cmp.splitting.reference_value
            );
            println!(
                "{:>8} | {:>12} {:>10} {:>8} | {:>12} {:>10} {:>8} | better",
                "delta", "splitting", "error", "time", "howard", "error", "time"
            );
            for ((s, h), (_, w)) in cmp.splitting.rows.iter().zip(&cmp.howard.rows).zip(&cmp.winners) {
                println!(
                    "{:>8} | {:>12.6} {:>10} {:>7.2}s | {:>12.6} {:>10} {:>7.2}s | {}",
                    s.delta,
                    s.value,
                    fmt_pct(s.rel_error),
                    s.seconds,
                    h.value,
                    fmt_pct(h.rel_error),
                    h.seconds,
                    match w {
                        Winner::Splitting => "splitting",
                        Winner::Howard => "howard",
                        Winner::Tie => "tie",
                    }
                );
            }
            let dir = out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            let mut written = emit_report(&[&cmp.splitting, &cmp.howard], &dir, cfg.output.formats)?;
            if cfg.output.formats.csv {
                let path = dir.join("comparison.csv");
                std::fs::write(&path, comparison_csv(&cmp)).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                written.push(path);
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            let ok = cmp
                .splitting
                .rows
                .iter()
                .chain(&cmp.howard.rows)
                .all(|r| r.failure.is_none());
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
