//! `simo-isq`: run decoder simulations and sweeps, evaluate the analytical
//! bounds, and run the built-in verification suites.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 verification failure, 4 guard skips under `--strict`.

mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simo_isq::bounds::{
    bpsk_pattern_bound, grid_union_bound, lemma1_tail_bound, min_errors, optimal_chernoff_t, per_user_bound,
    union_bound, BoundParams, LogBase,
};
use simo_isq::model::{antennas_for, AntennaSpec};
use simo_isq::par::with_threads;
use simo_isq::sim::{run_experiment, sweep_summaries, ExperimentConfig, ExperimentReport};
use simo_isq::verify::{run_suite, Suite};

use config::ExperimentArgs;
use error::{io_error, CliError};
use output::{csv_document, gnuplot_script, jsonl_document, num};

#[derive(Debug, Parser)]
#[command(name = "simo-isq", version = output::VERSION, about = "Multiuser decoders for the SIMO multiple access channel")]
struct Cli {
    /// Worker threads for trial-level parallelism (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its result rows.
    Simulate(RunArgs),
    /// Like `simulate` over at least two n values, plus SER trend verdicts.
    Sweep(RunArgs),
    /// Print the analytical bounds for one parameter set.
    Bounds(BoundsArgs),
    /// Run a fixed-seed property suite (or `all`).
    Verify {
        /// relaxation, lemma2, mgf, projection, determinism or all.
        suite: String,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
    /// Also write the rows as JSON lines to this file.
    #[arg(long)]
    jsonl: Option<String>,
    /// Also write a gnuplot script for the CSV to this file (needs --out).
    #[arg(long)]
    gnuplot: Option<String>,
    /// Exit with status 4 if any decoder was skipped.
    #[arg(long)]
    strict: bool,
    /// Append the machine-dependent wall_time_s column.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.02)]
    k_prime: f64,
    /// Grid pitch, in (0, 1) for the grid union bound.
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Chernoff parameter of the tail bound.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Exponent constant of the grid union bound (default alpha / 4).
    #[arg(long)]
    a: Option<f64>,
    /// Uniform per-pattern probability replacing the chi-square bound.
    #[arg(long)]
    p: Option<f64>,
    /// Also report the tail bound at the best t in (0, t].
    #[arg(long)]
    optimize_t: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = match cli.command {
        Command::Simulate(args) => run(&args, threads, false),
        Command::Sweep(args) => run(&args, threads, true),
        Command::Bounds(args) => bounds(&args),
        Command::Verify { suite } => verify(&suite, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simo-isq: {e}");
            e.exit_code()
        }
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => with_threads(t, f),
        None => f(),
    }
}

fn write_file(path: &str, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_error(path))
}

fn run(args: &RunArgs, threads: Option<usize>, sweep: bool) -> Result<(), CliError> {
    let cfg = args.experiment.resolve()?;
    if sweep && cfg.n_values.len() < 2 {
        return Err(CliError::Config("sweep needs at least two n values".into()));
    }
    if args.gnuplot.is_some() && args.out.is_none() {
        return Err(CliError::Config("--gnuplot needs --out".into()));
    }
    let report = in_pool(threads, || run_experiment(&cfg))?;
    let csv = csv_document(&cfg, &report, args.timing);
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.jsonl {
        write_file(path, &jsonl_document(&cfg, &report, args.timing))?;
    }
    if let (Some(script), Some(out)) = (&args.gnuplot, &args.out) {
        write_file(script, &gnuplot_script(out, &cfg))?;
    }
    report_diagnostics(&cfg, &report);
    if sweep {
        for s in sweep_summaries(&report.stats) {
            // Keep stdout pure CSV when the rows go there.
            if args.out.is_some() {
                println!("{}", s.verdict_line());
            } else {
                eprintln!("{}", s.verdict_line());
            }
        }
    }
    if args.strict && !report.skips.is_empty() {
        return Err(CliError::StrictSkips(report.skips.len()));
    }
    Ok(())
}

fn report_diagnostics(cfg: &ExperimentConfig, report: &ExperimentReport) {
    for s in &report.skips {
        eprintln!("skipped {} at n={} sigma={}: {}", s.decoder_id, s.n, s.sigma, s.reason);
    }
    for s in &report.bound_violations {
        eprintln!(
            "warning: {} at n={} sigma={} has SER {} above k + P_e^k + 3 CI width (k = {})",
            s.decoder_id, s.n, s.sigma, s.ser_point, cfg.k_fraction
        );
    }
}

fn bounds(args: &BoundsArgs) -> Result<(), CliError> {
    let params = BoundParams {
        sigma: args.sigma,
        t: args.t,
        a: args.a,
        k_prime: args.k_prime,
        epsilon: args.epsilon,
    };
    params.validate()?;
    let n = args.n;
    let m = antennas_for(n, AntennaSpec::Alpha(args.alpha))?.m;
    let i_min = min_errors(n, args.k_prime);
    let pattern = |i: usize| match args.p {
        Some(p) => Ok(p),
        None => bpsk_pattern_bound(i, m, args.sigma),
    };
    if let Some(p) = args.p {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Config(format!("--p must lie in [0, 1], got {p}")));
        }
    }
    let p: Vec<f64> = (0..=n).map(|i| if i == 0 { Ok(1.0) } else { pattern(i) }).collect::<Result<_, _>>()?;
    let tail = lemma1_tail_bound(n, args.alpha, args.t, args.k_prime * n as f64)?;
    let union = union_bound(n, args.k_prime, &p)?;
    let a = params.a_for(args.alpha);
    let grid = grid_union_bound(n, args.k_prime, args.epsilon, a, LogBase::Two)?;

    let mut rows: Vec<(String, String)> = vec![
        ("n".into(), n.to_string()),
        ("m".into(), m.to_string()),
        ("min_errors".into(), i_min.to_string()),
        ("tail_threshold".into(), num(tail.threshold)),
        ("tail_probability_bound".into(), num(tail.probability)),
    ];
    if args.optimize_t {
        let (t_best, best) = optimal_chernoff_t(n, args.alpha, args.k_prime * n as f64, args.t)?;
        rows.push(("tail_optimal_t".into(), num(t_best)));
        rows.push(("tail_optimal_probability_bound".into(), num(best.probability)));
    }
    rows.extend([
        (format!("chi_square_pattern_bound_i{i_min}"), num(p[i_min])),
        ("union_bound".into(), num(union)),
        ("grid_union_bound".into(), num(grid)),
        ("per_user_bound".into(), num(per_user_bound(args.k_prime, union)?)),
    ]);
    println!("quantity,value");
    for (k, v) in rows {
        println!("{k},{v}");
    }
    Ok(())
}

fn verify(name: &str, threads: Option<usize>) -> Result<(), CliError> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![name.parse().map_err(|e: simo_isq::Error| CliError::Config(e.to_string()))?]
    };
    let mut ok = true;
    for suite in suites {
        let report = in_pool(threads, || run_suite(suite))?;
        for p in &report.properties {
            ok &= p.passed;
            let verdict = if p.passed { "PASS" } else { "FAIL" };
            let detail = if p.detail.is_empty() { String::new() } else { format!("; {}", p.detail) };
            println!("{verdict} {suite}: {} (checked {}{detail})", p.name, p.checked);
        }
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Verification)
    }
}
