//! The `progenykit` command line.
//!
//! Subcommands: `hitting`, `progeny`, `tail`, `verify`, `simulate`.
//! Specs are passed as JSON, either inline or as a file path; parsing is
//! strict (unknown keys are rejected). Output is CSV or JSON with full
//! 17-significant-digit floats, byte-identical for identical config and seed.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or spec error,
//! 3 numerical domain error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::gwmodel::{GWModel, ModelError, OffspringSpec};
use crate::mc;
use crate::progeny::{self, ProgenyError};
use crate::walks::{self, WalkError, WalkSpec};

#[derive(Parser)]
#[command(
    name = "progenykit",
    version,
    about = "Exact distributions, generating functions, and tail asymptotics of \
             branching-process total progeny and random-walk first-passage times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First-passage distribution P(T=n) of a walk, with cumulative mass and defect.
    Hitting(HittingArgs),
    /// Total-progeny PGF of a branching model on a diagonal s-grid.
    Progeny(ProgenyArgs),
    /// Tail sequences and their limit constants (critical stay walk).
    Tail(TailArgs),
    /// Monte Carlo cross-checks: branching identity, offspring law, TV distance, honesty.
    Verify(VerifyArgs),
    /// Empirical hitting-time histogram from seeded simulation.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
    /// Length-prefixed little-endian u64 histogram (simulate only).
    Bin,
}

#[derive(Args)]
struct HittingArgs {
    /// Walk spec: inline JSON or a path to a JSON file.
    #[arg(long)]
    spec: String,
    /// Largest n in the table.
    #[arg(long = "n-max", default_value_t = 1024)]
    n_max: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProgenyArgs {
    /// Branching-model spec: inline JSON or a path to a JSON file.
    #[arg(long)]
    spec: String,
    /// Number of grid points t = k/(n+1), k = 1..n.
    #[arg(long = "n-max", default_value_t = 19)]
    n_max: usize,
    /// Fixed-point stopping tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TailQuantity {
    /// P(|Y| > n) for the critical stay-walk progeny.
    Theta,
    /// P(T >= n) for the critical stay walk.
    Alpha,
    /// The double-factorial convolution sum and its limit.
    Convolution,
}

#[derive(Args)]
struct TailArgs {
    #[arg(long, value_enum, default_value = "theta")]
    quantity: TailQuantity,
    /// Stay probability r in (0,1); required for theta and alpha.
    #[arg(long)]
    r: Option<f64>,
    /// Convolution argument x in (-1,1); required for the convolution sum.
    #[arg(long)]
    x: Option<f64>,
    /// Largest n (rows are log-spaced up to here).
    #[arg(long = "n-max", default_value_t = 1_000_000)]
    n_max: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Walk spec: inline JSON or a path to a JSON file.
    #[arg(long)]
    spec: String,
    /// Number of simulated paths.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Step horizon for the identity-check paths.
    #[arg(long, default_value_t = 1_000_000)]
    horizon: u64,
    /// Horizon for the analytic-vs-empirical comparison.
    #[arg(long = "n-max", default_value_t = 4096)]
    n_max: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Walk spec: inline JSON or a path to a JSON file.
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Step horizon per path; paths that never hit count as overflow.
    #[arg(long, default_value_t = 1024)]
    horizon: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    /// Bad invocation, malformed or invalid spec: exit 2.
    Usage(String),
    /// Valid spec, but the requested numbers leave the mathematical domain: exit 3.
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => m,
        }
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        match &e {
            WalkError::ParameterDomain { .. } | WalkError::NegativeDiscriminant(_) => {
                CliError::Domain(e.to_string())
            }
            WalkError::Progeny(inner) => CliError::from(inner.clone()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ProgenyError> for CliError {
    fn from(e: ProgenyError) -> Self {
        match &e {
            ProgenyError::NegativeDiscriminant(_)
            | ProgenyError::NoRootInUnitInterval
            | ProgenyError::ArgumentOutsideOpenCube(_)
            | ProgenyError::Series(_) => CliError::Domain(e.to_string()),
            ProgenyError::Model(inner) => CliError::from(inner.clone()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::GeometricDomain(_) | ModelError::ArgumentRange(_) => {
                CliError::Domain(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap reports usage problems on exit code 2 and --help/--version on 0
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Hitting(args) => cmd_hitting(args),
        Command::Progeny(args) => cmd_progeny(args),
        Command::Tail(args) => cmd_tail(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

/// `--spec` accepts inline JSON (starts with `{`) or a file path.
fn load_spec_text(arg: &str) -> Result<String, CliError> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        return Ok(arg.to_string());
    }
    fs::read_to_string(arg)
        .map_err(|e| CliError::Usage(format!("cannot read spec file {arg}: {e}")))
}

fn load_walk_spec(arg: &str) -> Result<WalkSpec, CliError> {
    let text = load_spec_text(arg)?;
    Ok(WalkSpec::from_json(&text)?)
}

fn load_model_spec(arg: &str) -> Result<GWModel, CliError> {
    let text = load_spec_text(arg)?;
    Ok(GWModel::from_json(&text)?)
}

fn write_output(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(bytes)
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}")))
        }
    }
}

/// 17 significant digits, scientific, locale-free.
fn csv_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_hitting(args: HittingArgs) -> Result<i32, CliError> {
    if args.format == Format::Bin {
        return Err(CliError::Usage(
            "--format bin applies to simulate only".into(),
        ));
    }
    let spec = load_walk_spec(&args.spec)?;
    let dist = walks::analytic_hitting_pmf(&spec, args.n_max)?;
    let mut cdf = Vec::with_capacity(args.n_max);
    let mut acc = 0.0;
    for n in 1..=args.n_max {
        acc += dist.prob(n);
        cdf.push(acc);
    }
    let bytes = match args.format {
        Format::Csv => {
            let mut text = String::from("n,pmf,cdf\n");
            for n in 1..=args.n_max {
                text.push_str(&format!(
                    "{n},{},{}\n",
                    csv_f(dist.prob(n)),
                    csv_f(cdf[n - 1])
                ));
            }
            text.push_str(&format!(
                "defect,{},{}\n",
                csv_f(dist.defect),
                csv_f(acc + dist.defect)
            ));
            text.into_bytes()
        }
        Format::Json => {
            let report = json!({
                "command": "hitting",
                "n_max": args.n_max,
                "n": (1..=args.n_max).collect::<Vec<_>>(),
                "pmf": (1..=args.n_max).map(|n| dist.prob(n)).collect::<Vec<_>>(),
                "cdf": cdf,
                "defect": dist.defect,
            });
            pretty_json(&report)
        }
        Format::Bin => unreachable!(),
    };
    write_output(&args.out, &bytes)?;
    Ok(0)
}

/// The walk families whose progeny PGF has a closed form.
enum ClosedFormFamily {
    Stay { p: f64, q: f64, r: f64 },
    TwoOne { p: f64, q1: f64, q2: f64 },
}

impl ClosedFormFamily {
    fn detect(model: &GWModel) -> Option<ClosedFormFamily> {
        if model.types() != 2 {
            return None;
        }
        let (first, second) = (&model.specs()[0], &model.specs()[1]);
        let OffspringSpec::Geometric { p, q, shift: 0 } = first else {
            return None;
        };
        match second {
            OffspringSpec::Table { entries } => {
                let sterile = entries
                    .iter()
                    .all(|(v, pr)| *pr == 0.0 || v.iter().all(|&n| n == 0));
                sterile.then(|| ClosedFormFamily::Stay {
                    p: *p,
                    q: q[0],
                    r: q[1],
                })
            }
            OffspringSpec::Geometric {
                p: p2,
                q: q2,
                shift: 1,
            } if p2 == p && q2 == q => Some(ClosedFormFamily::TwoOne {
                p: *p,
                q1: q[0],
                q2: q[1],
            }),
            _ => None,
        }
    }

    fn eval(&self, s: [f64; 2]) -> Result<[f64; 2], ProgenyError> {
        match self {
            ClosedFormFamily::Stay { p, q, r } => progeny::closed_form_stay(*p, *q, *r, s),
            ClosedFormFamily::TwoOne { p, q1, q2 } => progeny::closed_form_21(*p, *q1, *q2, s),
        }
    }
}

fn cmd_progeny(args: ProgenyArgs) -> Result<i32, CliError> {
    if args.format == Format::Bin {
        return Err(CliError::Usage(
            "--format bin applies to simulate only".into(),
        ));
    }
    if args.n_max == 0 {
        return Err(CliError::Usage("--n-max must be at least 1".into()));
    }
    if args.tol <= 0.0 {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let model = load_model_spec(&args.spec)?;
    let closed = ClosedFormFamily::detect(&model);
    let types = model.types();
    const MAX_ITER: u64 = 1_000_000;

    struct Row {
        t: f64,
        rho: Vec<f64>,
        residual: f64,
        iterations: u64,
        converged: bool,
        cf_dev: Option<f64>,
    }

    let mut rows = Vec::with_capacity(args.n_max);
    let mut max_cf_dev: Option<f64> = None;
    for k in 1..=args.n_max {
        let t = k as f64 / (args.n_max as f64 + 1.0);
        let s = vec![t; types];
        let (rho, residual, iterations, converged) =
            match progeny::progeny_pgf_point(&model, &s, args.tol, MAX_ITER) {
                Ok(point) => (point.rho, point.residual, point.iterations, true),
                Err(ProgenyError::NotConverged {
                    iterations,
                    residual,
                    last,
                }) => (last, residual, iterations, false),
                Err(other) => return Err(other.into()),
            };
        let cf_dev = match &closed {
            Some(family) if converged => {
                let exact = family.eval([s[0], s[1]])?;
                let dev = (rho[0] - exact[0]).abs().max((rho[1] - exact[1]).abs());
                max_cf_dev = Some(max_cf_dev.map_or(dev, |m: f64| m.max(dev)));
                Some(dev)
            }
            _ => None,
        };
        rows.push(Row {
            t,
            rho,
            residual,
            iterations,
            converged,
            cf_dev,
        });
    }

    let bytes = match args.format {
        Format::Csv => {
            let rho_heads: Vec<String> = (1..=types).map(|i| format!("rho_{i}")).collect();
            let mut text = format!(
                "t,{},residual,iterations,converged,closed_form,cf_dev\n",
                rho_heads.join(",")
            );
            for row in &rows {
                let rho: Vec<String> = row.rho.iter().map(|&x| csv_f(x)).collect();
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    csv_f(row.t),
                    rho.join(","),
                    csv_f(row.residual),
                    row.iterations,
                    u8::from(row.converged),
                    u8::from(closed.is_some()),
                    row.cf_dev.map(csv_f).unwrap_or_default()
                ));
            }
            let pad = ",".repeat(4 + types);
            text.push_str(&format!(
                "max_cf_dev,{}{pad}\n",
                max_cf_dev.map(csv_f).unwrap_or_default()
            ));
            text.into_bytes()
        }
        Format::Json => {
            let report = json!({
                "command": "progeny",
                "tol": args.tol,
                "closed_form_available": closed.is_some(),
                "rows": rows.iter().map(|row| json!({
                    "t": row.t,
                    "rho": row.rho,
                    "residual": row.residual,
                    "iterations": row.iterations,
                    "converged": row.converged,
                    "cf_dev": row.cf_dev,
                })).collect::<Vec<_>>(),
                "max_cf_dev": max_cf_dev,
            });
            pretty_json(&report)
        }
        Format::Bin => unreachable!(),
    };
    write_output(&args.out, &bytes)?;
    Ok(0)
}

fn log_spaced(n_max: usize) -> Vec<usize> {
    let mut points = Vec::new();
    let mut k = 0u32;
    loop {
        let n = 10f64.powf(k as f64 / 4.0).round() as usize;
        if n > n_max {
            break;
        }
        if points.last() != Some(&n) {
            points.push(n);
        }
        k += 1;
    }
    if points.last() != Some(&n_max) && n_max >= 1 {
        points.push(n_max);
    }
    points
}

fn cmd_tail(args: TailArgs) -> Result<i32, CliError> {
    if args.format == Format::Bin {
        return Err(CliError::Usage(
            "--format bin applies to simulate only".into(),
        ));
    }
    if args.n_max < 1 {
        return Err(CliError::Usage("--n-max must be at least 1".into()));
    }
    let (label, param, limit): (&str, f64, f64) = match args.quantity {
        TailQuantity::Theta | TailQuantity::Alpha => {
            let r = args
                .r
                .ok_or_else(|| CliError::Usage("--r is required for theta and alpha".into()))?;
            if !(r > 0.0 && r < 1.0) {
                return Err(CliError::Domain(format!("r = {r} outside (0, 1)")));
            }
            match args.quantity {
                TailQuantity::Theta => ("theta", r, walks::tail_constant_progeny(r)),
                _ => ("alpha", r, walks::tail_constant_hitting(r)),
            }
        }
        TailQuantity::Convolution => {
            let x = args
                .x
                .ok_or_else(|| CliError::Usage("--x is required for the convolution sum".into()))?;
            if !(-1.0..1.0).contains(&x) {
                return Err(CliError::Domain(format!("x = {x} outside (-1, 1)")));
            }
            ("convolution", x, walks::convolution_limit(x))
        }
    };

    let value_at = |n: usize| -> Result<f64, CliError> {
        let v = match args.quantity {
            TailQuantity::Theta => walks::theta_at(param, n)?,
            TailQuantity::Alpha => walks::alpha_at(param, n)?,
            TailQuantity::Convolution => {
                walks::convolution_limit_check(param, n)? / (n as f64).sqrt()
            }
        };
        Ok(v)
    };

    let mut ns = vec![0];
    ns.extend(log_spaced(args.n_max));
    if matches!(args.quantity, TailQuantity::Convolution) {
        ns.remove(0); // the convolution sum starts at n = 1
    }

    struct Row {
        n: usize,
        value: f64,
        scaled: f64,
        rel_gap: f64,
    }
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let value = value_at(n)?;
        let scaled = (n as f64).sqrt() * value;
        rows.push(Row {
            n,
            value,
            scaled,
            rel_gap: scaled / limit - 1.0,
        });
    }

    let bytes = match args.format {
        Format::Csv => {
            let mut text = String::from("n,value,sqrt_n_value,limit_constant,rel_gap\n");
            for row in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.n,
                    csv_f(row.value),
                    csv_f(row.scaled),
                    csv_f(limit),
                    csv_f(row.rel_gap)
                ));
            }
            text.into_bytes()
        }
        Format::Json => {
            let report = json!({
                "command": "tail",
                "quantity": label,
                "parameter": param,
                "limit_constant": limit,
                "rows": rows.iter().map(|row| json!({
                    "n": row.n,
                    "value": row.value,
                    "sqrt_n_value": row.scaled,
                    "rel_gap": row.rel_gap,
                })).collect::<Vec<_>>(),
            });
            pretty_json(&report)
        }
        Format::Bin => unreachable!(),
    };
    write_output(&args.out, &bytes)?;
    Ok(0)
}

fn thread_cap() -> usize {
    std::env::var("PROGENYKIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get().min(8)))
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    if args.n_max == 0 || args.horizon == 0 {
        return Err(CliError::Usage(
            "--n-max and --horizon must be positive".into(),
        ));
    }
    let spec = load_walk_spec(&args.spec)?;
    if matches!(spec, WalkSpec::General { .. }) {
        return Err(CliError::Usage(
            "verify needs a simple, stay, or two_one walk (general walks have no \
             built-in branching structure)"
                .into(),
        ));
    }

    // 1. pathwise branching identity, zero tolerance
    let identity = mc::verify_identity_batch(&spec, args.samples, args.horizon, args.seed);
    let identity_pass = identity.violations == 0;

    // 2. offspring-law goodness of fit at single-particle levels
    let fit = mc::offspring_law_report(&spec, args.samples.min(50_000), args.horizon, args.seed)?;
    let fit_pass = fit.pass();

    // 3. analytic vs empirical distribution in total variation
    let analytic = walks::analytic_hitting_pmf(&spec, args.n_max)?;
    let histogram = mc::empirical_hitting_parallel(
        &spec,
        args.samples,
        args.n_max as u64,
        args.seed,
        thread_cap(),
    );
    let empirical = histogram.to_dist();
    let tv = empirical.tv_distance(&analytic);
    // The expected TV of a multinomial sample against its own law is about
    // sqrt(2/pi)/2 * sum_n sqrt(p_n) / sqrt(N); gate at 1.5x that, with a
    // floor for near-degenerate distributions. TV concentrates within
    // O(1/sqrt(N)) of its mean, so the margin is many standard deviations.
    let sqrt_mass: f64 = analytic
        .probs
        .iter()
        .map(|&p| p.max(0.0).sqrt())
        .sum::<f64>()
        + analytic.defect.sqrt();
    let expected_tv =
        0.5 * (2.0 / std::f64::consts::PI).sqrt() * sqrt_mass / (args.samples as f64).sqrt();
    let tv_threshold = (1.5 * expected_tv).max(6.0 / (args.samples as f64).sqrt());
    let tv_pass = tv < tv_threshold;

    // 4. honesty: the exact total mass P(T < infinity) is the PGF value at 1
    //    (1 under the drift condition, the embedded extinction probability
    //    otherwise); the finite-horizon analytic mass differs from it only by
    //    the truncation tail, reported separately
    let drift = spec.drift();
    let mass = analytic.total_mass();
    let p_finite = walks::prob_ever_hits(&spec)
        .ok_or_else(|| CliError::Usage("honesty check unavailable for this walk".into()))?;
    let defect_at_infinity = 1.0 - p_finite;
    let truncation_gap = p_finite - mass;
    let honesty_pass = defect_at_infinity <= 1e-9;

    let all_pass = identity_pass && fit_pass && tv_pass && honesty_pass;
    let report = json!({
        "command": "verify",
        "samples": args.samples,
        "horizon": args.horizon,
        "n_max": args.n_max,
        "seed": args.seed,
        "drift": drift,
        "identity": {
            "samples": identity.samples,
            "finite": identity.finite,
            "violations": identity.violations,
            "pass": identity_pass,
        },
        "offspring_fit": {
            "type1": chi_square_json(&fit.type1),
            "type2": match &fit.type2 {
                mc::Type2Fit::Sterile { samples, all_empty } => json!({
                    "kind": "sterile", "samples": samples, "all_empty": all_empty,
                }),
                mc::Type2Fit::Shifted { fit, first_component_always_positive } => json!({
                    "kind": "shifted",
                    "fit": chi_square_json(fit),
                    "first_component_always_positive": first_component_always_positive,
                }),
            },
            "pass": fit_pass,
        },
        "total_variation": {
            "distance": tv,
            "threshold": tv_threshold,
            "pass": tv_pass,
        },
        "honesty": {
            "p_finite": p_finite,
            "defect": defect_at_infinity,
            "analytic_mass": mass,
            "truncation_gap": truncation_gap,
            "pass": honesty_pass,
        },
        "pass": all_pass,
    });
    write_output(&args.out, &pretty_json(&report))?;
    Ok(if all_pass { 0 } else { 1 })
}

fn chi_square_json(fit: &mc::ChiSquareFit) -> serde_json::Value {
    json!({
        "statistic": fit.statistic,
        "dof": fit.dof,
        "critical_999": fit.critical,
        "samples": fit.samples,
        "merged_cells": fit.merged_cells,
        "pass": fit.pass,
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    if args.horizon == 0 {
        return Err(CliError::Usage("--horizon must be positive".into()));
    }
    let spec = load_walk_spec(&args.spec)?;
    let histogram =
        mc::empirical_hitting_parallel(&spec, args.samples, args.horizon, args.seed, thread_cap());
    let bytes = match args.format {
        Format::Csv => {
            let mut text = String::from("n,count,freq\n");
            for (n, &count) in histogram.counts.iter().enumerate() {
                text.push_str(&format!(
                    "{n},{count},{}\n",
                    csv_f(count as f64 / histogram.samples as f64)
                ));
            }
            text.push_str(&format!(
                "overflow,{},{}\n",
                histogram.overflow,
                csv_f(histogram.overflow as f64 / histogram.samples as f64)
            ));
            text.into_bytes()
        }
        Format::Json => {
            let report = json!({
                "command": "simulate",
                "samples": histogram.samples,
                "horizon": args.horizon,
                "seed": args.seed,
                "counts": histogram.counts,
                "overflow": histogram.overflow,
            });
            pretty_json(&report)
        }
        Format::Bin => {
            // counts for n = 0..=horizon followed by the overflow count
            let mut all = histogram.counts.clone();
            all.push(histogram.overflow);
            let mut buf = Vec::with_capacity(8 * (all.len() + 1));
            mc::write_histogram_binary(&mut buf, &all)
                .map_err(|e| CliError::Usage(format!("cannot encode histogram: {e}")))?;
            buf
        }
    };
    write_output(&args.out, &bytes)?;
    Ok(0)
}

fn pretty_json(value: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON encoding");
    bytes.push(b'\n');
    bytes
}
