use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use porous_core::diagnostics::{linf_estimate_ratio, AdmissiblePair};
use porous_core::model::{beta, check_sign_condition, empirical_f, AdvectionKind};
use porous_core::scenarios::{build, list_scenarios, Outcome};
use porous_core::{Error, Field64, Grid64, Scenario64};

const EXIT_CONFIG: u8 = 1;
const EXIT_BLOW_UP: u8 = 2;
const EXIT_BOUNDARY: u8 = 3;
const EXIT_ORDER: u8 = 4;
const EXIT_EXPECTATION: u8 = 5;

const MIN_ORDER: f64 = 0.8;
const MAX_SNAPSHOTS: usize = 10;

#[derive(Parser)]
#[command(
    name = "porous",
    version,
    about = "Degenerate advection-diffusion scenarios and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics, summary and field snapshots.
    Run(RunArgs),
    /// Check structural conditions on the scenario's fluxes.
    Validate(RunArgs),
    /// Run a scenario and tabulate the empirical sup-norm estimate constant per exponent pair.
    Audit(RunArgs),
    /// Refinement study against the exact solution at N, 2N and 4N cells.
    Convergence(RunArgs),
    /// List registered scenarios.
    List,
}

#[derive(Args, Clone)]
struct RunArgs {
    scenario: String,
    /// Scenario override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Exponent pair for the estimate audit, repeatable.
    #[arg(long = "pair", value_name = "P,SIGMA", value_parser = parse_pair)]
    pairs: Vec<(f64, f64)>,
    /// Resolution multiplier applied to the scenario's cell count.
    #[arg(long, value_name = "M", default_value_t = 1)]
    refine: usize,
    /// Suppress progress lines on stderr.
    #[arg(long, short)]
    quiet: bool,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    if k.is_empty() {
        return Err(format!("empty key in {s:?}"));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (p, sigma) = s
        .split_once(',')
        .ok_or_else(|| format!("expected P,SIGMA, got {s:?}"))?;
    let p = p.trim().parse::<f64>().map_err(|e| format!("bad p in {s:?}: {e}"))?;
    let sigma = sigma
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad sigma in {s:?}: {e}"))?;
    Ok((p, sigma))
}

/// Failure carrying its exit status.
struct Exit(u8, anyhow::Error);

impl From<anyhow::Error> for Exit {
    fn from(e: anyhow::Error) -> Self {
        Exit(EXIT_CONFIG, e)
    }
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        Exit(EXIT_CONFIG, e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match cli.command {
        Command::List => cmd_list(),
        Command::Run(a) => cmd_run(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Audit(a) => cmd_audit(&a),
        Command::Convergence(a) => cmd_convergence(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn cmd_list() -> Result<u8, Exit> {
    for (name, desc) in list_scenarios() {
        println!("{name:<20} {desc}");
    }
    Ok(0)
}

fn load(args: &RunArgs) -> Result<Scenario64, Exit> {
    if args.refine == 0 {
        return Err(anyhow::anyhow!("--refine must be at least 1").into());
    }
    let mut s: Scenario64 =
        build(&args.scenario, &args.overrides).with_context(|| format!("building scenario {:?}", args.scenario))?;
    if args.refine > 1 {
        let n = s.grid.cells()[0] * args.refine;
        s.grid = s.grid.with_cells(n)?;
    }
    Ok(s)
}

fn prepare_out(dir: &Path) -> Result<(), Exit> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(())
}

fn progress(quiet: bool, f: &Field64) {
    if !quiet {
        eprintln!(
            "t = {:<12.6} linf = {:.6e}  mass = {:.12e}",
            f.time(),
            f.max_abs(),
            f.mass()
        );
    }
}

/// Runs the scenario, writing every `stride`-th snapshot and the final one.
fn execute(s: &Scenario64, exponents: Vec<f64>, out: &Path, quiet: bool) -> Result<Outcome<f64>, Exit> {
    let outputs = if s.horizon > 0.0 {
        (s.horizon / s.output_interval).ceil() as usize + 1
    } else {
        1
    };
    let stride = outputs.div_ceil(MAX_SNAPSHOTS).max(1);
    let mut k = 0usize;
    let mut write_err = None;
    let outcome = s.run(exponents, |f, _| {
        progress(quiet, f);
        if k.is_multiple_of(stride) && write_err.is_none() {
            if let Err(e) = f.save_csv(out.join(format!("snapshot_{k:05}.csv"))) {
                write_err = Some(e);
            }
        }
        k += 1;
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    outcome.last.save_csv(out.join("final.csv"))?;
    outcome.report.save_csv(out.join("diagnostics.csv"))?;
    Ok(outcome)
}

fn flags_code(o: &Outcome<f64>) -> u8 {
    if o.report.flags.blow_up.is_some() {
        EXIT_BLOW_UP
    } else if o.report.flags.boundary_contaminated {
        EXIT_BOUNDARY
    } else if !o.expectations_pass() {
        EXIT_EXPECTATION
    } else {
        0
    }
}

/// Empirical estimate constant for one exponent pair.
struct AuditRow {
    pair: AdmissiblePair<f64>,
    k: f64,
    t_of_sup: f64,
    finite: bool,
}

fn summary(s: &Scenario64, o: &Outcome<f64>, audit: &[AuditRow]) -> String {
    let r = &o.report;
    let mut t = String::new();
    let _ = writeln!(t, "scenario: {}", s.name);
    let _ = writeln!(t, "description: {}", s.description);
    let _ = writeln!(
        t,
        "grid: {:?} cells on [{}, {}]^{}",
        &s.grid.cells()[..s.grid.dim()],
        s.grid.min()[0],
        s.grid.max()[0],
        s.grid.dim()
    );
    let _ = writeln!(
        t,
        "horizon: {}  output_interval: {}  steps: {}",
        s.horizon, s.output_interval, r.steps
    );
    match r.flags.blow_up {
        None => {
            let _ = writeln!(t, "blow_up: no");
        }
        Some((last, fail, cell)) => {
            let _ = writeln!(
                t,
                "blow_up: yes (last valid t = {last}, failed at t = {fail}, cell {cell})"
            );
        }
    }
    let _ = writeln!(
        t,
        "boundary_contaminated: {} ({} guard violations)",
        if r.flags.boundary_contaminated { "yes" } else { "no" },
        r.guard_violations
    );
    let _ = writeln!(t, "M1 = {:.16e}", r.m1());
    let _ = writeln!(t, "Minf = {:.16e}", r.minf());
    if let (Some(m0), Some(m1)) = (r.mass.first(), r.mass.last()) {
        let _ = writeln!(t, "mass drift = {:.3e}", m1 - m0);
    }
    let _ = writeln!(t, "Fmu = {:.16e}", r.f_mu.last().copied().unwrap_or(0.0));
    let _ = writeln!(
        t,
        "note: F(t) is the empirical supremum of |f(x,t,u)|/|u|^(kappa+1) over the truncated box; \
         the supremum over the whole space may be larger."
    );
    for r in audit {
        let _ = writeln!(
            t,
            "K(p = {}, sigma = {}) = {:.16e} at t = {} (a = {}, all finite: {})",
            r.pair.p, r.pair.sigma, r.k, r.t_of_sup, r.pair.a, r.finite
        );
    }
    let _ = writeln!(t, "expectations:");
    for e in &o.expectations {
        let _ = writeln!(
            t,
            "  [{}] {}: {}",
            if e.pass { "pass" } else { "FAIL" },
            e.name,
            e.detail
        );
    }
    t
}

fn pairs_for(s: &Scenario64, args: &RunArgs) -> Result<Vec<AdmissiblePair<f64>>, Exit> {
    let kappa = s.problem.advection.kappa();
    let alpha = s.problem.diffusion.alpha;
    let n = s.problem.dim;
    args.pairs
        .iter()
        .map(|&(p, sigma)| {
            AdmissiblePair::new(p, sigma, kappa, alpha, n)
                .map_err(|e| Exit(EXIT_CONFIG, anyhow::anyhow!("inadmissible exponent pair: {e}")))
        })
        .collect()
}

fn audit_rows(o: &Outcome<f64>, pairs: &[AdmissiblePair<f64>]) -> Result<Vec<AuditRow>, Exit> {
    let u0 = o.initial.max_abs();
    pairs
        .iter()
        .map(|pair| {
            let r = linf_estimate_ratio(&o.report, pair, u0)?;
            let finite = r.all_finite() && r.values.iter().all(Option::is_some);
            Ok(AuditRow {
                pair: *pair,
                k: r.empirical_k,
                t_of_sup: r.t_of_sup,
                finite,
            })
        })
        .collect()
}

fn cmd_run(args: &RunArgs) -> Result<u8, Exit> {
    let s = load(args)?;
    let pairs = pairs_for(&s, args)?;
    prepare_out(&args.out)?;
    let o = execute(&s, pairs.iter().map(|p| p.p).collect(), &args.out, args.quiet)?;
    let rows = audit_rows(&o, &pairs)?;
    let text = summary(&s, &o, &rows);
    fs::write(args.out.join("summary.txt"), &text).context("writing summary.txt")?;
    print!("{text}");
    Ok(flags_code(&o))
}

fn cmd_audit(args: &RunArgs) -> Result<u8, Exit> {
    let s = load(args)?;
    let mut pairs = pairs_for(&s, args)?;
    if pairs.is_empty() {
        pairs = pairs_for(
            &s,
            &RunArgs {
                pairs: vec![(2.0, 1.01)],
                ..args.clone()
            },
        )?;
    }
    prepare_out(&args.out)?;
    let o = execute(&s, pairs.iter().map(|p| p.p).collect(), &args.out, args.quiet)?;
    let rows = audit_rows(&o, &pairs)?;
    let mut w = csv::Writer::from_path(args.out.join("audit.csv")).context("creating audit.csv")?;
    w.write_record(["p", "sigma", "a", "empirical_K", "t_of_sup"])
        .context("writing audit.csv")?;
    let mut all_finite = true;
    for r in &rows {
        all_finite &= r.finite;
        w.write_record([r.pair.p, r.pair.sigma, r.pair.a, r.k, r.t_of_sup].map(|v| format!("{v:.16e}")))
            .context("writing audit.csv")?;
        println!(
            "p = {:<6} sigma = {:<6} a = {:<6} K = {:.10e} (sup at t = {})",
            r.pair.p, r.pair.sigma, r.pair.a, r.k, r.t_of_sup
        );
    }
    w.flush().context("writing audit.csv")?;
    let text = summary(&s, &o, &rows);
    fs::write(args.out.join("summary.txt"), &text).context("writing summary.txt")?;
    if o.report.flags.blow_up.is_some() {
        return Ok(EXIT_BLOW_UP);
    }
    Ok(if all_finite { 0 } else { EXIT_EXPECTATION })
}

/// Dense sampling lattice for the condition checks. The cell count is odd so
/// that the coordinate axes, where the catalog fields concentrate, are sampled.
fn dense(grid: &Grid64) -> Result<Grid64, Exit> {
    let n = if grid.dim() == 1 { 4097 } else { 257 };
    Ok(grid.with_cells(grid.cells()[0].max(n) | 1)?)
}

fn cmd_validate(args: &RunArgs) -> Result<u8, Exit> {
    let s = load(args)?;
    let spec = &s.problem.advection;
    let grid = dense(&s.grid)?;
    let t0 = s.problem.start_time();
    let times = [t0, t0 + 0.5 * s.horizon, t0 + s.horizon];
    println!("scenario: {}", s.name);
    println!("sampling lattice: {:?} cells", &grid.cells()[..grid.dim()]);
    for &t in &times {
        let f = empirical_f(spec, &grid, t, 1.0)?;
        println!("F(t = {t}) = {f:.10e}");
    }
    match &spec.kind {
        AdvectionKind::Zero => println!("f = 0: F is identically zero and beta is zero everywhere"),
        AdvectionKind::PowerLaw(p) => {
            let (mut lo, mut hi, mut pos) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
            for i in 0..grid.len() {
                let b = beta(&p.velocity, grid.center(i), t0, grid.dim());
                lo = lo.min(b);
                hi = hi.max(b);
                pos += usize::from(b > 0.0);
            }
            let amax = lo.abs().max(hi.abs());
            println!(
                "beta = -div b on {} samples: min {lo:.6e}, max {hi:.6e}, max |beta| {amax:.6e}, positive at {pos} samples",
                grid.len()
            );
        }
    }
    if let Some(g) = &spec.g {
        println!(
            "x-independent flux g = ({}, {}) |u|^{} u contributes nothing to beta",
            g.c[0], g.c[1], g.kappa
        );
    }
    let u_samples = [-1.0, -0.5, -0.125, 0.125, 0.5, 1.0];
    let report = check_sign_condition(spec, &grid, t0, &u_samples)?;
    let verdict = if report.holds { "SATISFIED" } else { "VIOLATED" };
    println!(
        "divergence sign condition u div_x f >= 0: {verdict} ({} samples)",
        report.samples
    );
    if let Some((x, u, v)) = report.worst {
        println!(
            "  worst sample: x = ({:.6}, {:.6}), u = {u}, u div_x f = {v:.6e}",
            x[0], x[1]
        );
    }
    match &s.problem.diffusion.m_bound {
        None => println!("diffusion ellipticity upper bound: no M(t) configured, check skipped"),
        Some(_) => println!("diffusion ellipticity upper bound: configured"),
    }
    Ok(0)
}

fn cmd_convergence(args: &RunArgs) -> Result<u8, Exit> {
    let base = load(args)?;
    if !base.has_exact_solution() {
        return Err(Exit(
            EXIT_CONFIG,
            anyhow::anyhow!(
                "scenario {:?} has no exact solution to measure convergence against",
                base.name
            ),
        ));
    }
    prepare_out(&args.out)?;
    let n0 = base.grid.cells()[0];
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for m in [1, 2, 4] {
        let mut s = base.clone();
        s.grid = base.grid.with_cells(n0 * m)?;
        let o = s.run(vec![], |f, _| {
            if !args.quiet && f.time() == s.problem.start_time() {
                eprintln!("cells = {}", n0 * m);
            }
        })?;
        if let Some((t, _, cell)) = o.report.flags.blow_up {
            return Err(Exit(
                EXIT_BLOW_UP,
                anyhow::anyhow!("blow-up after t = {t} in cell {cell} at {} cells", n0 * m),
            ));
        }
        let err = s.exact_l1_error(&o.last).expect("oracle checked above");
        rows.push((n0 * m, s.grid.h()[0], err));
    }
    let mut w = csv::Writer::from_path(args.out.join("convergence.csv")).context("creating convergence.csv")?;
    w.write_record(["cells", "h", "l1_error", "order"])
        .context("writing convergence.csv")?;
    let mut ok = true;
    for (i, &(n, h, e)) in rows.iter().enumerate() {
        let order = if i == 0 { f64::NAN } else { (rows[i - 1].2 / e).log2() };
        if i > 0 && (order.is_nan() || order < MIN_ORDER) {
            ok = false;
        }
        let order_s = if i == 0 { String::new() } else { format!("{order:.16e}") };
        w.write_record([n.to_string(), format!("{h:.16e}"), format!("{e:.16e}"), order_s])
            .context("writing convergence.csv")?;
        if i == 0 {
            println!("cells = {n:<6} L1 error = {e:.6e}");
        } else {
            println!("cells = {n:<6} L1 error = {e:.6e}  observed order = {order:.4}");
        }
    }
    w.flush().context("writing convergence.csv")?;
    if ok {
        Ok(0)
    } else {
        eprintln!("observed order below {MIN_ORDER}");
        Ok(EXIT_ORDER)
    }
}
