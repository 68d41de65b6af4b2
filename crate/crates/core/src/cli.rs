//! `choquard <command> --config run.json [--out DIR]`
//!
//! Exit status: 0 success, 1 I/O failure, 2 invalid input, 3 solver failure
//! (refused regime, stall, or no convergence within `max_iters`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigError, InitKind, RunConfig};
use crate::convolve::{direct_convolve_oracle, riesz_convolve, ORACLE_MAX_POINTS};
use crate::diagnostics::{
    brezis_lieb_defect, classify_exponents, loglog_slope, pohozaev_residual, vanishing_decay_test,
    vanishing_slope, Bump, PhaseLabel,
};
use crate::error::Error;
use crate::field::Field;
use crate::functionals::energy_breakdown;
use crate::grid::{Grid, Params};
use crate::kernel::KernelTable;
use crate::minimizer::{equation_residual, minimize_mp, recenter, SolveConfig, SolveResult};
use crate::snapshot::{read_snapshot, write_snapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Environment variable capping the worker threads of `phase`.
pub const THREADS_ENV: &str = "CHOQUARD_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "choquard",
    version,
    about = "Ground states of the doubly nonlinear Choquard equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Minimize on the constraint and write the solution with its diagnostics.
    Solve,
    /// Print the regime of `p + q` and the identity coefficients.
    Classify,
    /// Sweep a rectangle of `(p, q)` and tabulate labels and ground-state levels.
    Phase,
    /// Evaluate the identity residuals of a stored field.
    Check,
    /// Convolve a field with the Riesz kernel, against the direct sum when small.
    Convolve,
    /// Splitting defect of `D` for two bumps drifting apart.
    Bltest,
    /// `D` along mass-preserving dilations of a bump.
    Vanish,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::RefusedRegime { .. }
            | Error::Stalled { .. }
            | Error::DegenerateField(_)
            | Error::NotOnManifold(_) => EXIT_SOLVER,
            _ => EXIT_INVALID,
        };
        let message = match &e {
            Error::RefusedRegime { label, .. } => format!(
                "{e}; regime {label}: only the trivial solution exists, nothing to minimize"
            ),
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status. Errors are reported on stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { EXIT_OK } else { EXIT_INVALID };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("choquard: {}", e.message);
            e.code
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::invalid("--config <path> is required"))?;
    let cfg = RunConfig::from_path(path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Solve => solve(&cfg, &out),
        Command::Classify => classify(&cfg),
        Command::Phase => phase(&cfg, &out),
        Command::Check => check(&cfg, &out),
        Command::Convolve => convolve(&cfg, &out),
        Command::Bltest => bltest(&cfg, &out),
        Command::Vanish => vanish(&cfg, &out),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Initial guess on `grid` as configured.
pub fn initial_field(cfg: &RunConfig, grid: Grid) -> Field {
    let h = grid.h();
    let center: Vec<f64> = match &cfg.init_shift {
        Some(s) => s.iter().map(|&k| k as f64 * h).collect(),
        None => vec![0.0; grid.dim()],
    };
    let base = Field::gaussian(grid, &center);
    match cfg.init.unwrap_or(InitKind::Gaussian) {
        InitKind::Gaussian => base,
        InitKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
            let data = base
                .data()
                .iter()
                .map(|&v| v * rng.random_range(0.5..1.5))
                .collect();
            Field::from_vec(grid, data).expect("finite initial field")
        }
    }
}

/// Fixed-key summary written by `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    #[serde(rename = "N")]
    pub dim: usize,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub regularization: Option<f64>,
    pub mp: f64,
    pub kinetic: f64,
    pub mass: f64,
    pub nonlocal: f64,
    pub energy: f64,
    pub pohozaev: f64,
    pub nehari: f64,
    pub residual: f64,
    pub gradient: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn diagnostics_for(
    res: &SolveResult,
    params: &Params,
    kernel: &KernelTable,
) -> CliResult<SolveDiagnostics> {
    let grid = *kernel.grid();
    let e = energy_breakdown(&res.u, params, kernel)?;
    let report = pohozaev_residual(&res.u, params, kernel)?;
    Ok(SolveDiagnostics {
        dim: grid.dim(),
        alpha: params.alpha,
        p: params.p,
        q: params.q,
        n: grid.n(),
        length: grid.length(),
        regularization: params.regularization,
        mp: res.mp,
        kinetic: e.kinetic,
        mass: e.mass,
        nonlocal: e.nonlocal,
        energy: e.energy,
        pohozaev: report.pohozaev_normalized,
        nehari: report.nehari_normalized,
        residual: equation_residual(&res.u, params, kernel)?,
        gradient: res.gradient,
        iterations: res.iterations,
        converged: res.converged,
    })
}

/// Shell averages of the recentered field in bins of width `h` around the
/// peak cell: rows `(mean distance, mean value)`.
pub fn radial_profile(u: &Field) -> crate::Result<Vec<(f64, f64)>> {
    let (centered, _) = recenter(u)?;
    let grid = *u.grid();
    let h = grid.h();
    let c = grid.coord(grid.center_index());
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    let mut x = vec![0.0; grid.dim()];
    for (i, &v) in centered.data().iter().enumerate() {
        grid.position(i, &mut x);
        let r = x.iter().map(|xk| (xk - c) * (xk - c)).sum::<f64>().sqrt();
        let bin = (r / h).floor() as usize;
        if bin >= sums.len() {
            sums.resize(bin + 1, (0.0, 0.0, 0));
        }
        let s = &mut sums[bin];
        s.0 += r;
        s.1 += v;
        s.2 += 1;
    }
    Ok(sums
        .into_iter()
        .filter(|s| s.2 > 0)
        .map(|(r, v, k)| (r / k as f64, v / k as f64))
        .collect())
}

fn solve(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let solver = cfg.solver();
    let kernel = KernelTable::new(&grid, params.alpha)?;
    let init = initial_field(cfg, grid);
    let res = minimize_mp(&init, &params, &kernel, &solver)?;
    let diag = diagnostics_for(&res, &params, &kernel)?;

    fs::create_dir_all(out)?;
    write_snapshot(&res.u, &params, &out.join("solution.bin"))?;
    let mut csv = String::from("r,u\n");
    for (r, v) in radial_profile(&res.u)? {
        writeln!(csv, "{r:.12e},{v:.12e}").unwrap();
    }
    write_file(out, "profile.csv", &csv)?;
    let json = serde_json::to_string_pretty(&diag).expect("plain struct serializes");
    write_file(out, "diagnostics.json", &(json + "\n"))?;

    println!(
        "mp = {:.10}  iterations = {}  converged = {}  pohozaev = {:.3e}  nehari = {:.3e}  residual = {:.3e}",
        diag.mp, diag.iterations, diag.converged, diag.pohozaev, diag.nehari, diag.residual
    );
    if !res.converged {
        return Err(CliError::solver(format!(
            "no convergence after {} iterations (relative gradient {:.3e}, tol {:.1e})",
            res.iterations, res.gradient, solver.tol
        )));
    }
    Ok(())
}

fn classify(cfg: &RunConfig) -> CliResult<()> {
    let c = classify_exponents(&cfg.params()?);
    println!("label: {}", c.label);
    println!("sum: {}", c.sum);
    println!("window: ({}, {})", c.lower, c.upper);
    println!("a1: {}", c.a1);
    println!("a2: {}", c.a2);
    Ok(())
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Worker count for `phase`: `CHOQUARD_THREADS` if set, else the machine's parallelism.
pub fn worker_threads() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(CliError::invalid(format!(
                "{THREADS_ENV}={v:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |k| k.get())),
    }
}

struct PhaseRow {
    p: f64,
    q: f64,
    sum: f64,
    label: PhaseLabel,
    a1: f64,
    a2: f64,
    mp: Option<f64>,
    status: String,
}

fn phase_point(
    cfg: &RunConfig,
    base: &Params,
    grid: Option<Grid>,
    solver: &SolveConfig,
    p: f64,
    q: f64,
) -> PhaseRow {
    let params = Params { p, q, ..*base };
    let c = classify_exponents(&params);
    let mut row = PhaseRow {
        p,
        q,
        sum: c.sum,
        label: c.label,
        a1: c.a1,
        a2: c.a2,
        mp: None,
        status: "skipped".into(),
    };
    let Some(grid) = grid else { return row };
    if c.label.is_nonexistence() {
        row.status = "refused".into();
        return row;
    }
    let outcome = KernelTable::new(&grid, params.alpha)
        .and_then(|kernel| minimize_mp(&initial_field(cfg, grid), &params, &kernel, solver));
    match outcome {
        Ok(res) => {
            row.mp = Some(res.mp);
            row.status = if res.converged {
                "converged"
            } else {
                "not_converged"
            }
            .into();
        }
        Err(Error::NonsmoothExponent(_)) => row.status = "nonsmooth".into(),
        Err(Error::Stalled { .. }) => row.status = "stalled".into(),
        Err(_) => row.status = "failed".into(),
    }
    row
}

fn phase(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let block = cfg
        .phase
        .as_ref()
        .ok_or_else(|| CliError::invalid("config field `phase`: required for this command"))?;
    let dim = cfg
        .dim
        .ok_or_else(|| CliError::invalid("config field `N`: required for this command"))?;
    let alpha = cfg
        .alpha
        .ok_or_else(|| CliError::invalid("config field `alpha`: required for this command"))?;
    let mut base = Params::new(dim, alpha, block.p_min, block.q_min)?;
    if let Some(eps) = cfg.epsilon_regularization {
        base = base.with_regularization(eps)?;
    }
    let grid = if block.solve { Some(cfg.grid()?) } else { None };
    let solver = cfg.solver();
    solver.validate()?;

    let points: Vec<(f64, f64)> = linspace(block.p_min, block.p_max, block.p_steps)
        .into_iter()
        .flat_map(|p| {
            linspace(block.q_min, block.q_max, block.q_steps)
                .into_iter()
                .map(move |q| (p, q))
        })
        .collect();
    let threads = worker_threads()?.min(points.len()).max(1);
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<PhaseRow>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(p, q)) = points.get(i) else { break };
                let row = phase_point(cfg, &base, grid, &solver, p, q);
                rows.lock()
                    .expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });

    let mut csv = String::from("p,q,sum,label,a1,a2,mp,status\n");
    for row in rows
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .flatten()
    {
        let mp = row.mp.map_or(String::new(), |m| format!("{m:.10}"));
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            row.p, row.q, row.sum, row.label, row.a1, row.a2, mp, row.status
        )
        .unwrap();
    }
    let path = write_file(out, "phase.csv", &csv)?;
    println!("{} points written to {}", points.len(), path.display());
    Ok(())
}

fn check(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let path = cfg
        .snapshot
        .as_deref()
        .ok_or_else(|| CliError::invalid("config field `snapshot`: required for this command"))?;
    let (u, mut params) = read_snapshot(path)?;
    cfg.check_matches(u.grid(), &params)?;
    if let Some(eps) = cfg.epsilon_regularization {
        params = params.with_regularization(eps)?;
    }
    let kernel = KernelTable::new(u.grid(), params.alpha)?;
    let report = pohozaev_residual(&u, &params, &kernel)?;
    let json = serde_json::to_string_pretty(&report).expect("plain struct serializes") + "\n";
    write_file(out, "identity.json", &json)?;
    print!("{json}");
    Ok(())
}

fn convolve(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let alpha = cfg
        .alpha
        .ok_or_else(|| CliError::invalid("config field `alpha`: required for this command"))?;
    let f = match &cfg.snapshot {
        Some(path) => {
            let (u, params) = read_snapshot(path)?;
            cfg.check_matches(u.grid(), &Params { alpha, ..params })?;
            u
        }
        None => initial_field(cfg, cfg.grid()?),
    };
    let grid = *f.grid();
    let kernel = KernelTable::new(&grid, alpha)?;
    let fast = riesz_convolve(&f, &kernel)?;
    let slow = if grid.len() <= ORACLE_MAX_POINTS {
        Some(direct_convolve_oracle(&f, &kernel)?)
    } else {
        None
    };

    let mut csv = String::new();
    for k in 0..grid.dim() {
        write!(csv, "x{k},").unwrap();
    }
    csv.push_str("f,conv,direct\n");
    let mut x = vec![0.0; grid.dim()];
    let mut worst = 0.0f64;
    let scale = fast.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..grid.len() {
        grid.position(i, &mut x);
        for xk in &x {
            write!(csv, "{xk},").unwrap();
        }
        write!(csv, "{:.15e},{:.15e},", f.data()[i], fast.data()[i]).unwrap();
        if let Some(slow) = &slow {
            write!(csv, "{:.15e}", slow.data()[i]).unwrap();
            worst = worst.max((fast.data()[i] - slow.data()[i]).abs() / scale);
        }
        csv.push('\n');
    }
    write_file(out, "convolve.csv", &csv)?;
    match slow {
        Some(_) => println!("max |fft - direct| / max |fft| = {worst:.3e}"),
        None => println!("grid has {} points, direct sum skipped", grid.len()),
    }
    Ok(())
}

fn bltest(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let block = cfg
        .bltest
        .as_ref()
        .ok_or_else(|| CliError::invalid("config field `bltest`: required for this command"))?;
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    for (name, c) in [
        ("bltest.w_center", &block.w_center),
        ("bltest.v_center", &block.v_center),
    ] {
        if c.len() != grid.dim() {
            return Err(CliError::invalid(format!(
                "config field `{name}`: needs {} components",
                grid.dim()
            )));
        }
    }
    let kernel = KernelTable::new(&grid, params.alpha)?;
    let bump = |center: &[f64]| {
        let b = Bump {
            center: center.to_vec(),
            radius: block.radius,
            power: block.power,
        };
        Field::from_fn(grid, |x| crate::diagnostics::Profile::eval(&b, x))
    };
    let w = bump(&block.w_center);
    let v = bump(&block.v_center);
    let defects = brezis_lieb_defect(&w, &v, &block.shifts, &params, &kernel)?;

    let mut csv = String::new();
    for k in 0..grid.dim() {
        write!(csv, "z{k},").unwrap();
    }
    csv.push_str("distance,defect\n");
    for (z, d) in block.shifts.iter().zip(&defects) {
        for zk in z {
            write!(csv, "{zk},").unwrap();
        }
        let dist = grid.h() * z.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
        writeln!(csv, "{dist},{d:.15e}").unwrap();
    }
    let path = write_file(out, "bltest.csv", &csv)?;
    println!("{} shifts written to {}", defects.len(), path.display());
    Ok(())
}

fn vanish(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let block = cfg
        .vanish
        .as_ref()
        .ok_or_else(|| CliError::invalid("config field `vanish`: required for this command"))?;
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let kernel = KernelTable::new(&grid, params.alpha)?;
    let profile = Bump::centered(grid.dim(), block.radius, block.power);
    let samples = vanishing_decay_test(&profile, &block.lambdas, &params, &kernel)?;

    let mut csv = String::from("lambda,d\n");
    for (l, d) in &samples {
        writeln!(csv, "{l},{d:.15e}").unwrap();
    }
    write_file(out, "vanish.csv", &csv)?;
    let predicted = vanishing_slope(&params);
    if samples.len() >= 2 {
        let (ls, ds): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        println!(
            "fitted slope = {:.6}  predicted = {predicted:.6}",
            loglog_slope(&ls, &ds)
        );
    } else {
        println!("predicted slope = {predicted:.6}");
    }
    Ok(())
}
