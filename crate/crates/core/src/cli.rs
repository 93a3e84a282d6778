//! Command-line front end: single points, time series, sweeps, figure
//! presets, and the oracle self-check.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 numeric failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic;
use crate::dynamics::{observable_series, Propagator};
use crate::eigensolver::decompose;
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::optimizer::{find_optimal_tau, optimize_with, SearchPolicy};
use crate::oracle::{closure_on, FullSystem};
use crate::subspace::{build_hamiltonian, BatteryConfig};
use crate::sweep::{run_sweep, Preset, SweepPoint, SweepRow, SweepSpec, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "csbattery", version, about = "Central-spin quantum battery charging simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal charging time and figures of merit for one (n_b, n_c) pair.
    Point(PointArgs),
    /// ΔE(t) and S_b(t) on a uniform time grid.
    Series(SeriesArgs),
    /// Sweep over (n_b, n_c) grids or a figure preset.
    Sweep(SweepArgs),
    /// Compare the subspace pipeline against brute force and closed forms.
    Selfcheck(SelfcheckArgs),
    /// Dense subspace Hamiltonian as CSV.
    Matrix(PhysicsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct PhysicsArgs {
    #[arg(long = "nb")]
    pub n_b: usize,
    #[arg(long = "nc")]
    pub n_c: usize,
    #[command(flatten)]
    pub couplings: Couplings,
}

#[derive(Debug, Clone, Args)]
pub struct Couplings {
    #[arg(long = "omega-b", default_value_t = 1.0)]
    pub omega_b: f64,
    #[arg(long = "omega-c", default_value_t = 1.0)]
    pub omega_c: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// Search horizon (default: derived from the spectrum).
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Minimum coarse grid size.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SeriesArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long, default_value_t = 10.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub preset: Option<String>,
    /// Comma-separated battery sizes.
    #[arg(long = "nb", value_delimiter = ',')]
    pub n_b: Vec<usize>,
    /// Inclusive battery size range `A:B`.
    #[arg(long = "nb-range")]
    pub nb_range: Option<String>,
    /// Comma-separated charger sizes.
    #[arg(long = "nc", value_delimiter = ',')]
    pub n_c: Vec<usize>,
    /// Inclusive charger size range `A:B`.
    #[arg(long = "nc-range")]
    pub nc_range: Option<String>,
    /// Comma-separated n_c/n_b ratios (ratio scan).
    #[arg(long, value_delimiter = ',')]
    pub ratios: Vec<f64>,
    /// Resonant sweep with n_c = n_b.
    #[arg(long)]
    pub diagonal: bool,
    /// Largest size for the fig2, fig3 and fig5 presets.
    #[arg(long = "max-n")]
    pub max_n: Option<usize>,
    #[command(flatten)]
    pub couplings: Couplings,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Exit with code 3 if any point fails.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SelfcheckArgs {
    /// Largest n_b + n_c compared against brute force.
    #[arg(long = "max-n", default_value_t = 10)]
    pub max_n: usize,
    /// Ising coupling used for the oracle comparisons.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta: f64,
    /// Perturb the subspace Hamiltonian so the comparison must fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_domain() {
                EXIT_USAGE
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Point(a) => cmd_point(&a),
        Command::Series(a) => cmd_series(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Selfcheck(a) => cmd_selfcheck(&a),
        Command::Matrix(a) => {
            let h = build_hamiltonian(&a.config()?)?;
            h.write_dense_csv(io::stdout().lock()).map_err(io_err)?;
            Ok(EXIT_OK)
        }
    }
}

fn io_err(e: io::Error) -> Error {
    Error::Numeric(format!("i/o: {e}"))
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Error::domain(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

impl Couplings {
    fn apply(&self, mut cfg: BatteryConfig) -> BatteryConfig {
        cfg.omega_b = self.omega_b;
        cfg.omega_c = self.omega_c;
        cfg.lambda = self.lambda;
        cfg.delta = self.delta;
        cfg
    }
}

impl PhysicsArgs {
    fn config(&self) -> Result<BatteryConfig> {
        let cfg = self.couplings.apply(BatteryConfig {
            n_b: self.n_b,
            n_c: self.n_c,
            ..BatteryConfig::new(1, 1)?
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn policy(tmax: Option<f64>, samples: usize) -> SearchPolicy {
    SearchPolicy {
        t_max: tmax,
        coarse_samples: samples,
        ..SearchPolicy::default()
    }
}

pub fn cmd_point(a: &PointArgs) -> Result<i32> {
    let cfg = a.physics.config()?;
    let search = policy(a.tmax, a.samples);
    search.validate()?;
    let result = find_optimal_tau(&cfg, &search)?;
    let mut out = open_output(&a.out.output)?;
    match a.out.format {
        Format::Csv => {
            let row = SweepRow {
                point: SweepPoint {
                    n_b: cfg.n_b,
                    n_c: Some(cfg.n_c),
                    requested_ratio: None,
                },
                result: Some(result),
                status: "ok".into(),
            };
            writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
            writeln!(out, "{}", row.csv_line()).map_err(io_err)?;
        }
        Format::Json => {
            let v = serde_json::json!({ "config": cfg, "search": search, "result": result });
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json")).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)?;
    Ok(EXIT_OK)
}

pub fn cmd_series(a: &SeriesArgs) -> Result<i32> {
    if a.samples < 2 {
        return Err(Error::domain("samples must be ≥ 2"));
    }
    let cfg = a.physics.config()?;
    let series = observable_series(&cfg, a.tmax, a.samples)?;
    let mut out = open_output(&a.output)?;
    series.write_csv(&mut out).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    Ok(EXIT_OK)
}

/// Parses an inclusive `A:B` range.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::domain(format!("range '{s}' must look like A:B")))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|_| Error::domain(format!("invalid range bound '{x}'")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(Error::domain(format!("empty range '{s}'")));
    }
    Ok((a..=b).collect())
}

fn axis(list: &[usize], range: &Option<String>) -> Result<Vec<usize>> {
    let mut v = list.to_vec();
    if let Some(r) = range {
        v.extend(parse_range(r)?);
    }
    Ok(v)
}

pub fn sweep_spec(a: &SweepArgs) -> Result<SweepSpec> {
    let mut spec = if let Some(name) = &a.preset {
        Preset::parse(name)?.spec(a.max_n)
    } else {
        let n_b = axis(&a.n_b, &a.nb_range)?;
        if a.diagonal {
            SweepSpec::diagonal(n_b)
        } else if !a.ratios.is_empty() {
            SweepSpec::ratio_scan(n_b, a.ratios.clone())
        } else {
            SweepSpec::grid(n_b, axis(&a.n_c, &a.nc_range)?)
        }
    };
    spec.omega_b = a.couplings.omega_b;
    spec.omega_c = a.couplings.omega_c;
    spec.lambda = a.couplings.lambda;
    spec.delta = a.couplings.delta;
    spec.search = policy(a.tmax, a.samples);
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let spec = sweep_spec(a)?;
    let workers = match a.workers {
        Some(0) => return Err(Error::domain("workers must be ≥ 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let result = run_sweep(&spec, workers)?;
    let mut out = open_output(&a.out.output)?;
    match a.out.format {
        Format::Csv => result.write_csv(&mut out).map_err(io_err)?,
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&result.to_json()).expect("json")
        )
        .map_err(io_err)?,
    }
    out.flush().map_err(io_err)?;
    let failed = result.failures();
    if failed > 0 {
        eprintln!("{failed} point(s) failed");
        if a.strict {
            return Ok(EXIT_NUMERIC);
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelfcheckReport {
    pub oracle_cases: usize,
    pub max_population_deviation: f64,
    pub max_leakage: f64,
    pub max_offdiagonal: f64,
    pub analytic_cases: usize,
    pub max_analytic_deviation: f64,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.max_population_deviation <= 1e-10
            && self.max_leakage < 1e-12
            && self.max_offdiagonal < 1e-12
            && self.max_analytic_deviation <= 1e-8
    }
}

/// Deterministic sample times spread over `[0, 20/|λ|]`.
pub fn probe_times(count: usize, lambda: f64) -> Vec<f64> {
    const FRAC: f64 = 0.618_033_988_749_894_9;
    (1..=count)
        .map(|j| 20.0 / lambda.abs() * (j as f64 * FRAC).fract())
        .collect()
}

pub fn selfcheck(max_sum: usize, delta: f64, inject_fault: bool) -> Result<SelfcheckReport> {
    let mut rep = SelfcheckReport::default();
    for total in 2..=max_sum {
        for n_b in 1..total {
            let cfg = BatteryConfig::new(n_b, total - n_b)?.with_delta(delta);
            let mut h = build_hamiltonian(&cfg)?;
            if inject_fault {
                h.diag.iter_mut().enumerate().for_each(|(j, b)| *b += 1e-3 * j as f64);
            }
            let prop = Propagator::new(&decompose(&h)?);
            let full = FullSystem::new(&cfg)?;
            let times = probe_times(20, cfg.lambda);
            for &t in &times {
                let a = prop.raw_populations(t);
                let b = full.populations(t)?;
                for (x, y) in a.iter().zip(&b.probs) {
                    rep.max_population_deviation = rep.max_population_deviation.max((x - y).abs());
                }
            }
            let closure = closure_on(&full, &times[..4]);
            rep.max_leakage = rep.max_leakage.max(closure.max_leakage);
            rep.max_offdiagonal = rep.max_offdiagonal.max(closure.max_offdiagonal);
            rep.oracle_cases += 1;
        }
    }

    let search = SearchPolicy::default();
    let mut compare = |cfg: BatteryConfig, exact: analytic::ClosedFormResult| -> Result<()> {
        let decomp = decompose(&build_hamiltonian(&cfg)?)?;
        let r = optimize_with(&cfg, &decomp, &search)?;
        let dev = (r.tau - exact.tau)
            .abs()
            .max((r.delta_e_tau - exact.delta_e_tau).abs())
            .max((r.entropy_tau - exact.entropy_tau).abs());
        rep.max_analytic_deviation = rep.max_analytic_deviation.max(dev);
        rep.analytic_cases += 1;
        Ok(())
    };
    for n_c in [1, 4, 9, 100] {
        compare(BatteryConfig::new(1, n_c)?, analytic::single_battery(n_c, 1.0, 1.0)?)?;
    }
    for n in 2..=30 {
        compare(BatteryConfig::new(2, n)?, analytic::two_battery(n, 1.0, 1.0)?)?;
        compare(BatteryConfig::new(n, 2)?, analytic::two_charger(n, 1.0, 1.0)?)?;
    }
    Ok(rep)
}

pub fn cmd_selfcheck(a: &SelfcheckArgs) -> Result<i32> {
    if a.max_n > crate::oracle::MAX_SPINS {
        return Err(Error::domain(format!(
            "--max-n must be ≤ {}",
            crate::oracle::MAX_SPINS
        )));
    }
    let rep = selfcheck(a.max_n, a.delta, a.inject_fault)?;
    println!(
        "oracle: {} configs (n_b + n_c ≤ {}, delta = {}), max population deviation {}, max leakage {}, max off-diagonal {}",
        rep.oracle_cases,
        a.max_n,
        a.delta,
        sig12(rep.max_population_deviation),
        sig12(rep.max_leakage),
        sig12(rep.max_offdiagonal)
    );
    println!(
        "closed forms: {} cases, max deviation {}",
        rep.analytic_cases,
        sig12(rep.max_analytic_deviation)
    );
    if rep.passed() {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        println!("FAIL");
        Ok(EXIT_NUMERIC)
    }
}
