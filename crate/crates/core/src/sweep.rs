//! Parameter sweeps over `(n_b, n_c)` grids.
//!
//! Points are distributed round-robin over a fixed number of worker threads
//! and reassembled in request order, so output never depends on the worker
//! count.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::optimizer::{find_optimal_tau, ChargingResult, SearchPolicy};
use crate::subspace::BatteryConfig;

/// Upper bound on `n` for diagonal sweeps.
pub const DIAGONAL_CAP: usize = 2000;

pub const CSV_HEADER: &str = "n_b,n_c,ratio,abs_diff,tau,delta_e_tau,delta_e_per_cell,entropy_tau,entropy_per_cell,power,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    /// Cartesian product of the `n_b` and `n_c` lists.
    Grid,
    /// `n_c = ratio * n_b` for every ratio.
    RatioScan,
    /// `n_c = n_b`.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChargerAxis {
    Values(Vec<usize>),
    Ratios(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub n_b_values: Vec<usize>,
    pub n_c: ChargerAxis,
    pub omega_b: f64,
    pub omega_c: f64,
    pub lambda: f64,
    pub delta: f64,
    pub search: SearchPolicy,
}

impl SweepSpec {
    fn with_mode(mode: SweepMode, n_b_values: Vec<usize>, n_c: ChargerAxis) -> Self {
        SweepSpec {
            mode,
            n_b_values,
            n_c,
            omega_b: 1.0,
            omega_c: 1.0,
            lambda: 1.0,
            delta: 0.0,
            search: SearchPolicy::default(),
        }
    }

    pub fn grid(n_b_values: Vec<usize>, n_c_values: Vec<usize>) -> Self {
        Self::with_mode(SweepMode::Grid, n_b_values, ChargerAxis::Values(n_c_values))
    }

    pub fn ratio_scan(n_b_values: Vec<usize>, ratios: Vec<f64>) -> Self {
        Self::with_mode(SweepMode::RatioScan, n_b_values, ChargerAxis::Ratios(ratios))
    }

    pub fn diagonal(n_values: Vec<usize>) -> Self {
        Self::with_mode(SweepMode::Diagonal, n_values, ChargerAxis::Values(Vec::new()))
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega_b = omega;
        self.omega_c = omega;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b_values.is_empty() {
            return Err(Error::domain("n_b list must not be empty"));
        }
        match (&self.mode, &self.n_c) {
            (SweepMode::Grid, ChargerAxis::Values(v)) if v.is_empty() => {
                Err(Error::domain("n_c list must not be empty"))
            }
            (SweepMode::Grid, ChargerAxis::Ratios(_)) => {
                Err(Error::domain("grid sweeps need explicit n_c values"))
            }
            (SweepMode::RatioScan, ChargerAxis::Ratios(r)) if r.is_empty() => {
                Err(Error::domain("ratio list must not be empty"))
            }
            (SweepMode::RatioScan, ChargerAxis::Values(_)) => {
                Err(Error::domain("ratio scans need a ratio grid"))
            }
            (SweepMode::Diagonal, _) if self.n_b_values.iter().any(|&n| n > DIAGONAL_CAP) => {
                Err(Error::domain(format!("diagonal sweeps are capped at n = {DIAGONAL_CAP}")))
            }
            _ => self.search.validate(),
        }
    }

    /// Requested points in output order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &n_b in &self.n_b_values {
            match (&self.mode, &self.n_c) {
                (SweepMode::Diagonal, _) => out.push(SweepPoint {
                    n_b,
                    n_c: Some(n_b),
                    requested_ratio: None,
                }),
                (SweepMode::Grid, ChargerAxis::Values(v)) => {
                    out.extend(v.iter().map(|&n_c| SweepPoint {
                        n_b,
                        n_c: Some(n_c),
                        requested_ratio: None,
                    }))
                }
                (SweepMode::RatioScan, ChargerAxis::Ratios(r)) => {
                    out.extend(r.iter().map(|&ratio| SweepPoint {
                        n_b,
                        n_c: charger_count(n_b, ratio),
                        requested_ratio: Some(ratio),
                    }))
                }
                _ => {}
            }
        }
        out
    }

    fn config(&self, n_b: usize, n_c: usize) -> Result<BatteryConfig> {
        let cfg = BatteryConfig {
            n_b,
            n_c,
            omega_b: self.omega_b,
            omega_c: self.omega_c,
            lambda: self.lambda,
            delta: self.delta,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn charger_count(n_b: usize, ratio: f64) -> Option<usize> {
    let x = ratio * n_b as f64;
    let r = x.round();
    ((x - r).abs() <= 1e-9 * x.abs().max(1.0) && r >= 0.0).then_some(r as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_b: usize,
    /// `None` when a ratio does not give an integer charger count.
    pub n_c: Option<usize>,
    pub requested_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub result: Option<ChargingResult>,
    /// `"ok"` or the failure message.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.result.is_some()
    }

    pub fn ratio(&self) -> f64 {
        match self.point.n_c {
            Some(n_c) => n_c as f64 / self.point.n_b as f64,
            None => self.point.requested_ratio.unwrap_or(f64::NAN),
        }
    }

    pub fn abs_diff(&self) -> Option<usize> {
        self.point.n_c.map(|n_c| n_c.abs_diff(self.point.n_b))
    }

    pub(crate) fn csv_line(&self) -> String {
        let num = |v: Option<f64>| v.map(sig12).unwrap_or_else(|| "nan".into());
        let r = self.result.as_ref();
        [
            self.point.n_b.to_string(),
            self.point.n_c.map(|n| n.to_string()).unwrap_or_else(|| "nan".into()),
            sig12(self.ratio()),
            self.abs_diff().map(|n| n.to_string()).unwrap_or_else(|| "nan".into()),
            num(r.map(|r| r.tau)),
            num(r.map(|r| r.delta_e_tau)),
            num(r.map(|r| r.delta_e_per_cell)),
            num(r.map(|r| r.entropy_tau)),
            num(r.map(|r| r.entropy_per_cell)),
            num(r.map(|r| r.power)),
            self.status.replace([',', '\n'], ";"),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub spec: SweepSpec,
    pub created_unix: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub rows: Vec<SweepRow>,
}

/// Flat JSON row mirroring the CSV columns.
#[derive(Serialize)]
struct JsonRow {
    n_b: usize,
    n_c: Option<usize>,
    ratio: f64,
    abs_diff: Option<usize>,
    tau: Option<f64>,
    delta_e_tau: Option<f64>,
    delta_e_per_cell: Option<f64>,
    entropy_tau: Option<f64>,
    entropy_per_cell: Option<f64>,
    power: Option<f64>,
    t_max: Option<f64>,
    status: String,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(out, "{}", row.csv_line())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<JsonRow> = self
            .rows
            .iter()
            .map(|row| {
                let r = row.result.as_ref();
                JsonRow {
                    n_b: row.point.n_b,
                    n_c: row.point.n_c,
                    ratio: row.ratio(),
                    abs_diff: row.abs_diff(),
                    tau: r.map(|r| r.tau),
                    delta_e_tau: r.map(|r| r.delta_e_tau),
                    delta_e_per_cell: r.map(|r| r.delta_e_per_cell),
                    entropy_tau: r.map(|r| r.entropy_tau),
                    entropy_per_cell: r.map(|r| r.entropy_per_cell),
                    power: r.map(|r| r.power),
                    t_max: r.map(|r| r.t_max),
                    status: row.status.clone(),
                }
            })
            .collect();
        serde_json::json!({ "metadata": self.metadata, "rows": rows })
    }
}

fn run_point(spec: &SweepSpec, point: SweepPoint) -> SweepRow {
    let outcome = match point.n_c {
        None => Err(Error::domain(format!(
            "ratio {} gives a non-integer n_c for n_b = {}",
            point.requested_ratio.unwrap_or(f64::NAN),
            point.n_b
        ))),
        Some(n_c) => spec
            .config(point.n_b, n_c)
            .and_then(|cfg| find_optimal_tau(&cfg, &spec.search)),
    };
    match outcome {
        Ok(r) => SweepRow {
            point,
            result: Some(r),
            status: "ok".into(),
        },
        Err(e) => SweepRow {
            point,
            result: None,
            status: e.to_string(),
        },
    }
}

/// Runs every point of `spec` on `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    if workers < 1 {
        return Err(Error::domain("workers must be ≥ 1"));
    }
    spec.validate()?;
    let points = spec.points();
    let workers = workers.min(points.len().max(1));

    let mut slots: Vec<Option<SweepRow>> = vec![None; points.len()];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let points = &points;
                scope.spawn(move || {
                    (w..points.len())
                        .step_by(workers)
                        .map(|i| (i, run_point(spec, points[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, row) in h.join().expect("sweep worker panicked") {
                slots[i] = Some(row);
            }
        }
    });

    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(SweepResult {
        metadata: SweepMetadata {
            spec: spec.clone(),
            created_unix,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        rows: slots.into_iter().map(|r| r.expect("every point processed")).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioDeviation {
    pub ratio: f64,
    /// Largest pairwise difference of `ΔE(τ)/n_b` across the `n_b` families.
    pub max_deviation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub n_b_values: Vec<usize>,
    pub threshold: f64,
    pub points: Vec<RatioDeviation>,
    pub max_deviation: f64,
}

impl UniformityReport {
    pub fn flagged(&self) -> impl Iterator<Item = &RatioDeviation> {
        self.points.iter().filter(|p| p.flagged)
    }
}

pub const DEFAULT_UNIFORMITY_THRESHOLD: f64 = 0.01;

/// Spread of the per-cell transported energy across `n_b` families of a
/// ratio scan, ratio by ratio.
pub fn uniformity_report(results: &SweepResult, threshold: f64) -> Result<UniformityReport> {
    if results.metadata.spec.mode != SweepMode::RatioScan {
        return Err(Error::domain("uniformity needs a ratio scan"));
    }
    // n_b -> (ratio bits -> per-cell energy)
    let mut families: BTreeMap<usize, BTreeMap<u64, f64>> = BTreeMap::new();
    for row in &results.rows {
        let ratio = row
            .point
            .requested_ratio
            .ok_or_else(|| Error::domain("row without a requested ratio"))?;
        let family = families.entry(row.point.n_b).or_default();
        if let Some(r) = &row.result {
            family.insert(ratio.to_bits(), r.delta_e_per_cell);
        }
    }
    let mut iter = families.values();
    let first = iter.next().ok_or_else(|| Error::domain("empty sweep"))?;
    let grid: Vec<u64> = first.keys().copied().collect();
    if iter.any(|f| !f.keys().copied().eq(grid.iter().copied())) {
        return Err(Error::domain("ratio grids differ between n_b families"));
    }

    let points: Vec<RatioDeviation> = grid
        .iter()
        .map(|key| {
            let vals = families.values().map(|f| f[key]);
            let hi = vals.clone().fold(f64::MIN, f64::max);
            let lo = vals.fold(f64::MAX, f64::min);
            let dev = hi - lo;
            RatioDeviation {
                ratio: f64::from_bits(*key),
                max_deviation: dev,
                flagged: dev > threshold,
            }
        })
        .collect();
    let max_deviation = points.iter().map(|p| p.max_deviation).fold(0.0, f64::max);
    Ok(UniformityReport {
        n_b_values: families.keys().copied().collect(),
        threshold,
        points,
        max_deviation,
    })
}

/// Parameter grids of the published figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two battery spins, `n_c = 2..=50`.
    Fig2,
    /// Two charger spins, `n_b = 2..=50`.
    Fig3,
    /// `n_b ∈ {100, 150, 200}`, `n_c = 1..=600`.
    Fig4a,
    /// Ratio scan `n_c/n_b ∈ {0.1, …, 3.0}` for `n_b ∈ {100, 150, 200}`.
    Fig4b,
    /// Same ratio grid for `n_b ∈ {200, 500, 1000}`.
    Fig4c,
    /// Resonant diagonal `n_b = n_c = 2..=max_n`.
    Fig5,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "fig2" => Preset::Fig2,
            "fig3" => Preset::Fig3,
            "fig4a" => Preset::Fig4a,
            "fig4b" => Preset::Fig4b,
            "fig4c" => Preset::Fig4c,
            "fig5" => Preset::Fig5,
            other => return Err(Error::domain(format!("unknown preset '{other}'"))),
        })
    }

    pub fn spec(self, max_n: Option<usize>) -> SweepSpec {
        let tenths = || (1..=30).map(|k| k as f64 / 10.0).collect::<Vec<_>>();
        match self {
            Preset::Fig2 => SweepSpec::grid(vec![2], (2..=max_n.unwrap_or(50)).collect()),
            Preset::Fig3 => SweepSpec::grid((2..=max_n.unwrap_or(50)).collect(), vec![2]),
            Preset::Fig4a => SweepSpec::grid(vec![100, 150, 200], (1..=600).collect()),
            Preset::Fig4b => SweepSpec::ratio_scan(vec![100, 150, 200], tenths()),
            Preset::Fig4c => SweepSpec::ratio_scan(vec![200, 500, 1000], tenths()),
            Preset::Fig5 => SweepSpec::diagonal((2..=max_n.unwrap_or(200)).collect()),
        }
    }
}
