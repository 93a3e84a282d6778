//! Optimal charging time search.
//!
//! `τ` is the first charging peak: the earliest local maximum of `ΔE(t)`.
//! The coarse scan step never exceeds an eighth of the shortest period
//! present in `ΔE(t)` (set by the bandwidth of the populated modes), so no
//! oscillation is skipped. The located grid peak is refined by bisection on the analytic
//! derivative, falling back to golden-section search.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{entanglement_entropy, transported_energy, Propagator};
use crate::eigensolver::{decompose, EigenDecomposition};
use crate::error::{Error, Result};
use crate::subspace::{build_hamiltonian, BatteryConfig};

/// Horizon cap in units of `1/λ`.
pub const HORIZON_CAP: f64 = 1e4;
const MAX_DOUBLINGS: usize = 8;
const SCAN_BLOCK: usize = 512;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchPolicy {
    /// Search horizon; `None` picks `8π / gap_min`, capped at `10⁴/λ`.
    pub t_max: Option<f64>,
    /// Minimum number of grid points over the horizon.
    pub coarse_samples: usize,
    /// Relative tolerance on `τ`.
    pub refine_tol: f64,
}

impl Default for SearchPolicy {
    fn default() -> Self {
        SearchPolicy {
            t_max: None,
            coarse_samples: 4096,
            refine_tol: 1e-10,
        }
    }
}

impl SearchPolicy {
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = Some(t_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.t_max {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::domain("t_max must be finite and > 0"));
            }
        }
        if self.coarse_samples < 64 {
            return Err(Error::domain("coarse_samples must be ≥ 64"));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol <= 1e-4) {
            return Err(Error::domain("refine_tol must lie in (0, 1e-4]"));
        }
        Ok(())
    }
}

/// Charging figures of merit at the optimal time for one `(n_b, n_c)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingResult {
    pub n_b: usize,
    pub n_c: usize,
    pub tau: f64,
    pub delta_e_tau: f64,
    pub delta_e_per_cell: f64,
    pub entropy_tau: f64,
    pub entropy_per_cell: f64,
    /// `ΔE(τ)/τ`.
    pub power: f64,
    /// Horizon the peak was searched in.
    pub t_max: f64,
}

/// Default horizon: `8π / gap_min`, capped at `10⁴/|λ|`.
pub fn default_horizon(decomp: &EigenDecomposition, lambda: f64) -> f64 {
    let cap = HORIZON_CAP / lambda.abs();
    match decomp.min_nonzero_gap() {
        Some(gap) => (8.0 * PI / gap).min(cap),
        None => cap,
    }
}

pub fn find_optimal_tau(config: &BatteryConfig, search: &SearchPolicy) -> Result<ChargingResult> {
    config.validate()?;
    search.validate()?;
    let decomp = decompose(&build_hamiltonian(config)?)?;
    optimize_with(config, &decomp, search)
}

/// Same as [`find_optimal_tau`] with a precomputed decomposition.
pub fn optimize_with(
    config: &BatteryConfig,
    decomp: &EigenDecomposition,
    search: &SearchPolicy,
) -> Result<ChargingResult> {
    let prop = Propagator::new(decomp);
    let range = prop.bandwidth();
    if !(range > 0.0) {
        return Err(Error::Logic("flat spectrum: no energy is transported".into()));
    }
    let max_step = PI / (8.0 * range);

    let mut t_max = search.t_max.unwrap_or_else(|| default_horizon(decomp, config.lambda));
    let mut peak = None;
    for _ in 0..=MAX_DOUBLINGS {
        let step = (t_max / (search.coarse_samples - 1) as f64).min(max_step);
        match scan_first_peak(&prop, step, t_max)? {
            Some(p) => {
                peak = Some(p);
                break;
            }
            None => t_max *= 2.0,
        }
    }
    let peak = peak.ok_or_else(|| {
        Error::Numeric(format!("no charging peak found up to t = {t_max}"))
    })?;

    let (tau, _) = refine(&prop, &peak, t_max, search.refine_tol);
    let state = prop.populations(tau)?;
    let delta_e_tau = transported_energy(&state, config);
    let entropy_tau = entanglement_entropy(&state);
    let n_b = config.n_b as f64;
    Ok(ChargingResult {
        n_b: config.n_b,
        n_c: config.n_c,
        tau,
        delta_e_tau,
        delta_e_per_cell: delta_e_tau / n_b,
        entropy_tau,
        entropy_per_cell: entropy_tau / n_b,
        power: delta_e_tau / tau,
        t_max,
    })
}

/// Grid location of the first local maximum of the mean excitation.
#[derive(Debug, Clone, Copy)]
struct GridPeak {
    index: usize,
    step: f64,
    value: f64,
}

fn scan_first_peak(prop: &Propagator, step: f64, t_max: f64) -> Result<Option<GridPeak>> {
    let last = (t_max / step).floor() as usize;
    let mut prev: Option<f64> = None;
    let mut best = 0.0f64;
    let mut start = 0usize;
    while start <= last {
        let end = (start + SCAN_BLOCK).min(last + 1);
        let times: Vec<f64> = (start..end).map(|i| i as f64 * step).collect();
        let ys = prop.mean_excitation_batch(&times);
        for (off, &y) in ys.iter().enumerate() {
            let i = start + off;
            if let Some(p) = prev {
                // Ties resolve to the earliest point.
                if y < p && i >= 2 {
                    return Ok(Some(GridPeak {
                        index: i - 1,
                        step,
                        value: p,
                    }));
                }
            }
            best = best.max(y);
            prev = Some(y);
        }
        start = end;
    }
    if best <= f64::MIN_POSITIVE {
        return Err(Error::Logic("transported energy vanishes on the whole grid".into()));
    }
    Ok(None)
}

fn refine(prop: &Propagator, peak: &GridPeak, t_max: f64, tol: f64) -> (f64, f64) {
    let t_peak = peak.index as f64 * peak.step;
    let mut lo = (t_peak - peak.step).max(0.0);
    let mut hi = (t_peak + peak.step).min(t_max);

    let mut bracketed = false;
    for _ in 0..4 {
        let r_lo = prop.mean_excitation_rate(lo);
        let r_hi = prop.mean_excitation_rate(hi);
        if r_lo > 0.0 && r_hi < 0.0 {
            bracketed = true;
            break;
        }
        if r_lo <= 0.0 {
            lo = (lo - peak.step).max(0.0);
        }
        if r_hi >= 0.0 {
            hi = (hi + peak.step).min(t_max);
        }
    }

    let t = if bracketed {
        bisect_rate(prop, lo, hi, tol)
    } else {
        golden_section_max(|t| prop.mean_excitation(t), lo, hi, tol)
    };
    let refined = prop.mean_excitation(t);
    if refined >= peak.value {
        (t, refined)
    } else {
        (t_peak, peak.value)
    }
}

fn bisect_rate(prop: &Propagator, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if prop.mean_excitation_rate(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if b - a <= tol * (0.5 * (a + b)).abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}
