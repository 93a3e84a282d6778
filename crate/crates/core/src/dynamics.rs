//! Time evolution inside the invariant subspace and the two battery
//! observables derived from it.
//!
//! The initial state is the first basis vector, so the amplitude of basis
//! state `k` is
//!
//! ```text
//! ψ_k(t) = Σ_m V[k][m] V[0][m] exp(-i e_m t)
//! ```
//!
//! and the reduced battery state is diagonal in the Dicke basis with weights
//! `|ψ_k(t)|²`.

use std::io::Write;

use ndarray::{Array1, Array2, Axis};

use crate::eigensolver::{decompose, EigenDecomposition};
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::subspace::{build_hamiltonian, BatteryConfig};

/// Negative populations down to this value are rounding noise and are clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-14;

/// Hard guard on `|Σ probs - 1|` at construction; tests hold much tighter.
const NORMALIZATION_GUARD: f64 = 1e-6;

/// Dicke-level populations of the battery at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub t: f64,
    pub probs: Vec<f64>,
}

impl PopulationState {
    pub fn new(t: f64, mut probs: Vec<f64>) -> Result<Self> {
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(Error::Numeric(format!("non-finite population at t = {t}")));
            }
            if *p < 0.0 {
                if *p < -NEGATIVE_CLAMP {
                    return Err(Error::Numeric(format!(
                        "population {p:e} below zero at t = {t}"
                    )));
                }
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_GUARD {
            return Err(Error::Numeric(format!(
                "populations sum to {total} at t = {t}"
            )));
        }
        Ok(PopulationState { t, probs })
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mean number of excited battery spins.
    pub fn mean_excitation(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

/// Sampled `ΔE(t)` and `S_b(t)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub delta_e: Vec<f64>,
    /// Battery–charger entanglement in bits.
    pub entropy: Vec<f64>,
}

impl ObservableSeries {
    /// `ΔE(t)/t`, zero at `t = 0`.
    pub fn power(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.delta_e)
            .map(|(&t, &e)| if t > 0.0 { e / t } else { 0.0 })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t,delta_e,entropy,power`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,delta_e,entropy,power")?;
        for (i, p) in self.power().into_iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                sig12(self.times[i]),
                sig12(self.delta_e[i]),
                sig12(self.entropy[i]),
                sig12(p)
            )?;
        }
        Ok(())
    }
}

/// Eigenmodes whose overlap with the initial state is below this fraction
/// of the largest overlap are dropped; they sit at the rounding-noise floor
/// of the eigenvectors.
pub const MODE_CUTOFF: f64 = 1e-15;

/// Precomputed propagation data for the fixed initial state.
///
/// Only modes that overlap the initial state are kept. Their energies are
/// shifted to be centred on zero, which changes a global phase only and
/// keeps the phase arguments small.
#[derive(Debug, Clone)]
pub struct Propagator {
    energies: Array1<f64>,
    /// `weights[[k, i]] = V[k][m_i] V[0][m_i]` over the kept modes `m_i`.
    weights: Array2<f64>,
}

const BATCH: usize = 256;

impl Propagator {
    pub fn new(decomp: &EigenDecomposition) -> Self {
        let v = &decomp.eigenvectors;
        let first = v.row(0);
        let largest = first.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let kept: Vec<usize> = (0..decomp.dim())
            .filter(|&m| first[m].abs() > MODE_CUTOFF * largest)
            .collect();
        let ev: Vec<f64> = kept.iter().map(|&m| decomp.eigenvalues[m]).collect();
        let mid = match (ev.first(), ev.last()) {
            (Some(lo), Some(hi)) => 0.5 * (lo + hi),
            _ => 0.0,
        };
        let energies = Array1::from_iter(ev.iter().map(|e| e - mid));
        let weights = Array2::from_shape_fn((decomp.dim(), kept.len()), |(k, i)| {
            v[[k, kept[i]]] * first[kept[i]]
        });
        Propagator { energies, weights }
    }

    /// Spread of the energies that take part in the dynamics. `ΔE(t)` holds
    /// no frequency above it.
    pub fn bandwidth(&self) -> f64 {
        let lo = self.energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    pub fn modes(&self) -> usize {
        self.energies.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Real and imaginary parts of the subspace amplitudes at `t`.
    pub fn amplitudes(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let cos = self.energies.mapv(|e| (e * t).cos());
        let sin = self.energies.mapv(|e| (e * t).sin());
        let re = self.weights.dot(&cos);
        let im = self.weights.dot(&sin).mapv(|x| -x);
        (re.to_vec(), im.to_vec())
    }

    pub fn raw_populations(&self, t: f64) -> Vec<f64> {
        let (re, im) = self.amplitudes(t);
        re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect()
    }

    pub fn populations(&self, t: f64) -> Result<PopulationState> {
        PopulationState::new(t, self.raw_populations(t))
    }

    /// Mean battery excitation `Σ k |ψ_k(t)|²`.
    pub fn mean_excitation(&self, t: f64) -> f64 {
        self.raw_populations(t)
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// Time derivative of [`Propagator::mean_excitation`].
    pub fn mean_excitation_rate(&self, t: f64) -> f64 {
        let cos = self.energies.mapv(|e| (e * t).cos());
        let sin = self.energies.mapv(|e| (e * t).sin());
        // ψ = W (cos - i sin),  dψ/dt = W diag(e) (-sin - i cos)
        let re = self.weights.dot(&cos);
        let im = self.weights.dot(&sin).mapv(|x| -x);
        let dre = self.weights.dot(&(&sin * &self.energies)).mapv(|x| -x);
        let dim = self.weights.dot(&(&cos * &self.energies)).mapv(|x| -x);
        (0..self.dim())
            .map(|k| 2.0 * k as f64 * (re[k] * dre[k] + im[k] * dim[k]))
            .sum()
    }

    /// Populations for many times at once, shape `(dim, times.len())`.
    pub fn population_batch(&self, times: &[f64]) -> Array2<f64> {
        let n = self.dim();
        let mut out = Array2::zeros((n, times.len()));
        for (chunk_idx, chunk) in times.chunks(BATCH).enumerate() {
            let phase = Array2::from_shape_fn((self.modes(), chunk.len()), |(m, j)| self.energies[m] * chunk[j]);
            let re = self.weights.dot(&phase.mapv(f64::cos));
            let im = self.weights.dot(&phase.mapv(f64::sin));
            let probs = &re * &re + &im * &im;
            let start = chunk_idx * BATCH;
            out.slice_mut(ndarray::s![.., start..start + chunk.len()])
                .assign(&probs);
        }
        out
    }

    /// Mean excitation for many times at once.
    pub fn mean_excitation_batch(&self, times: &[f64]) -> Vec<f64> {
        let levels = Array1::from_iter((0..self.dim()).map(|k| k as f64));
        let probs = self.population_batch(times);
        levels.dot(&probs).to_vec()
    }
}

/// Dicke populations at time `t` starting from `|0>_b |n_c>_c`.
pub fn populations_at(decomp: &EigenDecomposition, t: f64) -> Result<PopulationState> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain("t must be finite and ≥ 0"));
    }
    Propagator::new(decomp).populations(t)
}

/// `ΔE = Tr(H_b ρ_b(t)) - Tr(H_b ρ_b(0)) = ω_b Σ k p_k`.
pub fn transported_energy(p: &PopulationState, config: &BatteryConfig) -> f64 {
    config.omega_b * p.mean_excitation()
}

/// Von Neumann entropy (bits) of the diagonal reduced battery state.
pub fn entanglement_entropy(p: &PopulationState) -> f64 {
    shannon_bits(&p.probs)
}

/// `-Σ p log₂ p` with `0 log 0 = 0`.
pub fn shannon_bits(probs: &[f64]) -> f64 {
    let s: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    s.max(0.0)
}

/// `⟨H_b + H_c⟩` at the populations `p`. Constant in time when `ω_b = ω_c`.
pub fn bare_energy(p: &PopulationState, config: &BatteryConfig) -> f64 {
    let n_b = config.n_b as f64;
    let n_c = config.n_c as f64;
    let n = config.n_c as f64;
    p.probs
        .iter()
        .enumerate()
        .map(|(k, prob)| {
            let k = k as f64;
            prob * (config.omega_b * (k - n_b / 2.0) + config.omega_c * (n - k - n_c / 2.0))
        })
        .sum()
}

/// `ΔE(t)` and `S_b(t)` on `samples` uniformly spaced times in `[0, t_max]`,
/// sharing one eigendecomposition.
pub fn observable_series(
    config: &BatteryConfig,
    t_max: f64,
    samples: usize,
) -> Result<ObservableSeries> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::domain("t_max must be finite and > 0"));
    }
    if samples < 2 {
        return Err(Error::domain("samples must be ≥ 2"));
    }
    let h = build_hamiltonian(config)?;
    let decomp = decompose(&h)?;
    let prop = Propagator::new(&decomp);

    let step = t_max / (samples - 1) as f64;
    let mut times: Vec<f64> = (0..samples).map(|i| i as f64 * step).collect();
    times[samples - 1] = t_max;

    let probs = prop.population_batch(&times);
    let mut delta_e = Vec::with_capacity(samples);
    let mut entropy = Vec::with_capacity(samples);
    for (j, col) in probs.axis_iter(Axis(1)).enumerate() {
        let p = PopulationState::new(times[j], col.to_vec())?;
        delta_e.push(transported_energy(&p, config));
        entropy.push(entanglement_entropy(&p));
    }
    Ok(ObservableSeries {
        times,
        delta_e,
        entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn decomp(n_b: usize, n_c: usize) -> (BatteryConfig, EigenDecomposition) {
        let cfg = BatteryConfig::new(n_b, n_c).unwrap();
        let d = decompose(&build_hamiltonian(&cfg).unwrap()).unwrap();
        (cfg, d)
    }

    #[test]
    fn single_pair_half_period() {
        let (_, d) = decomp(1, 1);
        let p = populations_at(&d, PI / 2.0).unwrap();
        assert!(p.probs[0].abs() < 1e-14);
        assert!((p.probs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_at_zero() {
        for (a, b) in [(1, 1), (3, 8), (12, 5)] {
            let (_, d) = decomp(a, b);
            let p = populations_at(&d, 0.0).unwrap();
            assert!((p.probs[0] - 1.0).abs() < 1e-13);
            assert!(p.probs[1..].iter().all(|x| x.abs() < 1e-13));
        }
    }

    #[test]
    fn full_transfer_two_by_two() {
        let (cfg, d) = decomp(2, 2);
        let p = populations_at(&d, PI / 8f64.sqrt()).unwrap();
        assert!(p.probs[0].abs() < 1e-13 && p.probs[1].abs() < 1e-13);
        assert!((p.probs[2] - 1.0).abs() < 1e-13);
        assert!((transported_energy(&p, &cfg) - 2.0).abs() < 1e-12);
        assert!(entanglement_entropy(&p).abs() < 1e-11);
    }

    #[test]
    fn two_battery_three_charger_at_tau() {
        let (cfg, d) = decomp(2, 3);
        let p = populations_at(&d, PI / 14f64.sqrt()).unwrap();
        assert!((transported_energy(&p, &cfg) - 96.0 / 49.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_two_battery_four_charger() {
        let (_, d) = decomp(2, 4);
        let p = populations_at(&d, PI / 20f64.sqrt()).unwrap();
        let x: f64 = 0.04;
        let h = -x * x.log2() - (1.0 - x) * (1.0 - x).log2();
        assert!((entanglement_entropy(&p) - h).abs() < 1e-12);
        assert!((h - 0.242292189082).abs() < 1e-11);
    }

    #[test]
    fn ground_state_observables() {
        let cfg = BatteryConfig::new(3, 3).unwrap();
        let p = PopulationState::new(0.0, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(transported_energy(&p, &cfg), 0.0);
        assert_eq!(entanglement_entropy(&p), 0.0);
    }

    #[test]
    fn clamps_small_negative_rejects_large() {
        let p = PopulationState::new(0.0, vec![1.0, -1e-15]).unwrap();
        assert_eq!(p.probs[1], 0.0);
        assert!(PopulationState::new(0.0, vec![1.0 + 1e-9, -1e-9]).is_err());
        assert!(PopulationState::new(0.0, vec![0.5, 0.3]).is_err());
    }

    #[test]
    fn series_single_battery() {
        let cfg = BatteryConfig::new(1, 4).unwrap();
        let s = observable_series(&cfg, PI / 4.0, 2).unwrap();
        assert_eq!(s.times, vec![0.0, PI / 4.0]);
        assert!(s.delta_e[0].abs() < 1e-12);
        assert!((s.delta_e[1] - 1.0).abs() < 1e-12);
        assert!(s.entropy[0].abs() < 1e-12);
        assert_eq!(s.power()[0], 0.0);
    }

    #[test]
    fn series_near_zero_horizon() {
        let cfg = BatteryConfig::new(5, 7).unwrap();
        let s = observable_series(&cfg, 1e-9, 2).unwrap();
        assert!(s.delta_e.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn series_dense_scan_reaches_full_charge() {
        let cfg = BatteryConfig::new(2, 2).unwrap();
        let s = observable_series(&cfg, 2.0 * PI, 10_000).unwrap();
        let max = s.delta_e.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - 2.0).abs() < 1e-6);
    }

    #[test]
    fn series_validation() {
        let cfg = BatteryConfig::new(2, 2).unwrap();
        assert!(observable_series(&cfg, 1.0, 1).unwrap_err().is_domain());
        assert!(observable_series(&cfg, 0.0, 10).unwrap_err().is_domain());
    }

    #[test]
    fn batch_matches_pointwise() {
        let (_, d) = decomp(9, 14);
        let prop = Propagator::new(&d);
        let times: Vec<f64> = (0..600).map(|i| i as f64 * 0.013).collect();
        let batch = prop.mean_excitation_batch(&times);
        for (t, b) in times.iter().zip(batch) {
            assert!((prop.mean_excitation(*t) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_matches_finite_difference() {
        let (_, d) = decomp(6, 11);
        let prop = Propagator::new(&d);
        for t in [0.05, 0.3, 1.7] {
            let h = 1e-6;
            let fd = (prop.mean_excitation(t + h) - prop.mean_excitation(t - h)) / (2.0 * h);
            assert!((prop.mean_excitation_rate(t) - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn series_csv_header() {
        let cfg = BatteryConfig::new(1, 1).unwrap();
        let s = observable_series(&cfg, 1.0, 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,delta_e,entropy,power"));
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 4);
        assert!(first.iter().all(|x| x.abs() < 1e-12));
        assert_eq!(text.lines().count(), 4);
    }
}
