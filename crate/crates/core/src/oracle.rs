//! Brute-force propagation in the full `2^(n_b + n_c)` spin space.
//!
//! Used only to validate the invariant-subspace pipeline. Basis layout: bit
//! `i < n_b` of a basis index is battery spin `i`, bit `n_b + j` is charger
//! spin `j`; a set bit is spin up. The Hamiltonian is real symmetric in this
//! basis and is diagonalized densely with nalgebra, independently of the
//! tridiagonal solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::dynamics::PopulationState;
use crate::error::{Error, Result};
use crate::subspace::BatteryConfig;

/// Largest total spin count accepted (a 4096 × 4096 dense matrix).
pub const MAX_SPINS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FullStateVector {
    pub n_b: usize,
    pub n_c: usize,
    pub amplitudes: Vec<Complex64>,
}

impl FullStateVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn battery_mask(&self) -> usize {
        (1 << self.n_b) - 1
    }

    fn split(&self, x: usize) -> (usize, usize) {
        (
            (x & self.battery_mask()).count_ones() as usize,
            (x >> self.n_b).count_ones() as usize,
        )
    }

    /// Weight of each battery excitation sector `k = 0..=n_b`.
    pub fn battery_sector_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_b + 1];
        for (x, a) in self.amplitudes.iter().enumerate() {
            w[self.split(x).0] += a.norm_sqr();
        }
        w
    }

    /// Overlaps `⟨k|_b ⟨n - k|_c |ψ⟩` with the product Dicke basis.
    pub fn dicke_overlaps(&self) -> Vec<Complex64> {
        let n = self.n_c;
        let d = self.n_b.min(self.n_c);
        let mut c = vec![Complex64::new(0.0, 0.0); d + 1];
        for (x, a) in self.amplitudes.iter().enumerate() {
            let (kb, kc) = self.split(x);
            if kb <= d && kb + kc == n {
                c[kb] += a / dicke_norm(self.n_b, self.n_c, kb);
            }
        }
        c
    }

    /// `‖ψ - Pψ‖²` where `P` projects onto the product Dicke basis.
    pub fn leakage(&self) -> f64 {
        let n = self.n_c;
        let overlaps = self.dicke_overlaps();
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(x, a)| {
                let (kb, kc) = self.split(x);
                let proj = if kb < overlaps.len() && kb + kc == n {
                    overlaps[kb] / dicke_norm(self.n_b, self.n_c, kb)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                (a - proj).norm_sqr()
            })
            .sum()
    }

    /// Battery reduced density matrix expressed in the battery Dicke basis,
    /// `M[k][k'] = ⟨k| Tr_c |ψ⟩⟨ψ| |k'⟩`.
    pub fn battery_dicke_matrix(&self) -> Vec<Vec<Complex64>> {
        let nb = self.n_b;
        let dim = nb + 1;
        let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
        let binom: Vec<f64> = (0..=nb).map(|k| binomial(nb, k).sqrt()).collect();
        for c in 0..(1usize << self.n_c) {
            let mut a = vec![Complex64::new(0.0, 0.0); dim];
            for b in 0..(1usize << nb) {
                let k = b.count_ones() as usize;
                a[k] += self.amplitudes[(c << nb) | b] / binom[k];
            }
            for i in 0..dim {
                for j in 0..dim {
                    m[i][j] += a[i] * a[j].conj();
                }
            }
        }
        m
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn dicke_norm(n_b: usize, n_c: usize, kb: usize) -> f64 {
    (binomial(n_b, kb) * binomial(n_c, n_c - kb)).sqrt()
}

/// Dense full-space Hamiltonian.
pub fn full_hamiltonian(config: &BatteryConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let (nb, nc) = (config.n_b, config.n_c);
    if nb + nc > MAX_SPINS {
        return Err(Error::domain(format!(
            "brute-force oracle limited to n_b + n_c ≤ {MAX_SPINS}"
        )));
    }
    let dim = 1usize << (nb + nc);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..dim {
        let mut sz = -(nb as f64) / 2.0;
        for i in 0..nb {
            if x >> i & 1 == 1 {
                sz += 1.0;
            }
        }
        let mut jz = -(nc as f64) / 2.0;
        for j in 0..nc {
            if x >> (nb + j) & 1 == 1 {
                jz += 1.0;
            }
        }
        h[(x, x)] = config.omega_b * sz + config.omega_c * jz + 2.0 * config.delta * sz * jz;

        // S⁺J⁻ raises a battery spin and lowers a charger spin; its adjoint
        // fills the transposed entry.
        for i in 0..nb {
            if x >> i & 1 == 1 {
                continue;
            }
            for j in 0..nc {
                let cbit = nb + j;
                if x >> cbit & 1 == 0 {
                    continue;
                }
                let y = (x | 1 << i) & !(1 << cbit);
                h[(y, x)] += config.lambda;
                h[(x, y)] += config.lambda;
            }
        }
    }
    Ok(h)
}

/// Diagonalized full-space system, reusable across times.
pub struct FullSystem {
    n_b: usize,
    n_c: usize,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
    /// `⟨v_m | ψ(0)⟩`.
    initial_overlap: DVector<f64>,
}

impl FullSystem {
    pub fn new(config: &BatteryConfig) -> Result<Self> {
        let h = full_hamiltonian(config)?;
        let eig = SymmetricEigen::new(h);
        let x0 = ((1usize << config.n_c) - 1) << config.n_b;
        let initial_overlap = eig.eigenvectors.row(x0).transpose();
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        let mid = 0.5 * (lo + hi);
        Ok(FullSystem {
            n_b: config.n_b,
            n_c: config.n_c,
            energies: eig.eigenvalues.map(|e| e - mid),
            vectors: eig.eigenvectors,
            initial_overlap,
        })
    }

    pub fn state_at(&self, t: f64) -> FullStateVector {
        let coeff_re = self
            .initial_overlap
            .zip_map(&self.energies, |c, e| c * (e * t).cos());
        let coeff_im = self
            .initial_overlap
            .zip_map(&self.energies, |c, e| -c * (e * t).sin());
        let re = &self.vectors * coeff_re;
        let im = &self.vectors * coeff_im;
        FullStateVector {
            n_b: self.n_b,
            n_c: self.n_c,
            amplitudes: re.iter().zip(im.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect(),
        }
    }

    /// Battery sector populations truncated to the `d + 1` reachable levels.
    pub fn populations(&self, t: f64) -> Result<PopulationState> {
        let d = self.n_b.min(self.n_c);
        let mut w = self.state_at(t).battery_sector_weights();
        w.truncate(d + 1);
        PopulationState::new(t, w)
    }
}

pub fn brute_force_populations(config: &BatteryConfig, t: f64) -> Result<PopulationState> {
    if !(t >= 0.0) {
        return Err(Error::domain("t must be ≥ 0"));
    }
    FullSystem::new(config)?.populations(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClosureReport {
    /// Largest weight found outside the product Dicke basis.
    pub max_leakage: f64,
    /// Largest off-diagonal magnitude of the battery state in the Dicke basis.
    pub max_offdiagonal: f64,
    /// Largest `|‖ψ‖² - 1|`.
    pub max_norm_error: f64,
}

impl ClosureReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_leakage < tol && self.max_offdiagonal < tol
    }
}

pub fn verify_subspace_closure(config: &BatteryConfig, t_grid: &[f64]) -> Result<ClosureReport> {
    let sys = FullSystem::new(config)?;
    Ok(closure_on(&sys, t_grid))
}

pub fn closure_on(sys: &FullSystem, t_grid: &[f64]) -> ClosureReport {
    let mut report = ClosureReport::default();
    for &t in t_grid {
        let psi = sys.state_at(t);
        report.max_leakage = report.max_leakage.max(psi.leakage());
        report.max_norm_error = report.max_norm_error.max((psi.norm_sqr() - 1.0).abs());
        let m = psi.battery_dicke_matrix();
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    report.max_offdiagonal = report.max_offdiagonal.max(v.norm());
                }
            }
        }
    }
    report
}
