//! Invariant-subspace basis and the tridiagonal Hamiltonian.
//!
//! The battery starts in the all-down state and the charger in the all-up
//! state. The flip-flop coupling conserves the total z-magnetization, so the
//! evolution stays inside the span of the product Dicke states
//!
//! ```text
//! |k>_b |n - k>_c,   k = 0..=d,   d = min(n_b, n_c),   n = n_c
//! ```
//!
//! where `|m>` is the symmetric state with `m` spins up. In that basis the
//! Hamiltonian is real symmetric tridiagonal, stored here as two flat arrays.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of one central-spin battery instance (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    /// Number of battery spins.
    pub n_b: usize,
    /// Number of charger spins.
    pub n_c: usize,
    pub omega_b: f64,
    pub omega_c: f64,
    /// Flip-flop coupling strength.
    pub lambda: f64,
    /// Ising (ZZ) coupling strength.
    pub delta: f64,
}

impl BatteryConfig {
    /// Resonant-field configuration with `omega = lambda = 1` and no ZZ term.
    pub fn new(n_b: usize, n_c: usize) -> Result<Self> {
        let cfg = BatteryConfig {
            n_b,
            n_c,
            omega_b: 1.0,
            omega_c: 1.0,
            lambda: 1.0,
            delta: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets `omega_b = omega_c = omega`.
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega_b = omega;
        self.omega_c = omega;
        self
    }

    pub fn with_omegas(mut self, omega_b: f64, omega_c: f64) -> Self {
        self.omega_b = omega_b;
        self.omega_c = omega_c;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b < 1 {
            return Err(Error::domain("n_b must be ≥ 1"));
        }
        if self.n_c < 1 {
            return Err(Error::domain("n_c must be ≥ 1"));
        }
        for (name, v) in [
            ("omega_b", self.omega_b),
            ("omega_c", self.omega_c),
            ("lambda", self.lambda),
            ("delta", self.delta),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite")));
            }
        }
        if self.lambda == 0.0 {
            return Err(Error::domain("lambda must be nonzero"));
        }
        Ok(())
    }

    pub fn basis(&self) -> SubspaceBasis {
        SubspaceBasis::new(self.n_b, self.n_c)
    }
}

/// Labels of the invariant subspace: index `k` is `|k>_b |n - k>_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubspaceBasis {
    pub d: usize,
    /// Total excitation number, equal to `n_c` for the all-up charger.
    pub n: usize,
}

impl SubspaceBasis {
    pub fn new(n_b: usize, n_c: usize) -> Self {
        SubspaceBasis {
            d: n_b.min(n_c),
            n: n_c,
        }
    }

    pub fn dim(&self) -> usize {
        self.d + 1
    }

    /// Battery and charger excitation numbers of basis state `k`.
    pub fn excitations(&self, k: usize) -> (usize, usize) {
        debug_assert!(k <= self.d);
        (k, self.n - k)
    }
}

/// Real symmetric tridiagonal matrix: `diag[j] = b_j`, `offdiag[j - 1] = u_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalHamiltonian {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TridiagonalHamiltonian {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::domain("tridiagonal matrix must have dimension ≥ 1"));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::domain(format!(
                "off-diagonal length {} does not match dimension {}",
                offdiag.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(&offdiag).any(|v| !v.is_finite()) {
            return Err(Error::domain("tridiagonal entries must be finite"));
        }
        Ok(TridiagonalHamiltonian { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `T x` without forming the dense matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.offdiag[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Adds `c` to every diagonal entry.
    pub fn shifted(&self, c: f64) -> Self {
        TridiagonalHamiltonian {
            diag: self.diag.iter().map(|b| b + c).collect(),
            offdiag: self.offdiag.clone(),
        }
    }

    /// Dense row-major copy, for inspection only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.offdiag[i];
                m[i + 1][i] = self.offdiag[i];
            }
        }
        m
    }

    /// Writes the dense matrix as headerless CSV, one row per line.
    pub fn write_dense_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.to_dense() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Builds the subspace Hamiltonian
///
/// ```text
/// u_j = j λ sqrt((n_b - j + 1)(n_c - j + 1))                      j = 1..=d
/// b_j = ω_b (j - n_b/2) + ω_c (n_c - j - n_c/2)
///       + 2Δ (j - n_b/2)(n_c - j - n_c/2)                          j = 0..=d
/// ```
///
/// For `ω_b = ω_c = ω` and `Δ = 0` the diagonal is the constant
/// `ω (n_c - n_b) / 2`.
pub fn build_hamiltonian(config: &BatteryConfig) -> Result<TridiagonalHamiltonian> {
    config.validate()?;
    let basis = config.basis();
    let n_b = config.n_b as f64;
    let n_c = config.n_c as f64;

    let diag = (0..=basis.d)
        .map(|j| {
            let (kb, kc) = basis.excitations(j);
            let sz = kb as f64 - n_b / 2.0;
            let jz = kc as f64 - n_c / 2.0;
            config.omega_b * sz + config.omega_c * jz + 2.0 * config.delta * sz * jz
        })
        .collect();

    let offdiag = (1..=basis.d)
        .map(|j| {
            let jf = j as f64;
            jf * config.lambda * ((n_b - jf + 1.0) * (n_c - jf + 1.0)).sqrt()
        })
        .collect();

    TridiagonalHamiltonian::new(diag, offdiag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn two_by_two_resonant() {
        let h = build_hamiltonian(&BatteryConfig::new(2, 2).unwrap()).unwrap();
        assert_eq!(h.offdiag.len(), 2);
        assert!(close(h.offdiag[0], 2.0, 1e-15));
        assert!(close(h.offdiag[1], 2.0, 1e-15));
        assert!(h.diag.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn single_pair() {
        let h = build_hamiltonian(&BatteryConfig::new(1, 1).unwrap()).unwrap();
        assert_eq!(h.offdiag, vec![1.0]);
        assert_eq!(h.diag, vec![0.0, 0.0]);
    }

    #[test]
    fn two_battery_four_charger() {
        let h = build_hamiltonian(&BatteryConfig::new(2, 4).unwrap()).unwrap();
        assert!(close(h.offdiag[0], 2.0 * 2f64.sqrt(), 1e-14));
        assert!(close(h.offdiag[1], 2.0 * 3f64.sqrt(), 1e-14));
        // signed form: ω (n_c - n_b) / 2
        assert!(h.diag.iter().all(|&b| close(b, 1.0, 1e-15)));
    }

    #[test]
    fn two_battery_matches_explicit_matrix() {
        // ω(N_c/2 - 1) on the diagonal, λ√(2N_c) and 2λ√(N_c - 1) off it.
        for n_c in 2..20 {
            let cfg = BatteryConfig::new(2, n_c).unwrap().with_omega(0.7).with_lambda(1.3);
            let h = build_hamiltonian(&cfg).unwrap();
            let nc = n_c as f64;
            for b in &h.diag {
                assert!(close(*b, 0.7 * (nc / 2.0 - 1.0), 1e-13));
            }
            assert!(close(h.offdiag[0], 1.3 * (2.0 * nc).sqrt(), 1e-13));
            assert!(close(h.offdiag[1], 2.0 * 1.3 * (nc - 1.0).sqrt(), 1e-13));
        }
    }

    #[test]
    fn rejects_empty_registers() {
        let err = BatteryConfig::new(0, 5).unwrap_err();
        assert_eq!(err, Error::Domain("n_b must be ≥ 1".into()));
        assert!(BatteryConfig::new(3, 0).is_err());
        let cfg = BatteryConfig { n_b: 0, ..BatteryConfig::new(1, 1).unwrap() };
        assert!(build_hamiltonian(&cfg).unwrap_err().is_domain());
    }

    #[test]
    fn rejects_zero_coupling() {
        let cfg = BatteryConfig::new(2, 2).unwrap().with_lambda(0.0);
        assert!(build_hamiltonian(&cfg).is_err());
    }

    #[test]
    fn swap_symmetry_of_couplings() {
        for (a, b) in [(1, 7), (3, 5), (10, 40)] {
            let h1 = build_hamiltonian(&BatteryConfig::new(a, b).unwrap()).unwrap();
            let h2 = build_hamiltonian(&BatteryConfig::new(b, a).unwrap()).unwrap();
            assert_eq!(h1.offdiag, h2.offdiag);
        }
    }

    #[test]
    fn offdiag_formula_and_positivity() {
        let cfg = BatteryConfig::new(37, 23).unwrap().with_lambda(0.25);
        let h = build_hamiltonian(&cfg).unwrap();
        assert_eq!(h.dim(), 24);
        for (i, u) in h.offdiag.iter().enumerate() {
            let j = (i + 1) as f64;
            let expect = j * 0.25 * ((37.0 - j + 1.0) * (23.0 - j + 1.0)).sqrt();
            assert!(*u > 0.0);
            assert!((u - expect).abs() <= 1e-15 * expect);
        }
    }

    #[test]
    fn dense_export() {
        let h = build_hamiltonian(&BatteryConfig::new(1, 1).unwrap()).unwrap();
        let mut buf = Vec::new();
        h.write_dense_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].split(',').count(), 2);
        assert!(rows[0].ends_with("1.00000000000000000e0"));
    }

    #[test]
    fn malformed_lengths() {
        assert!(TridiagonalHamiltonian::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(TridiagonalHamiltonian::new(vec![], vec![]).is_err());
    }
}
