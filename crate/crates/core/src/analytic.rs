//! Closed-form charging results for a single battery spin, two battery spins,
//! or two charger spins.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::PopulationState;
use crate::error::{Error, Result};

/// `ΔE(τ)/ω` for two battery spins as the charger grows without bound
/// (and symmetrically for two chargers).
pub const TWO_SPIN_ASYMPTOTIC_ENERGY: f64 = 16.0 / 9.0;
/// Limiting populations `(ρ_11, ρ_22, ρ_33)` at `τ` for two battery spins.
pub const TWO_SPIN_ASYMPTOTIC_POPULATIONS: [f64; 3] = [1.0 / 9.0, 0.0, 8.0 / 9.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    SingleBattery,
    TwoBattery,
    TwoCharger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormResult {
    pub tau: f64,
    pub delta_e_tau: f64,
    pub entropy_tau: f64,
    pub family: Family,
}

/// Binary Shannon entropy in bits, `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(x) + term(1.0 - x)
}

fn check_params(omega: f64, lambda: f64) -> Result<()> {
    if !omega.is_finite() || !lambda.is_finite() || lambda == 0.0 {
        return Err(Error::domain("omega must be finite and lambda finite and nonzero"));
    }
    Ok(())
}

/// One battery spin: `ΔE(t) = ω sin²(√n_c λ t)`, fully charged at
/// `τ = π / (2λ√n_c)`.
pub fn single_battery(n_c: usize, omega: f64, lambda: f64) -> Result<ClosedFormResult> {
    if n_c < 1 {
        return Err(Error::domain("n_c must be ≥ 1"));
    }
    check_params(omega, lambda)?;
    Ok(ClosedFormResult {
        tau: PI / (2.0 * lambda.abs() * (n_c as f64).sqrt()),
        delta_e_tau: omega,
        entropy_tau: 0.0,
        family: Family::SingleBattery,
    })
}

/// Oscillation frequency `λ √(2(3n - 2))` of the two-spin families.
pub fn two_spin_frequency(n: usize, lambda: f64) -> f64 {
    lambda.abs() * (2.0 * (3.0 * n as f64 - 2.0)).sqrt()
}

fn two_spin(n: usize, omega: f64, lambda: f64, family: Family) -> ClosedFormResult {
    let nf = n as f64;
    let denom = 3.0 * nf - 2.0;
    let x = ((nf - 2.0) / denom).powi(2);
    ClosedFormResult {
        tau: PI / two_spin_frequency(n, lambda),
        delta_e_tau: 16.0 * omega * nf * (nf - 1.0) / (denom * denom),
        entropy_tau: binary_entropy(x),
        family,
    }
}

/// Two battery spins charged by `n_c ≥ 2` chargers.
pub fn two_battery(n_c: usize, omega: f64, lambda: f64) -> Result<ClosedFormResult> {
    if n_c < 2 {
        return Err(Error::domain("n_c must be ≥ 2"));
    }
    check_params(omega, lambda)?;
    Ok(two_spin(n_c, omega, lambda, Family::TwoBattery))
}

/// `n_b ≥ 2` battery spins charged by two chargers.
pub fn two_charger(n_b: usize, omega: f64, lambda: f64) -> Result<ClosedFormResult> {
    if n_b < 2 {
        return Err(Error::domain("n_b must be ≥ 2"));
    }
    check_params(omega, lambda)?;
    Ok(two_spin(n_b, omega, lambda, Family::TwoCharger))
}

/// `ΔE(t)` for two battery spins (or, with `n = n_b`, two chargers).
pub fn two_spin_energy(n: usize, omega: f64, lambda: f64, t: f64) -> f64 {
    let nf = n as f64;
    let c = (two_spin_frequency(n, lambda) * t).cos();
    omega / (3.0 * nf - 2.0).powi(2)
        * (nf * (nf - 2.0) * c * c - 8.0 * nf * (nf - 1.0) * c + nf * (7.0 * nf - 6.0))
}

/// Battery populations for two battery spins at time `t`.
pub fn two_battery_rho(n_c: usize, lambda: f64, t: f64) -> Result<PopulationState> {
    if n_c < 2 {
        return Err(Error::domain("n_c must be ≥ 2"));
    }
    if !(t >= 0.0) {
        return Err(Error::domain("t must be ≥ 0"));
    }
    let nf = n_c as f64;
    let denom = 3.0 * nf - 2.0;
    let wt = two_spin_frequency(n_c, lambda) * t;
    let c = wt.cos();
    let s = wt.sin();
    let rho11 = (2.0 * (nf - 1.0) + nf * c).powi(2) / (denom * denom);
    let rho22 = nf / denom * s * s;
    let rho33 = 2.0 * nf * (nf - 1.0) / (denom * denom) * (1.0 - c).powi(2);
    PopulationState::new(t, vec![rho11, rho22, rho33])
}
