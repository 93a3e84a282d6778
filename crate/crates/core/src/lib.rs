//! Charging dynamics of the central-spin quantum battery.
//!
//! `n_b` battery spins start fully down, `n_c` charger spins fully up, and a
//! collective flip-flop coupling moves excitations from charger to battery.
//! Because the total magnetization is conserved, the evolution lives in a
//! `min(n_b, n_c) + 1` dimensional subspace spanned by product Dicke states,
//! where the Hamiltonian is tridiagonal. This makes systems with thousands of
//! spins cheap to simulate.
//!
//! Pipeline: [`subspace::build_hamiltonian`] → [`eigensolver::decompose`] →
//! [`dynamics`] observables → [`optimizer::find_optimal_tau`] →
//! [`sweep::run_sweep`]. [`analytic`] holds closed forms for the small cases
//! and [`oracle`] a brute-force full-space propagator for validation.

pub mod analytic;
pub mod cli;
pub mod dynamics;
pub mod eigensolver;
pub mod error;
pub mod fmt;
pub mod optimizer;
pub mod oracle;
pub mod subspace;
pub mod sweep;

pub use error::{Error, Result};
pub use optimizer::{find_optimal_tau, ChargingResult, SearchPolicy};
pub use subspace::{build_hamiltonian, BatteryConfig, TridiagonalHamiltonian};
