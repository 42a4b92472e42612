//! Brute-force simulators for small registers.
//!
//! [`StateVector`] holds all 2^n amplitudes (n ≤ 14) and prepares GHZ states
//! through the Mølmer–Sørensen interaction. [`DensityMatrix`] (n ≤ 8) evolves
//! mixed states through the same channels as the compact register model and
//! serves as its reference.

mod density;
mod statevector;

pub use density::{DensityMatrix, MAX_DENSITY_QUBITS};
pub use statevector::{StateVector, MAX_ORACLE_QUBITS};
