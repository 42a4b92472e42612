//! Simulation and analysis of GHZ-class registers under collective Gaussian
//! phase noise and spontaneous decay.
//!
//! The crate is organised bottom-up:
//!
//! * [`noise`]: closed-form error probability and fidelity for an
//!   exponentially correlated (Ornstein–Uhlenbeck) phase reference, plus a
//!   seeded trajectory sampler used as a Monte Carlo check.
//! * [`register`]: a compact two-branch density-matrix model with collective
//!   dephasing and amplitude-damping channels.
//! * [`oracle`]: brute-force statevector and density-matrix simulators for
//!   small registers, including the Mølmer–Sørensen interaction.
//! * [`measurement`]: camera (per-qubit) and PMT (photon count) readout.
//! * [`estimation`]: parity fits, Bayesian PMT inference, fidelity,
//!   entanglement criteria, decay and scaling fits.
//! * [`scenario`]: config-driven experiment runs and report emission.

// Checks are written as `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod measurement;
pub mod noise;
pub mod oracle;
pub mod register;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use estimation::Estimate;
pub use noise::NoiseParams;
pub use register::{Bitstring, BranchPairState};
