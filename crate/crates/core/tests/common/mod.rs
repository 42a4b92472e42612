//! Helpers shared by integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use ghz_decoherence::measurement::{outcome_probabilities, parity_expectation};
use ghz_decoherence::oracle::DensityMatrix;
use ghz_decoherence::{Bitstring, BranchPairState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> BranchPairState {
    let mask = (1u64 << n) - 1;
    let a = Bitstring(rng.random::<u64>() & mask);
    let b = a.complement(n);
    let p_a: f64 = rng.random();
    let p_b = 1.0 - p_a;
    let mag = (p_a * p_b).sqrt() * rng.random::<f64>();
    let c = Complex64::from_polar(mag, rng.random::<f64>() * TAU);
    BranchPairState::new(n, a, b, p_a, p_b, c).unwrap()
}

/// Local X flips that take `state`'s branch_a to 0…0.
pub fn to_frame(rho: &DensityMatrix, state: &BranchPairState) -> DensityMatrix {
    let n = state.n();
    (0..n)
        .filter(|&j| state.branch_a().qubit(n, j))
        .fold(rho.clone(), |r, j| r.apply_x(j))
}

/// Largest deviation between one compact quantity and its density-matrix
/// counterpart, with a label for the quantity.
#[derive(Debug, Clone, Copy)]
pub struct Deviation {
    pub case: usize,
    pub quantity: &'static str,
    pub value: f64,
}

/// Runs `cases` random states (n cycling through 1..=6) through phase kick,
/// Gaussian dephasing, amplitude damping and analysis rotation in both
/// models and returns the worst disagreement.
pub fn compact_vs_density(seed: u64, cases: usize) -> Deviation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Deviation { case: 0, quantity: "none", value: 0.0 };
    let mut record = |case: usize, quantity: &'static str, value: f64| {
        if value > worst.value || value.is_nan() {
            worst = Deviation { case, quantity, value };
        }
    };
    for case in 0..cases {
        let n = 1 + case % 6;
        let s0 = random_state(&mut rng, n);
        let phase = rng.random::<f64>() * TAU;
        let variance = rng.random::<f64>() * 2.0;
        let survival = 0.2 + 0.8 * rng.random::<f64>();
        let phi = rng.random::<f64>() * TAU;

        let t1 = 1.0;
        let t = -survival.ln() * t1;
        let compact = s0
            .apply_collective_phase(phase)
            .apply_phase_variance(variance)
            .apply_amplitude_damping(t, t1)
            .unwrap();
        let dense = DensityMatrix::from_branch_pair(&s0)
            .unwrap()
            .apply_collective_z_phase(phase)
            .apply_gaussian_collective_dephasing(variance)
            .apply_amplitude_damping(survival);

        let (a, b) = (s0.branch_a(), s0.branch_b());
        record(case, "p_a", (dense.element(a, a).re - compact.p_a()).abs());
        record(case, "p_b", (dense.element(b, b).re - compact.p_b()).abs());
        record(case, "coherence", (dense.element(a, b) - compact.coherence_element()).norm());
        let leak = dense.trace() - dense.element(a, a).re - dense.element(b, b).re;
        record(case, "leak", (leak - compact.p_leak()).abs());

        let analysed = to_frame(&dense, &s0).apply_collective_rotation(phi);
        let got = outcome_probabilities(&compact, phi).unwrap();
        for (e, g) in analysed.diagonal().iter().zip(&got) {
            record(case, "outcome", (e - g).abs());
        }
        record(case, "parity", (analysed.parity() - parity_expectation(&compact, phi).unwrap()).abs());
    }
    worst
}
