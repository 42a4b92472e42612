//! Compact branch-pair model against brute-force density matrices, and the
//! statevector MS gate against a dense matrix exponential built here.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ghz_decoherence::oracle::{DensityMatrix, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < TOL
}

#[test]
fn compact_channels_match_density_oracle() {
    let worst = common::compact_vs_density(20240601, 100);
    assert!(worst.value < TOL, "{worst:?}");
}

#[test]
fn pure_states_agree_between_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=6 {
        let amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let sv = StateVector::from_amplitudes(n, amps.into_iter().map(|a| a / norm).collect()).unwrap();
        let phi = 0.3 * n as f64;
        let a = sv.apply_collective_z_phase(0.7).apply_collective_rotation(phi);
        let rho = DensityMatrix::from_pure(&sv)
            .unwrap()
            .apply_collective_z_phase(0.7)
            .apply_collective_rotation(phi);
        for (x, y) in a.outcome_distribution().iter().zip(rho.diagonal()) {
            assert!(close(*x, y));
        }
        assert!(close(a.parity(), rho.parity()));
    }
}

fn sigma_phi(phi: f64) -> DMatrix<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    DMatrix::from_row_slice(2, 2, &[z, Complex64::from_polar(1.0, -phi), Complex64::from_polar(1.0, phi), z])
}

/// Operator `op` on qubit j of n, with qubit 0 the most significant bit.
fn embed(op: &DMatrix<Complex64>, j: usize, n: usize) -> DMatrix<Complex64> {
    let id = DMatrix::<Complex64>::identity(2, 2);
    (0..n).fold(DMatrix::identity(1, 1), |acc, k| acc.kronecker(if k == j { op } else { &id }))
}

/// exp(−i(θ/2)Σ_{j<k} σ_φ^{(j)}σ_φ^{(k)}) as a dense matrix.
fn ms_unitary(n: usize, theta: f64, phi: f64) -> DMatrix<Complex64> {
    let dim = 1 << n;
    let s = sigma_phi(phi);
    let singles: Vec<_> = (0..n).map(|j| embed(&s, j, n)).collect();
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 0..n {
        for k in j + 1..n {
            h += &singles[j] * &singles[k];
        }
    }
    (h * Complex64::new(0.0, -0.5 * theta)).exp()
}

#[test]
fn ms_gate_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 2..=6 {
        for _ in 0..3 {
            let theta = rng.random::<f64>() * PI;
            let phi = rng.random::<f64>() * TAU;
            let amps: Vec<Complex64> = (0..1 << n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let amps: Vec<Complex64> = amps.into_iter().map(|a| a / norm).collect();
            let sv = StateVector::from_amplitudes(n, amps.clone()).unwrap();
            let expected = ms_unitary(n, theta, phi) * nalgebra::DVector::from_vec(amps);
            let got = sv.apply_ms(theta, phi);
            for (e, g) in expected.iter().zip(got.amplitudes()) {
                assert!((e - g).norm() < TOL, "n = {n}: {e} vs {g}");
            }
        }
    }
}

#[test]
fn collective_rotation_matches_matrix_exponential() {
    let phi = 1.1;
    let n = 3;
    let rot = (sigma_phi(phi) * Complex64::new(0.0, FRAC_PI_2 / 2.0)).exp();
    let full = (0..n).fold(DMatrix::identity(1, 1), |acc: DMatrix<Complex64>, _| acc.kronecker(&rot));
    let sv = StateVector::from_bits("011").unwrap();
    let expected = &full * nalgebra::DVector::from_column_slice(sv.amplitudes());
    for (e, g) in expected.iter().zip(sv.apply_collective_rotation(phi).amplitudes()) {
        assert!((e - g).norm() < TOL);
    }
}
