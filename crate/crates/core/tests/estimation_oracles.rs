//! Sampling and inference against brute-force references.

use std::collections::BTreeMap;

use ghz_decoherence::estimation::{
    bayes_populations_pmt, criterion_distillability, criterion_genuine_entanglement, DiagonalPopulations, Estimate,
};
use ghz_decoherence::measurement::{outcome_probabilities, sample_camera_shots, PmtRates, PmtShot};
use ghz_decoherence::{Bitstring, BranchPairState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

fn chi_square_check(state: &BranchPairState, phi: f64, shots: usize, seed: u64) {
    let n = state.n();
    let probs = outcome_probabilities(state, phi).unwrap();
    let mut counts = vec![0.0; 1 << n];
    for s in sample_camera_shots(state, phi, shots, seed).unwrap() {
        counts[s.0 as usize] += 1.0;
    }
    let mut chi2 = 0.0;
    let mut cells = 0;
    for (c, p) in counts.iter().zip(&probs) {
        let e = p * shots as f64;
        if e > 0.0 {
            chi2 += (c - e) * (c - e) / e;
            cells += 1;
        } else {
            assert_eq!(*c, 0.0, "shot in a zero-probability cell");
        }
    }
    let crit = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < crit, "chi2 {chi2} >= {crit} with {cells} cells");
}

#[test]
fn camera_samples_follow_closed_form() {
    let ghz = BranchPairState::ghz_with(3, 0.9, 0.7).unwrap();
    chi_square_check(&ghz, 0.4, 40_000, 1);
    let dfs = BranchPairState::dfs_state(4).unwrap().apply_amplitude_damping(0.3, 1.0).unwrap();
    chi_square_check(&dfs, 1.3, 40_000, 2);
    chi_square_check(&BranchPairState::ghz_ideal(2).unwrap(), 0.0, 10_000, 3);
}

fn ln_poisson(c: u64, mean: f64) -> f64 {
    c as f64 * mean.ln() - mean - ln_gamma(c as f64 + 1.0)
}

/// Exact posterior mean of q₀ + q_n by summing over every latent bright-count
/// assignment, with a Dirichlet(1) prior.
fn brute_force_posterior_mean(counts: &[u64], rates: PmtRates, n: usize) -> f64 {
    let m = counts.len();
    let k_states = n + 1;
    let mut total_w = 0.0;
    let mut total = 0.0;
    for code in 0..k_states.pow(m as u32) {
        let mut c = code;
        let mut occ = vec![0usize; k_states];
        let mut log_w = 0.0;
        for &obs in counts {
            let k = c % k_states;
            c /= k_states;
            occ[k] += 1;
            log_w += ln_poisson(obs, k as f64 * rates.lambda_ion + rates.lambda_bg);
        }
        // Dirichlet-multinomial marginal of the assignment.
        log_w += ln_gamma(k_states as f64) - ln_gamma((k_states + m) as f64)
            + occ.iter().map(|&o| ln_gamma(1.0 + o as f64)).sum::<f64>();
        let w = log_w.exp();
        total_w += w;
        total += w * (2.0 + occ[0] as f64 + occ[n] as f64) / (k_states + m) as f64;
    }
    total / total_w
}

#[test]
fn sampled_posterior_matches_enumeration() {
    let rates = PmtRates::default();
    // The last case sits between two bright levels (60, 83 for n = 4), where
    // the latent classes are genuinely uncertain. The tolerance covers the
    // sampler's Monte Carlo error.
    let cases: [(&[u64], usize); 3] = [(&[0, 2, 20, 41, 1, 19], 2), (&[0, 0, 1, 22, 43], 2), (&[60, 83, 3, 21], 4)];
    for (counts, n) in cases {
        let shots: Vec<PmtShot> = counts.iter().map(|&c| PmtShot { counts: c }).collect();
        let sampled = bayes_populations_pmt(&shots, rates, n).unwrap().populations.value;
        let exact = brute_force_posterior_mean(counts, rates, n);
        assert!((sampled - exact).abs() < 2e-3, "{counts:?}: {sampled} vs {exact}");
    }
}

/// Random pure state on `k` qubits.
fn random_pure(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..1 << k)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// |ψ_A⟩⊗|ψ_B⟩ where qubit j belongs to A when bit j of `mask_a` is set.
fn product(n: usize, mask_a: usize, psi_a: &[Complex64], psi_b: &[Complex64]) -> Vec<Complex64> {
    (0..1usize << n)
        .map(|s| {
            let (mut ia, mut ib) = (0, 0);
            for j in 0..n {
                let bit = (s >> (n - 1 - j)) & 1;
                if mask_a >> j & 1 == 1 {
                    ia = ia << 1 | bit;
                } else {
                    ib = ib << 1 | bit;
                }
            }
            psi_a[ia] * psi_b[ib]
        })
        .collect()
}

/// Diagonal and |c| = |ρ(0…0, 1…1)| of a mixture of pure states.
fn mixture_summary(n: usize, states: &[(f64, Vec<Complex64>)]) -> (DiagonalPopulations, Estimate) {
    let dim = 1usize << n;
    let mut diag = vec![0.0; dim];
    let mut corner = Complex64::new(0.0, 0.0);
    for (w, psi) in states {
        for (s, a) in psi.iter().enumerate() {
            diag[s] += w * a.norm_sqr();
        }
        corner += psi[0] * psi[dim - 1].conj() * w;
    }
    let probs: BTreeMap<Bitstring, f64> = diag.iter().enumerate().map(|(s, &p)| (Bitstring(s as u64), p)).collect();
    (DiagonalPopulations { n, probs, n_shots: 0 }, Estimate::exact(corner.norm()))
}

#[test]
fn separable_states_never_pass_distillability() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..200 {
        let n = 2 + case % 3;
        let members: Vec<(f64, Vec<Complex64>)> = (0..1 + case % 4)
            .map(|_| {
                let psi = (0..n).fold(vec![Complex64::new(1.0, 0.0)], |acc, _| {
                    let q = random_pure(&mut rng, 1);
                    acc.iter().flat_map(|a| q.iter().map(move |b| a * b)).collect()
                });
                (rng.random::<f64>(), psi)
            })
            .collect();
        let z: f64 = members.iter().map(|m| m.0).sum();
        let members: Vec<_> = members.into_iter().map(|(w, p)| (w / z, p)).collect();
        let (pops, c) = mixture_summary(n, &members);
        let r = criterion_distillability(c, &pops).unwrap();
        assert!(r.margin <= 1e-12, "case {case}: {r:?}");
    }
}

#[test]
fn biseparable_states_never_pass_genuine_entanglement() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for case in 0..200 {
        let n = 2 + case % 3;
        let members: Vec<(f64, Vec<Complex64>)> = (0..1 + case % 3)
            .map(|_| {
                // A nontrivial bipartition: neither side empty.
                let mask_a = 1 + rng.random_range(0..(1usize << n) - 2);
                let ka = (mask_a as u32).count_ones() as usize;
                let psi_a = random_pure(&mut rng, ka);
                let psi_b = random_pure(&mut rng, n - ka);
                (rng.random::<f64>(), product(n, mask_a, &psi_a, &psi_b))
            })
            .collect();
        let z: f64 = members.iter().map(|m| m.0).sum();
        let members: Vec<_> = members.into_iter().map(|(w, p)| (w / z, p)).collect();
        let (pops, c) = mixture_summary(n, &members);
        let r = criterion_genuine_entanglement(c, &pops).unwrap();
        assert!(r.margin <= 1e-12, "case {case}: {r:?}");
    }
}

#[test]
fn ghz_states_pass_both_criteria() {
    for n in 2..=4 {
        let s = BranchPairState::ghz_with(n, 0.95, 0.9).unwrap();
        let pops = DiagonalPopulations::from_state(&s).unwrap();
        let c = Estimate::exact(s.coherence());
        assert!(criterion_distillability(c, &pops).unwrap().passed);
        assert!(criterion_genuine_entanglement(c, &pops).unwrap().passed);
    }
}
