//! Entanglement and distillability tests on GHZ-frame data.
//!
//! All criteria compare a coherence statistic against a threshold built from
//! the diagonal populations of non-GHZ strings, grouped into complementary
//! pairs (s, s̄) with s ∉ {0…0, 1…1}:
//!
//! * fidelity: F > ½;
//! * distillability: 2|c| > max over pairs of (ρ_ss + ρ_s̄s̄);
//! * genuine N-particle entanglement: |c| > Σ over pairs of √(ρ_ss·ρ_s̄s̄).

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::parity_fit::{fit_parity_points, ParityPoint};
use super::{Estimate, MeanAccumulator};
use crate::error::{Error, Result};
use crate::measurement::{parity_from_shots, ParityDataset, Shot};
use crate::register::{Bitstring, BranchPairState};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    /// statistic − threshold.
    pub margin: f64,
    /// margin / σ(margin); `None` when the inputs are exact.
    pub sigma: Option<f64>,
    pub passed: bool,
}

impl CriterionResult {
    fn new(name: &str, statistic: f64, threshold: f64, margin_std_error: f64) -> Self {
        let margin = statistic - threshold;
        let sigma = (margin_std_error > 0.0).then(|| margin / margin_std_error);
        Self {
            name: name.to_string(),
            statistic,
            threshold,
            margin,
            sigma,
            passed: margin > 0.0,
        }
    }
}

/// Diagonal populations over bitstrings in the GHZ frame, sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPopulations {
    pub n: usize,
    pub probs: BTreeMap<Bitstring, f64>,
    /// Number of shots the frequencies came from; 0 for exact values.
    pub n_shots: usize,
}

impl DiagonalPopulations {
    pub fn from_shots(shots: &[Shot], n: usize) -> Self {
        let mut counts: BTreeMap<Bitstring, f64> = BTreeMap::new();
        for &s in shots {
            *counts.entry(s).or_default() += 1.0;
        }
        let m = shots.len().max(1) as f64;
        counts.values_mut().for_each(|v| *v /= m);
        Self {
            n,
            probs: counts,
            n_shots: shots.len(),
        }
    }

    /// Exact diagonal of a GHZ-frame state, with leaked population spread
    /// uniformly over the 2^n − 2 non-branch strings (n ≤ 20).
    pub fn from_state(state: &BranchPairState) -> Result<Self> {
        let g = state.to_ghz_frame()?;
        let n = g.n();
        if n > 20 {
            return Err(Error::invalid("explicit diagonal limited to n <= 20"));
        }
        let mut probs = BTreeMap::new();
        probs.insert(Bitstring::zeros(), g.p_a());
        probs.insert(Bitstring::ones(n), g.p_b());
        let others = (1u64 << n) - 2;
        if g.p_leak() > 0.0 && others > 0 {
            let each = g.p_leak() / others as f64;
            for s in 1..(1u64 << n) - 1 {
                probs.insert(Bitstring(s), each);
            }
        }
        Ok(Self { n, probs, n_shots: 0 })
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    fn get(&self, s: Bitstring) -> f64 {
        self.probs.get(&s).copied().unwrap_or(0.0)
    }

    /// (ρ_ss, ρ_s̄s̄) for every complementary non-GHZ pair with any weight.
    fn pairs(&self) -> Vec<(Bitstring, Bitstring, f64, f64)> {
        let ones = Bitstring::ones(self.n);
        let mut seen = BTreeMap::new();
        for &s in self.probs.keys() {
            if s == Bitstring::zeros() || s == ones {
                continue;
            }
            let sbar = s.complement(self.n);
            let key = s.min(sbar);
            seen.entry(key).or_insert_with(|| {
                let other = key.complement(self.n);
                (key, other, self.get(key), self.get(other))
            });
        }
        seen.into_values().collect()
    }

    fn distillability_threshold(&self) -> f64 {
        self.pairs().iter().map(|&(_, _, a, b)| a + b).fold(0.0, f64::max)
    }

    fn genuine_threshold(&self) -> f64 {
        self.pairs().iter().map(|&(_, _, a, b)| (a * b).sqrt()).sum()
    }
}

fn check_total(pops: &DiagonalPopulations) -> Result<()> {
    if pops.total() > 1.0 + 1e-9 {
        return Err(Error::invalid(format!("diagonal populations sum to {}", pops.total())));
    }
    Ok(())
}

/// F > ½ implies genuine N-particle entanglement.
pub fn criterion_fidelity_threshold(fidelity: Estimate) -> CriterionResult {
    CriterionResult::new("fidelity", fidelity.value, 0.5, fidelity.std_error)
}

/// Multipartite distillability; σ by first-order propagation, treating the
/// largest pair sum as a binomial frequency.
pub fn criterion_distillability(c_magnitude: Estimate, pops: &DiagonalPopulations) -> Result<CriterionResult> {
    check_total(pops)?;
    let threshold = pops.distillability_threshold();
    let thr_var = if pops.n_shots > 0 {
        threshold * (1.0 - threshold) / pops.n_shots as f64
    } else {
        0.0
    };
    let sd = (4.0 * c_magnitude.std_error.powi(2) + thr_var).sqrt();
    Ok(CriterionResult::new("distillability", 2.0 * c_magnitude.value, threshold, sd))
}

/// Genuine N-particle entanglement; σ by first-order (multinomial delta
/// method) propagation of the threshold.
pub fn criterion_genuine_entanglement(c_magnitude: Estimate, pops: &DiagonalPopulations) -> Result<CriterionResult> {
    check_total(pops)?;
    let threshold = pops.genuine_threshold();
    let thr_var = if pops.n_shots > 0 {
        // ∂T/∂ρ_s = ½√(ρ_s̄/ρ_s) for pairs with both members populated.
        let grads: Vec<(f64, f64)> = pops
            .pairs()
            .into_iter()
            .filter(|&(_, _, a, b)| a > 0.0 && b > 0.0)
            .flat_map(|(_, _, a, b)| [(0.5 * (b / a).sqrt(), a), (0.5 * (a / b).sqrt(), b)])
            .collect();
        let mean: f64 = grads.iter().map(|(g, p)| g * p).sum();
        let sq: f64 = grads.iter().map(|(g, p)| g * g * p).sum();
        ((sq - mean * mean) / pops.n_shots as f64).max(0.0)
    } else {
        0.0
    };
    let sd = (c_magnitude.std_error.powi(2) + thr_var).sqrt();
    Ok(CriterionResult::new("genuine_entanglement", c_magnitude.value, threshold, sd))
}

/// Distillability and genuine-entanglement criteria with σ from a bootstrap
/// over shots: each replica resamples the direct-population shots and the
/// shots of every parity setting with replacement, refits |c| and recomputes
/// both margins.
pub fn bootstrap_criteria(
    direct_shots: &[Shot],
    parity: &ParityDataset,
    c_magnitude: Estimate,
    resamples: usize,
    seed: u64,
) -> Result<Vec<CriterionResult>> {
    if resamples < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 resamples"));
    }
    if direct_shots.is_empty() {
        return Err(Error::invalid("no population shots to bootstrap"));
    }
    let n = parity.n;
    let pops = DiagonalPopulations::from_shots(direct_shots, n);
    let distill = criterion_distillability(c_magnitude, &pops)?;
    let genuine = criterion_genuine_entanglement(c_magnitude, &pops)?;

    let margins: Vec<Result<(f64, f64)>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &[r as u64]);
            let m = direct_shots.len();
            let resampled: Vec<Shot> = (0..m).map(|_| direct_shots[rng.random_range(0..m)]).collect();
            let pts = parity
                .entries
                .iter()
                .map(|e| {
                    let k = e.shots.len();
                    let shots: Vec<Shot> = (0..k).map(|_| e.shots[rng.random_range(0..k)]).collect();
                    parity_from_shots(&shots).map(|p| ParityPoint {
                        phi: e.phi,
                        value: p.value,
                        shots: k,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let c = 0.5 * fit_parity_points(n, &pts)?.coherence.value;
            let p = DiagonalPopulations::from_shots(&resampled, n);
            Ok((2.0 * c - p.distillability_threshold(), c - p.genuine_threshold()))
        })
        .collect();
    let margins = margins.into_iter().collect::<Result<Vec<_>>>()?;
    let sd = |f: fn(&(f64, f64)) -> f64| {
        let acc: MeanAccumulator = margins.iter().map(f).collect();
        acc.estimate().std_error * (acc.count() as f64).sqrt()
    };
    let (sd_d, sd_g) = (sd(|m| m.0), sd(|m| m.1));
    Ok(vec![
        CriterionResult::new("distillability", distill.statistic, distill.threshold, sd_d),
        CriterionResult::new("genuine_entanglement", genuine.statistic, genuine.threshold, sd_g),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pops(n: usize, entries: &[(u64, f64)]) -> DiagonalPopulations {
        DiagonalPopulations {
            n,
            probs: entries.iter().map(|&(s, p)| (Bitstring(s), p)).collect(),
            n_shots: 0,
        }
    }

    #[test]
    fn fidelity_threshold() {
        let r = criterion_fidelity_threshold(Estimate::new(0.508, 0.009, 1));
        assert!(r.passed);
        assert_relative_eq!(r.margin, 0.008, epsilon = 1e-12);
        assert_relative_eq!(r.sigma.unwrap(), 0.008 / 0.009, epsilon = 1e-12);
        assert!(!criterion_fidelity_threshold(Estimate::new(0.474, 0.007, 1)).passed);
        let exact = criterion_fidelity_threshold(Estimate::exact(1.0));
        assert!(exact.passed);
        assert_eq!(exact.sigma, None);
    }

    #[test]
    fn ideal_ghz_passes_everything() {
        let d = DiagonalPopulations::from_state(&BranchPairState::ghz_ideal(4).unwrap()).unwrap();
        let c = Estimate::exact(0.5);
        let r = criterion_distillability(c, &d).unwrap();
        assert_eq!(r.threshold, 0.0);
        assert!(r.passed);
        let r = criterion_genuine_entanglement(c, &d).unwrap();
        assert_eq!(r.threshold, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn no_coherence_fails() {
        let d = DiagonalPopulations::from_state(&BranchPairState::ghz_with(3, 0.9, 0.0).unwrap()).unwrap();
        assert!(!criterion_distillability(Estimate::exact(0.0), &d).unwrap().passed);
        assert!(!criterion_genuine_entanglement(Estimate::exact(0.0), &d).unwrap().passed);
    }

    #[test]
    fn three_qubit_pair_example() {
        // ρ_001 = ρ_110 = 0.1, |c| = 0.12.
        let d = pops(3, &[(0, 0.4), (7, 0.4), (1, 0.1), (6, 0.1)]);
        let r = criterion_distillability(Estimate::exact(0.12), &d).unwrap();
        assert_relative_eq!(r.statistic, 0.24);
        assert_relative_eq!(r.threshold, 0.2);
        assert!(r.passed);
        let g = criterion_genuine_entanglement(Estimate::exact(0.12), &d).unwrap();
        assert_relative_eq!(g.threshold, 0.1);
        assert!(g.passed);
    }

    #[test]
    fn uniform_diagonal_margin() {
        for n in 2..=8 {
            let each = 1.0 / (1u64 << n) as f64;
            let d = DiagonalPopulations {
                n,
                probs: (0..1u64 << n).map(|s| (Bitstring(s), each)).collect(),
                n_shots: 0,
            };
            let r = criterion_genuine_entanglement(Estimate::exact(0.0), &d).unwrap();
            let expected = -(((1u64 << (n - 1)) - 1) as f64) * each;
            assert_relative_eq!(r.margin, expected, epsilon = 1e-14);
            assert!(!r.passed);
        }
    }

    #[test]
    fn rejects_overfull_diagonal() {
        let d = pops(2, &[(0, 0.7), (3, 0.7)]);
        assert!(criterion_distillability(Estimate::exact(0.1), &d).is_err());
    }

    fn arb_diag(n: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
        (proptest::collection::vec(0.0f64..1.0, 1 << n), 0.0f64..1.0).prop_map(|(raw, cfrac)| {
            let total: f64 = raw.iter().sum::<f64>().max(1e-9);
            let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let c = cfrac * (probs[0] * probs[probs.len() - 1]).sqrt();
            (probs, c)
        })
    }

    proptest! {
        #[test]
        fn adding_leak_never_raises_margins(
            (probs, c) in arb_diag(4),
            from_branch in 0.0f64..1.0,
            target in 1u64..15,
        ) {
            let n = 4;
            let base = DiagonalPopulations { n, probs: probs.iter().enumerate().map(|(s, &p)| (Bitstring(s as u64), p)).collect(), n_shots: 0 };
            let moved = from_branch * probs[0];
            let mut leaky = base.clone();
            *leaky.probs.get_mut(&Bitstring(0)).unwrap() -= moved;
            *leaky.probs.get_mut(&Bitstring(target)).unwrap() += moved;
            let ce = Estimate::exact(c);
            let before = (criterion_distillability(ce, &base).unwrap(), criterion_genuine_entanglement(ce, &base).unwrap());
            let after = (criterion_distillability(ce, &leaky).unwrap(), criterion_genuine_entanglement(ce, &leaky).unwrap());
            prop_assert!(after.0.margin <= before.0.margin + 1e-15);
            prop_assert!(after.1.margin <= before.1.margin + 1e-15);
            let f_before = criterion_fidelity_threshold(Estimate::exact(0.5 * (probs[0] + probs[15] + 2.0 * c)));
            let f_after = criterion_fidelity_threshold(Estimate::exact(0.5 * (probs[0] - moved + probs[15] + 2.0 * c)));
            prop_assert!(f_after.margin <= f_before.margin);
        }
    }
}
