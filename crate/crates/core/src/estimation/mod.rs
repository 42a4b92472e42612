//! Recovery of populations, coherence, fidelity, entanglement verdicts,
//! decay timescales and the scaling exponent from measurement records.

mod criteria;
mod decay;
pub(crate) mod lsq;
mod parity_fit;
mod pmt;
mod scaling;

pub use criteria::{
    bootstrap_criteria, criterion_distillability, criterion_fidelity_threshold,
    criterion_genuine_entanglement, CriterionResult, DiagonalPopulations,
};
pub use decay::{fit_decay_timescale, DecayCurve, DecayFit, DecayModel, DecayPoint};
pub use parity_fit::{bootstrap_parity_fit, fit_parity_curve, fit_pmt_parity_curve, fit_parity_points, ParityFit, ParityPoint};
pub use pmt::{
    bayes_populations_pmt, pmt_classify, pmt_confusion_matrix, pmt_parity_scores, pmt_shot_posterior, PmtPosterior,
};
pub use scaling::{fit_scaling_exponent, ScalingFit, ScalingPoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::Shot;

/// A point estimate with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64, n_samples: usize) -> Self {
        debug_assert!(std_error >= 0.0 || std_error.is_nan());
        Self {
            value,
            std_error,
            n_samples,
        }
    }

    /// An exactly known value (analytic mode).
    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0, 0)
    }

    /// Distance from `truth` in units of the standard error.
    pub fn z_score(&self, truth: f64) -> f64 {
        (self.value - truth) / self.std_error
    }
}

/// Streaming mean and variance (Welford), mergeable across partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: usize,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        let mean = (na * self.mean + nb * other.mean) / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / count as f64;
        Self { count, mean, m2 }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Estimate of the mean with the standard error of the mean.
    pub fn estimate(&self) -> Estimate {
        let sem = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
        } else {
            0.0
        };
        Estimate::new(self.mean, sem, self.count)
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Fraction of shots landing on 0…0 or 1…1, with binomial standard error.
pub fn estimate_populations_camera(shots: &[Shot], n: usize) -> Result<Estimate> {
    if shots.is_empty() {
        return Err(Error::invalid("no shots to estimate populations from"));
    }
    let all_ones = crate::register::Bitstring::ones(n);
    let hits = shots
        .iter()
        .filter(|s| s.0 == 0 || **s == all_ones)
        .count();
    let m = shots.len() as f64;
    let p = hits as f64 / m;
    Ok(Estimate::new(p, (p * (1.0 - p) / m).sqrt(), shots.len()))
}

/// F = (P + C)/2 with independent uncertainties.
pub fn ghz_fidelity(populations: Estimate, coherence: Estimate) -> Estimate {
    Estimate::new(
        0.5 * (populations.value + coherence.value),
        0.5 * populations.std_error.hypot(coherence.std_error),
        populations.n_samples + coherence.n_samples,
    )
}

/// ε = −½ ln(C_t / C_0), with first-order error propagation.
///
/// Returns `InvalidArgument` when `C_t ≤ 0` (the error probability is
/// undefined once the coherence is lost in noise).
pub fn coherence_to_error_probability(c_t: Estimate, c_0: Estimate) -> Result<Estimate> {
    if !(c_t.value > 0.0) || !(c_0.value > 0.0) {
        return Err(Error::invalid(format!(
            "coherence must be positive to define an error probability (C_t = {}, C_0 = {})",
            c_t.value, c_0.value
        )));
    }
    let eps = -0.5 * (c_t.value / c_0.value).ln();
    let rel = (c_t.std_error / c_t.value).hypot(c_0.std_error / c_0.value);
    Ok(Estimate::new(eps, 0.5 * rel, c_t.n_samples))
}
