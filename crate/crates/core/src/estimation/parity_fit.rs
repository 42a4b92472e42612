use std::f64::consts::TAU;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lsq::weighted_linear_fit;
use super::{Estimate, MeanAccumulator};
use crate::error::{Error, Result};
use super::pmt::{pmt_classify, pmt_parity_scores};
use crate::measurement::{parity_from_shots, ParityDataset, PmtParityDataset, PmtRates};
use crate::rng;

/// Parity measured at one analysis phase. `shots == 0` marks an exact
/// (noiseless) value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityPoint {
    pub phi: f64,
    pub value: f64,
    pub shots: usize,
}

/// Result of fitting A·cos(nφ + φ₀) + B to parity data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityFit {
    /// C = |A|, the parity oscillation amplitude.
    pub coherence: Estimate,
    pub phase_offset: f64,
    pub vertical_offset: Estimate,
    pub chi2: f64,
    pub dof: usize,
}

fn distinct_phases(n: usize, points: &[ParityPoint]) -> usize {
    let mut phases: Vec<f64> = points
        .iter()
        .map(|p| (n as f64 * p.phi).rem_euclid(TAU))
        .collect();
    phases.sort_by(f64::total_cmp);
    phases.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if phases.len() > 1 && phases[0] + TAU - phases[phases.len() - 1] < 1e-9 {
        phases.pop();
    }
    phases.len()
}

/// Weighted least-squares fit with the oscillation frequency fixed at n.
///
/// The model is linear in (a, b, B) = (A cos φ₀, −A sin φ₀, B). A first
/// unweighted pass supplies model-predicted binomial variances (1 − ŷ²)/M
/// for the second, weighted pass; the amplitude error follows from the
/// parameter covariance by first-order propagation.
pub fn fit_parity_points(n: usize, points: &[ParityPoint]) -> Result<ParityFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 phase settings, got {}", points.len())));
    }
    if distinct_phases(n, points) < 3 {
        return Err(Error::invalid("phase settings must cover at least 3 distinct points of the parity period"));
    }
    let nf = n as f64;
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![(nf * p.phi).cos(), (nf * p.phi).sin(), 1.0])
        .collect();
    let y: Vec<f64> = points.iter().map(|p| p.value).collect();
    let exact = points.iter().all(|p| p.shots == 0);

    let first = weighted_linear_fit(&rows, &y, &vec![1.0; points.len()])?;
    let (fit, absolute) = if exact {
        (first, false)
    } else {
        let w: Vec<f64> = rows
            .iter()
            .zip(points)
            .map(|(r, p)| {
                let m = p.shots.max(1) as f64;
                let yhat: f64 = r.iter().zip(first.params.iter()).map(|(a, b)| a * b).sum();
                let var = (1.0 - yhat * yhat).max(1.0 / m) / m;
                1.0 / var
            })
            .collect();
        (weighted_linear_fit(&rows, &y, &w)?, true)
    };
    let cov = if absolute { fit.cov.clone() } else { fit.scaled_cov(false) };
    let (a, b, offset) = (fit.params[0], fit.params[1], fit.params[2]);
    let amp = a.hypot(b);
    let var_amp = if amp > 0.0 {
        (a * a * cov[(0, 0)] + 2.0 * a * b * cov[(0, 1)] + b * b * cov[(1, 1)]) / (amp * amp)
    } else {
        0.5 * (cov[(0, 0)] + cov[(1, 1)])
    };
    let n_samples = points.iter().map(|p| p.shots).sum();
    Ok(ParityFit {
        coherence: Estimate::new(amp, var_amp.max(0.0).sqrt(), n_samples),
        phase_offset: (-b).atan2(a),
        vertical_offset: Estimate::new(offset, cov[(2, 2)].max(0.0).sqrt(), n_samples),
        chi2: fit.chi2,
        dof: fit.dof,
    })
}

fn points_from_dataset(dataset: &ParityDataset) -> Result<Vec<ParityPoint>> {
    dataset
        .entries
        .iter()
        .map(|e| {
            parity_from_shots(&e.shots).map(|p| ParityPoint {
                phi: e.phi,
                value: p.value,
                shots: e.shots.len(),
            })
        })
        .collect()
}

pub fn fit_parity_curve(dataset: &ParityDataset) -> Result<ParityFit> {
    fit_parity_points(dataset.n, &points_from_dataset(dataset)?)
}

/// Parity curve from PMT counts.
///
/// Each shot is assigned its maximum-likelihood bright-ion number j and
/// scored with the misclassification-corrected value from
/// [`pmt_parity_scores`]. The scores scatter more than ±1 signs, so the
/// amplitude error is inflated by the pooled ratio of observed to binomial
/// variance.
pub fn fit_pmt_parity_curve(dataset: &PmtParityDataset, rates: PmtRates) -> Result<ParityFit> {
    let scores = pmt_parity_scores(rates, dataset.n)?;
    let mut excess = (0.0, 0.0);
    let points = dataset
        .entries
        .iter()
        .map(|(phi, shots)| {
            if shots.is_empty() {
                return Err(Error::invalid("cannot estimate parity from zero shots"));
            }
            let acc: MeanAccumulator = shots
                .iter()
                .map(|s| scores[pmt_classify(s.counts, rates, dataset.n)])
                .collect();
            let m = acc.count() as f64;
            let mean = acc.mean();
            let var = acc.estimate().std_error.powi(2) * m;
            excess.0 += var * m;
            excess.1 += (1.0 - mean * mean).max(1.0 / m) * m;
            Ok(ParityPoint {
                phi: *phi,
                value: mean,
                shots: shots.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fit = fit_parity_points(dataset.n, &points)?;
    let kappa = if excess.1 > 0.0 { (excess.0 / excess.1).max(1.0) } else { 1.0 };
    fit.coherence.std_error *= kappa.sqrt();
    fit.vertical_offset.std_error *= kappa.sqrt();
    Ok(fit)
}

/// Standard deviation of the fitted amplitude over `resamples` bootstrap
/// replicas. Each replica resamples the shots of every setting with
/// replacement; only the even/odd count of a setting enters the fit, so this
/// draws that count from the matching binomial.
pub fn bootstrap_parity_fit(dataset: &ParityDataset, resamples: usize, seed: u64) -> Result<Estimate> {
    if resamples < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 resamples"));
    }
    let base = points_from_dataset(dataset)?;
    let replicas: Vec<Result<f64>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &[r as u64]);
            let pts: Vec<ParityPoint> = base
                .iter()
                .map(|p| {
                    let m = p.shots as u64;
                    let p_even = (0.5 * (1.0 + p.value)).clamp(0.0, 1.0);
                    let even = Binomial::new(m, p_even).expect("valid binomial").sample(&mut rng);
                    ParityPoint {
                        value: (2.0 * even as f64 - m as f64) / m as f64,
                        ..*p
                    }
                })
                .collect();
            fit_parity_points(dataset.n, &pts).map(|f| f.coherence.value)
        })
        .collect();
    let acc: MeanAccumulator = replicas.into_iter().collect::<Result<Vec<f64>>>()?.into_iter().collect();
    let sd = acc.estimate().std_error * (acc.count() as f64).sqrt();
    Ok(Estimate::new(acc.mean(), sd, acc.count()))
}
