use serde::{Deserialize, Serialize};

use super::lsq::weighted_linear_fit;
use super::Estimate;
use crate::error::{Error, Result};

/// Relative error probability ε(N)/ε(1) for one register size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub ratio: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub alpha_err: f64,
    /// ln of the fitted prefactor.
    pub intercept: f64,
    pub points: Vec<ScalingPoint>,
}

/// Weighted regression of ln(ratio) on ln(N).
///
/// Weights are 1/(σ/ratio)². Points without an uncertainty borrow the
/// smallest relative error in the set; when none has one the fit is
/// unweighted and the covariance is scaled by the residual variance. Two
/// distinct sizes suffice (the exponent error then rests on the input
/// errors alone).
pub fn fit_scaling_exponent(points: &[ScalingPoint]) -> Result<ScalingFit> {
    if points.iter().any(|p| !(p.ratio.value > 0.0)) {
        return Err(Error::invalid("relative error probabilities must be positive"));
    }
    if !points.iter().any(|p| p.n == 1) {
        return Err(Error::invalid("scaling data must include the N = 1 reference"));
    }
    let mut sizes: Vec<usize> = points.iter().map(|p| p.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::invalid("need at least two distinct register sizes"));
    }
    let rel: Vec<f64> = points.iter().map(|p| p.ratio.std_error / p.ratio.value).collect();
    let floor = rel.iter().copied().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min);
    let absolute = floor.is_finite();
    let w: Vec<f64> = rel
        .iter()
        .map(|&r| if absolute { r.max(floor).powi(-2) } else { 1.0 })
        .collect();
    let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![1.0, (p.n as f64).ln()]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.ratio.value.ln()).collect();
    let fit = weighted_linear_fit(&rows, &y, &w)?;
    let cov = fit.scaled_cov(absolute);
    Ok(ScalingFit {
        alpha: fit.params[1],
        alpha_err: cov[(1, 1)].max(0.0).sqrt(),
        intercept: fit.params[0],
        points: points.to_vec(),
    })
}
