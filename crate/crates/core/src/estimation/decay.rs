use serde::{Deserialize, Serialize};

use super::lsq::levenberg_marquardt;
use super::Estimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t: f64,
    pub coherence: Estimate,
}

/// Coherence against waiting time, with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    points: Vec<DecayPoint>,
}

impl DecayCurve {
    pub fn new(points: Vec<DecayPoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::invalid("decay curve times must be strictly increasing"));
        }
        if points.iter().any(|p| !(p.t >= 0.0)) {
            return Err(Error::invalid("decay curve times must be >= 0"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[DecayPoint] {
        &self.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayModel {
    /// C₀·e^{−t/T₂}
    Exponential,
    /// C₀·e^{−½(t/τ)²}
    Gaussian,
    /// C₀·exp(−(e^{−γt} + γt − 1)/(T₂γ))
    FullOu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub c0: Estimate,
    /// T₂ (exponential, full-OU) or τ (gaussian), in seconds.
    pub timescale: Estimate,
    /// Correlation rate, full-OU model only.
    pub gamma: Option<Estimate>,
    pub chi2: f64,
    pub dof: usize,
}

fn ou_shape(x: f64) -> f64 {
    if x < 1e-3 {
        x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)))
    } else {
        (-x).exp_m1() + x
    }
}

/// Model value with parameters (C₀, ln T, [ln γ]).
fn evaluate(model: DecayModel, p: &[f64], t: f64) -> f64 {
    let scale = p[1].exp();
    match model {
        DecayModel::Exponential => p[0] * (-t / scale).exp(),
        DecayModel::Gaussian => p[0] * (-0.5 * (t / scale).powi(2)).exp(),
        DecayModel::FullOu => {
            let g = p[2].exp();
            p[0] * (-ou_shape(g * t) / (scale * g)).exp()
        }
    }
}

/// Time at which the curve first drops below C₀/e, linearly interpolated.
fn one_over_e_time(points: &[DecayPoint]) -> f64 {
    let c0 = points[0].coherence.value;
    let target = c0 / std::f64::consts::E;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.coherence.value <= target {
            let f = (a.coherence.value - target) / (a.coherence.value - b.coherence.value).max(1e-300);
            return a.t + f * (b.t - a.t);
        }
    }
    // Never reached: extrapolate from the last point.
    let last = points[points.len() - 1];
    let ratio = (last.coherence.value / c0).clamp(1e-6, 1.0 - 1e-9);
    (last.t / -ratio.ln()).max(last.t)
}

/// Nonlinear least squares of C(t) = C₀·model(t).
///
/// Points are weighted by 1/σ² when every point carries an uncertainty;
/// otherwise all weights are one and the covariance is scaled by the
/// residual variance. Scale parameters are fitted in log space so they stay
/// positive.
pub fn fit_decay_timescale(curve: &DecayCurve, model: DecayModel) -> Result<DecayFit> {
    let pts = curve.points();
    if pts.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 decay points, got {}", pts.len())));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.t).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.coherence.value).collect();
    let absolute = pts.iter().all(|p| p.coherence.std_error > 0.0);
    let w: Vec<f64> = if absolute {
        pts.iter().map(|p| p.coherence.std_error.powi(-2)).collect()
    } else {
        vec![1.0; pts.len()]
    };

    let c0 = y[0].max(1e-6);
    let t_e = one_over_e_time(pts).max(1e-300);
    let starts: Vec<Vec<f64>> = match model {
        DecayModel::Exponential => vec![vec![c0, t_e.ln()]],
        DecayModel::Gaussian => vec![vec![c0, (t_e / 2f64.sqrt()).ln()]],
        // Start from both asymptotic regimes and keep the better fit.
        DecayModel::FullOu => [1e-2, 1.0, 1e2]
            .iter()
            .map(|&g| {
                let gamma = g / t_e;
                // Pick T so that the OU exponent equals one at t_e.
                let scale = ou_shape(gamma * t_e) / gamma;
                vec![c0, scale.ln(), gamma.ln()]
            })
            .collect(),
    };

    let mut best: Option<super::lsq::NonlinearFit> = None;
    let mut last_err = None;
    for p0 in starts {
        match levenberg_marquardt(|p, x| evaluate(model, p, x), &p0, &t, &y, &w) {
            Ok(f) if best.as_ref().is_none_or(|b| f.chi2 < b.chi2) => best = Some(f),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let fit = best.ok_or_else(|| last_err.unwrap_or_else(|| Error::FitFailure("no fit".into())))?;
    let scale = if absolute || fit.dof == 0 {
        1.0
    } else {
        fit.chi2 / fit.dof as f64
    };
    let sd = |i: usize| (fit.cov[(i, i)] * scale).max(0.0).sqrt();
    let n_samples = pts.iter().map(|p| p.coherence.n_samples).sum();
    let timescale = fit.params[1].exp();
    let gamma = (model == DecayModel::FullOu).then(|| {
        let g = fit.params[2].exp();
        Estimate::new(g, g * sd(2), n_samples)
    });
    Ok(DecayFit {
        model,
        c0: Estimate::new(fit.params[0], sd(0), n_samples),
        timescale: Estimate::new(timescale, timescale * sd(1), n_samples),
        gamma,
        chi2: fit.chi2,
        dof: fit.dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn curve(times: &[f64], f: impl Fn(f64) -> f64) -> DecayCurve {
        DecayCurve::new(
            times
                .iter()
                .map(|&t| DecayPoint {
                    t,
                    coherence: Estimate::exact(f(t)),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_unordered_or_short() {
        let p = |t| DecayPoint {
            t,
            coherence: Estimate::exact(1.0),
        };
        assert!(DecayCurve::new(vec![p(0.0), p(0.0)]).is_err());
        assert!(DecayCurve::new(vec![p(0.2), p(0.1)]).is_err());
        let short = DecayCurve::new(vec![p(0.0), p(1.0)]).unwrap();
        assert!(fit_decay_timescale(&short, DecayModel::Exponential).is_err());
    }

    #[test]
    fn exponential_recovery() {
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.03).collect();
        let c = curve(&times, |t| 0.97 * (-t / 0.095).exp());
        let fit = fit_decay_timescale(&c, DecayModel::Exponential).unwrap();
        assert_relative_eq!(fit.timescale.value, 0.095, max_relative = 1e-6);
        assert_relative_eq!(fit.c0.value, 0.97, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_recovery() {
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.004).collect();
        let c = curve(&times, |t| (-0.5 * (t / 0.011f64).powi(2)).exp());
        let fit = fit_decay_timescale(&c, DecayModel::Gaussian).unwrap();
        assert_relative_eq!(fit.timescale.value, 0.011, max_relative = 1e-6);
    }

    #[test]
    fn full_ou_recovery() {
        let (t2, gamma) = (0.05, 40.0);
        let times: Vec<f64> = (0..16).map(|i| i as f64 * 0.01).collect();
        let c = curve(&times, |t| 0.9 * (-ou_shape(gamma * t) / (t2 * gamma)).exp());
        let fit = fit_decay_timescale(&c, DecayModel::FullOu).unwrap();
        assert_relative_eq!(fit.timescale.value, t2, max_relative = 1e-4);
        assert_relative_eq!(fit.gamma.unwrap().value, gamma, max_relative = 1e-3);
    }
}
