//! Small weighted least-squares solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct LinearFit {
    pub params: DVector<f64>,
    /// (XᵀWX)⁻¹, not scaled by the residual variance.
    pub cov: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl LinearFit {
    /// Covariance scaled by max(1, χ²/dof), or by χ²/dof when the weights
    /// carry no absolute scale.
    pub fn scaled_cov(&self, weights_are_absolute: bool) -> DMatrix<f64> {
        if self.dof == 0 {
            return self.cov.clone();
        }
        let red = self.chi2 / self.dof as f64;
        let factor = if weights_are_absolute { red.max(1.0) } else { red };
        &self.cov * factor
    }
}

/// Minimise Σ wᵢ(yᵢ − xᵢ·β)².
pub(crate) fn weighted_linear_fit(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let m = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if m < p || p == 0 {
        return Err(Error::FitFailure(format!("{m} points cannot determine {p} parameters")));
    }
    let x = DMatrix::from_fn(m, p, |i, j| rows[i][j]);
    let wv = DVector::from_column_slice(w);
    let yv = DVector::from_column_slice(y);
    let xtw = DMatrix::from_fn(p, m, |j, i| x[(i, j)] * wv[i]);
    let normal = &xtw * &x;
    let cov = normal
        .clone()
        .try_inverse()
        .filter(|c| c.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::FitFailure("singular normal equations".into()))?;
    let params = &cov * (&xtw * &yv);
    let resid = &yv - &x * &params;
    let chi2 = resid.iter().zip(w).map(|(r, wi)| wi * r * r).sum();
    Ok(LinearFit {
        params,
        cov,
        chi2,
        dof: m - p,
    })
}

#[derive(Debug, Clone)]
pub(crate) struct NonlinearFit {
    pub params: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
}

/// Levenberg–Marquardt with a central-difference Jacobian.
pub(crate) fn levenberg_marquardt<F>(model: F, p0: &[f64], t: &[f64], y: &[f64], w: &[f64]) -> Result<NonlinearFit>
where
    F: Fn(&[f64], f64) -> f64,
{
    let m = t.len();
    let np = p0.len();
    if m < np {
        return Err(Error::FitFailure(format!("{m} points cannot determine {np} parameters")));
    }
    let chi2_of = |p: &[f64]| -> f64 {
        t.iter()
            .zip(y)
            .zip(w)
            .map(|((&ti, &yi), &wi)| wi * (yi - model(p, ti)).powi(2))
            .sum()
    };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(m, np, |i, j| {
            let h = 1e-6 * p[j].abs().max(1e-6);
            let mut hi = p.to_vec();
            let mut lo = p.to_vec();
            hi[j] += h;
            lo[j] -= h;
            (model(&hi, t[i]) - model(&lo, t[i])) / (2.0 * h)
        })
    };

    let mut p = p0.to_vec();
    let mut chi2 = chi2_of(&p);
    if !chi2.is_finite() {
        return Err(Error::FitFailure("model is not finite at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..500 {
        let j = jacobian(&p);
        let r = DVector::from_fn(m, |i, _| y[i] - model(&p, t[i]));
        let jtw = DMatrix::from_fn(np, m, |a, i| j[(i, a)] * w[i]);
        let jtj = &jtw * &j;
        let grad = &jtw * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&grad) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = chi2_of(&trial);
            if c.is_finite() && c <= chi2 {
                let rel = (chi2 - c) / chi2.max(1e-300);
                let small_step = step
                    .iter()
                    .zip(&p)
                    .all(|(s, v)| s.abs() <= 1e-12 * v.abs().max(1e-12));
                p = trial;
                chi2 = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || small_step || chi2 < 1e-30 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: we sit at a minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure("Levenberg–Marquardt did not converge in 500 iterations".into()));
    }
    let j = jacobian(&p);
    let jtw = DMatrix::from_fn(np, m, |a, i| j[(i, a)] * w[i]);
    let cov = (&jtw * &j)
        .try_inverse()
        .ok_or_else(|| Error::FitFailure("singular curvature matrix at the optimum".into()))?;
    Ok(NonlinearFit {
        params: p,
        cov,
        chi2,
        dof: m - np,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 - 0.5 * x).collect();
        let fit = weighted_linear_fit(&rows, &y, &[1.0; 10]).unwrap();
        assert_relative_eq!(fit.params[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.params[1], -0.5, epsilon = 1e-12);
        assert!(fit.chi2 < 1e-20);
    }

    #[test]
    fn singular_design_is_a_fit_failure() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let err = weighted_linear_fit(&rows, &[1.0, 2.0, 3.0], &[1.0; 3]).unwrap_err();
        assert!(matches!(err, Error::FitFailure(_)));
    }

    #[test]
    fn lm_recovers_exponential() {
        let t: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&x| 0.8 * (-x / 0.37).exp()).collect();
        let fit = levenberg_marquardt(|p, x| p[0] * (-x / p[1]).exp(), &[1.0, 1.0], &t, &y, &[1.0; 12]).unwrap();
        assert_relative_eq!(fit.params[0], 0.8, max_relative = 1e-8);
        assert_relative_eq!(fit.params[1], 0.37, max_relative = 1e-8);
    }
}
