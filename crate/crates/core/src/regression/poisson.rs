//! Weighted Poisson log-linear regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use super::design::Design;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct IrlsFit {
    /// Coefficients on the internal (rescaled) covariate scale.
    pub internal: DVector<f64>,
    pub deviance: f64,
    pub loglik: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 100;

/// Weighted Poisson deviance `2 Σ w (y ln(y/mu) - (y - mu))`.
pub fn deviance(y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .zip(w)
        .map(|((&yi, &mi), &wi)| {
            let term = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
            wi * (term - (yi - mi))
        })
        .sum::<f64>()
}

/// Weighted Poisson log-likelihood; responses may be non-integer (EM pseudo-counts).
pub fn loglik(y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .zip(w)
        .map(|((&yi, &mi), &wi)| wi * (yi * mi.ln() - mi - statrs::function::gamma::ln_gamma(yi + 1.0)))
        .sum()
}

/// Fits `log E[y] = X b` with prior weights. Columns without spread get a zero
/// coefficient. Responses must be non-negative with positive weighted total.
pub fn irls(design: &Design, y: &[f64]) -> Result<IrlsFit> {
    let n = design.n();
    let p = design.p();
    let w = &design.w;
    let total_w: f64 = w.iter().sum();
    if n == 0 || total_w <= 0.0 {
        return Err(Error::InsufficientData {
            available: n,
            required: 1,
        });
    }
    if y.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Domain("negative or non-finite response".into()));
    }
    let ybar = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total_w;
    if ybar <= 0.0 {
        return Err(Error::Fit {
            restarts: 0,
            best_point: vec![],
            best_loglik: 0.0,
            gradient_norm: f64::NAN,
        });
    }

    let active: Vec<usize> = design
        .constant_columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| !**c)
        .map(|(j, _)| j)
        .collect();
    let q = active.len();
    let x = DMatrix::from_fn(n, q, |i, k| design.x[(i, active[k])]);

    let mut beta = DVector::zeros(q);
    beta[0] = ybar.ln();
    let mut mu: Vec<f64> = vec![ybar; n];
    let mut dev = deviance(y, &mu, w);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITER {
        iterations += 1;
        let mut xtwx = DMatrix::<f64>::zeros(q, q);
        let mut xtwz = DVector::<f64>::zeros(q);
        for i in 0..n {
            let eta = x.row(i).dot(&beta.transpose());
            let wi = w[i] * mu[i];
            let zi = eta + (y[i] - mu[i]) / mu[i];
            let row = x.row(i);
            for a in 0..q {
                xtwz[a] += wi * row[a] * zi;
                for b in 0..=a {
                    xtwx[(a, b)] += wi * row[a] * row[b];
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        let Some(chol) = xtwx.cholesky() else {
            return Err(Error::Fit {
                restarts: 0,
                best_point: beta.iter().copied().collect(),
                best_loglik: f64::NAN,
                gradient_norm: f64::NAN,
            });
        };
        let next = chol.solve(&xtwz);
        let step = (&next - &beta).amax();
        beta = next;
        mu = (0..n).map(|i| x.row(i).dot(&beta.transpose()).exp()).collect();
        if mu.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(Error::Fit {
                restarts: 0,
                best_point: beta.iter().copied().collect(),
                best_loglik: f64::NAN,
                gradient_norm: f64::NAN,
            });
        }
        let new_dev = deviance(y, &mu, w);
        let dev_change = (dev - new_dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        if step < 1e-10 || dev_change < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Fit {
            restarts: 0,
            best_point: beta.iter().copied().collect(),
            best_loglik: loglik(y, &mu, w),
            gradient_norm: f64::NAN,
        });
    }

    let mut internal = DVector::zeros(p);
    for (k, &j) in active.iter().enumerate() {
        internal[j] = beta[k];
    }
    Ok(IrlsFit {
        internal,
        deviance: dev,
        loglik: loglik(y, &mu, w),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn saturated_mean() {
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 1800.0, 0.0]).collect();
        let d = Design::new(&rows, vec![2.0; 20], vec![1.0; 20]);
        let fit = irls(&d, &d.y).unwrap();
        let raw = d.to_raw(&fit.internal);
        assert_abs_diff_eq!(raw[0], 2f64.ln(), epsilon = 1e-12);
        assert_eq!(raw[1], 0.0);
        assert_eq!(raw[2], 0.0);
    }

    #[test]
    fn all_zero_response_is_degenerate() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, 1800.0 + i as f64, 0.0]).collect();
        let d = Design::new(&rows, vec![0.0; 5], vec![1.0; 5]);
        assert!(matches!(irls(&d, &d.y), Err(Error::Fit { .. })));
    }

    #[test]
    fn weight_scale_invariance() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![1.0, 1500.0 + 17.0 * i as f64, f64::from(i % 3) - 1.0])
            .collect();
        let y: Vec<f64> = (0..40).map(|i| f64::from((i * 7 % 5) as u32)).collect();
        let w: Vec<f64> = (0..40).map(|i| 0.5 + (i % 4) as f64).collect();
        let d1 = Design::new(&rows, y.clone(), w.clone());
        let d2 = Design::new(&rows, y.clone(), w.iter().map(|v| 2.0 * v).collect());
        let a = d1.to_raw(&irls(&d1, &y).unwrap().internal);
        let b = d2.to_raw(&irls(&d2, &y).unwrap().internal);
        for (u, v) in a.iter().zip(&b) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-10);
        }
    }
}
