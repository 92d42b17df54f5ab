//! Pearson-type goodness-of-fit statistic for the fitted ZIGP regressions.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::design::Target;
use super::ZigpCoefficients;
use crate::error::{Error, Result};
use crate::match_data::WeightedObservation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub chi_sq: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `Σ (x_i - m_i)^2 / m_i` over unweighted pairs of (observed, fitted mean).
pub fn chi_square_statistic(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    pairs.into_iter().map(|(x, m)| (x - m).powi(2) / m).sum()
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_p_value(chi_sq: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("chi-square needs positive degrees of freedom".into()));
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(dist.sf(chi_sq).clamp(0.0, 1.0))
}

/// Statistic and p-value with fitted means `(1 - omega) mu_i` and
/// `df = n - (number of coefficients + 2)`.
pub fn chi_square_gof(
    observations: &[WeightedObservation],
    target: Target,
    coefficients: &ZigpCoefficients,
) -> Result<GoodnessOfFit> {
    let n_params = target.n_coefficients() + 2;
    if observations.len() <= n_params {
        return Err(Error::Domain(format!(
            "{} observations leave no degrees of freedom for {n_params} parameters",
            observations.len()
        )));
    }
    let df = observations.len() - n_params;
    let keep = 1.0 - coefficients.omega();
    let chi_sq = chi_square_statistic(observations.iter().map(|o| {
        let eta: f64 = target
            .row(o)
            .iter()
            .zip(coefficients.alphas())
            .map(|(x, a)| x * a)
            .sum();
        (f64::from(target.response(o)), keep * eta.exp())
    }));
    Ok(GoodnessOfFit {
        chi_sq,
        df,
        p_value: chi_square_p_value(chi_sq, df)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_fit_is_zero() {
        let chi = chi_square_statistic([(1.0, 1.0), (2.5, 2.5)]);
        assert_eq!(chi, 0.0);
        assert_eq!(chi_square_p_value(chi, 3).unwrap(), 1.0);
    }

    #[test]
    fn single_term() {
        assert_eq!(chi_square_statistic([(2.0, 1.0)]), 1.0);
    }

    #[test]
    fn zero_df_rejected() {
        assert!(chi_square_p_value(1.0, 0).is_err());
    }

    /// Regularized upper incomplete gamma Q(a, x) by series (x < a + 1) or
    /// Lentz continued fraction, independent of statrs.
    fn upper_gamma_q(a: f64, x: f64) -> f64 {
        let ln_pre = a * x.ln() - x - statrs::function::gamma::ln_gamma(a);
        if x < a + 1.0 {
            let (mut term, mut sum, mut ap) = (1.0 / a, 1.0 / a, a);
            for _ in 0..500 {
                ap += 1.0;
                term *= x / ap;
                sum += term;
                if term.abs() < sum.abs() * 1e-16 {
                    break;
                }
            }
            1.0 - sum * ln_pre.exp()
        } else {
            let tiny = 1e-300;
            let mut b = x + 1.0 - a;
            let mut c = 1.0 / tiny;
            let mut d = 1.0 / b;
            let mut h = d;
            for i in 1..500 {
                let an = -(i as f64) * (i as f64 - a);
                b += 2.0;
                d = an * d + b;
                if d.abs() < tiny {
                    d = tiny;
                }
                c = b + an / c;
                if c.abs() < tiny {
                    c = tiny;
                }
                d = 1.0 / d;
                let delta = d * c;
                h *= delta;
                if (delta - 1.0).abs() < 1e-16 {
                    break;
                }
            }
            ln_pre.exp() * h
        }
    }

    #[test]
    fn p_value_matches_incomplete_gamma_oracle() {
        let oracle = upper_gamma_q(5.0, 5.0);
        assert_abs_diff_eq!(oracle, 0.440_493_285_065_212_2, epsilon = 1e-12);
        assert_abs_diff_eq!(chi_square_p_value(10.0, 10).unwrap(), oracle, epsilon = 1e-10);
        for &(chi, df) in &[(3.0, 7usize), (25.0, 12), (60.0, 40), (0.5, 1)] {
            let q = upper_gamma_q(df as f64 / 2.0, chi / 2.0);
            assert_abs_diff_eq!(chi_square_p_value(chi, df).unwrap(), q, epsilon = 1e-10);
        }
    }
}
