//! Weighted bivariate Poisson regression via EM over the shared component.
//!
//! `log lambda1 = b1 . x`, `log lambda2 = b2 . x`, `lambda0` constant. The E-step
//! computes `E[X0 | y1, y2] = lambda0 f(y1 - 1, y2 - 1) / f(y1, y2)`; the M-step
//! refits both log-linear rates on the pseudo-counts `y - E[X0]` and sets
//! `lambda0` to the weighted mean of `E[X0]`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::design::{Design, Target};
use super::poisson::irls;
use super::PoissonCoefficients;
use crate::error::{Error, Result};
use crate::match_data::WeightedObservation;
use crate::zigp_dist::BivPoissonParams;

/// Floor for the shared rate so `log_tau` stays finite.
const MIN_LAMBDA0: f64 = 1e-10;
const MAX_EM_ITER: usize = 5000;
const EM_TOL: f64 = 1e-11;
/// 90% point of the 50:50 mixture of chi2(0) and chi2(1): the likelihood-ratio
/// threshold for `lambda0 = 0` at the 5% level.
const BOUNDARY_LR: f64 = 2.705_543_454_095_404;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivPoissonCoefficients {
    /// Goals scored by the subject team (`lambda1`).
    pub scored: PoissonCoefficients,
    /// Goals scored by the opponent (`lambda2`).
    pub conceded: PoissonCoefficients,
    /// Constant log of the shared component `lambda0`.
    pub log_tau: f64,
}

impl BivPoissonCoefficients {
    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivFitReport {
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    /// Log-likelihood of the nested independent model (`lambda0 = 0`).
    pub independent_loglik: f64,
    /// `lambda0` is not distinguishable from zero by a boundary likelihood-ratio test.
    pub lambda0_at_boundary: bool,
}

fn pair_loglik(design: &Design, y1: &[f64], y2: &[f64], b1: &DVector<f64>, b2: &DVector<f64>, l0: f64) -> f64 {
    (0..design.n())
        .map(|i| {
            let l1 = design.eta(b1, i).exp();
            let l2 = design.eta(b2, i).exp();
            let p = BivPoissonParams::new(l1, l2, l0)
                .map(|bp| bp.pmf(y1[i] as u32, y2[i] as u32))
                .unwrap_or(0.0);
            design.w[i] * p.ln()
        })
        .sum()
}

/// Fits the constant-`lambda0` bivariate model on a team's matches
/// (own goals, opponent goals). With `fix_lambda0_zero` the two margins are
/// fitted as independent Poisson regressions.
pub fn fit_bivpois(
    observations: &[WeightedObservation],
    min_observations: usize,
    fix_lambda0_zero: bool,
) -> Result<(BivPoissonCoefficients, BivFitReport)> {
    if observations.len() < min_observations {
        return Err(Error::InsufficientData {
            available: observations.len(),
            required: min_observations,
        });
    }
    let design = Design::from_observations(observations, Target::Scored);
    let y1: Vec<f64> = observations.iter().map(|o| f64::from(o.goals_for())).collect();
    let y2: Vec<f64> = observations.iter().map(|o| f64::from(o.goals_against())).collect();
    let total_w = design.total_weight();

    let ind1 = irls(&design, &y1)?;
    let ind2 = irls(&design, &y2)?;
    let independent_loglik = ind1.loglik + ind2.loglik;

    let pack = |b1: &DVector<f64>, b2: &DVector<f64>, l0: f64| BivPoissonCoefficients {
        scored: PoissonCoefficients::from_raw(&design.to_raw(b1)),
        conceded: PoissonCoefficients::from_raw(&design.to_raw(b2)),
        log_tau: l0.max(MIN_LAMBDA0).ln(),
    };

    if fix_lambda0_zero {
        return Ok((
            pack(&ind1.internal, &ind2.internal, 0.0),
            BivFitReport {
                converged: true,
                iterations: ind1.iterations + ind2.iterations,
                loglik: independent_loglik,
                independent_loglik,
                lambda0_at_boundary: true,
            },
        ));
    }

    // start from the independent fit with a small shared rate carved out of both margins
    let mean1 = y1.iter().zip(&design.w).map(|(a, b)| a * b).sum::<f64>() / total_w;
    let mean2 = y2.iter().zip(&design.w).map(|(a, b)| a * b).sum::<f64>() / total_w;
    let mut l0 = (0.1 * mean1.min(mean2)).max(0.01);
    let mut b1 = ind1.internal.clone();
    let mut b2 = ind2.internal.clone();
    let mut ll = pair_loglik(&design, &y1, &y2, &b1, &b2, l0);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_EM_ITER {
        iterations += 1;
        let mut s = vec![0.0; design.n()];
        for i in 0..design.n() {
            if y1[i] == 0.0 || y2[i] == 0.0 {
                continue;
            }
            let l1 = design.eta(&b1, i).exp();
            let l2 = design.eta(&b2, i).exp();
            let bp = BivPoissonParams::new(l1, l2, l0)?;
            let (a, b) = (y1[i] as u32, y2[i] as u32);
            s[i] = l0 * bp.pmf(a - 1, b - 1) / bp.pmf(a, b);
        }
        let r1: Vec<f64> = y1.iter().zip(&s).map(|(y, e)| (y - e).max(0.0)).collect();
        let r2: Vec<f64> = y2.iter().zip(&s).map(|(y, e)| (y - e).max(0.0)).collect();
        b1 = irls(&design, &r1)?.internal;
        b2 = irls(&design, &r2)?.internal;
        l0 = (s.iter().zip(&design.w).map(|(a, b)| a * b).sum::<f64>() / total_w).max(MIN_LAMBDA0);
        let next = pair_loglik(&design, &y1, &y2, &b1, &b2, l0);
        let change = (next - ll).abs() / (next.abs() + 1.0);
        ll = next;
        if change < EM_TOL || l0 <= MIN_LAMBDA0 {
            converged = true;
            break;
        }
    }

    // EM can stall near lambda0 = 0 below the independent optimum
    let (coefs, loglik) = if ll < independent_loglik {
        (pack(&ind1.internal, &ind2.internal, 0.0), independent_loglik)
    } else {
        (pack(&b1, &b2, l0), ll)
    };
    // weights rescaled to mean one before the likelihood-ratio comparison
    let lr = 2.0 * (loglik - independent_loglik) * design.n() as f64 / total_w;
    Ok((
        coefs,
        BivFitReport {
            converged,
            iterations,
            loglik,
            independent_loglik,
            lambda0_at_boundary: lr < BOUNDARY_LR,
        },
    ))
}
