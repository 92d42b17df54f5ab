//! Weighted maximum-likelihood ZIGP regression.
//!
//! `log mu = a . x`, `phi = 1 + exp(beta)`, `omega = exp(gamma) / (1 + exp(gamma))`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::design::{Design, Target};
use super::optimizer::{minimize, BfgsSettings};
use super::poisson::irls;
use super::{FitReport, ZigpCoefficients};
use crate::error::{Error, Result};
use crate::match_data::WeightedObservation;

/// Link values are clamped here; beyond it `phi - 1` and `omega` are numerically 0 or 1.
const LINK_BOUND: f64 = 40.0;
const INIT_BETA: f64 = -6.0;
const RESTART_SD: f64 = 0.25;

/// How a distribution link enters the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Free,
    /// Pinned at the boundary: `phi = 1` or `omega = 0`.
    Boundary,
}

#[derive(Debug, Clone, Copy)]
pub struct ZigpFitOptions {
    pub dispersion: Link,
    pub zero_inflation: Link,
    pub max_restarts: usize,
    pub seed: u64,
    pub bfgs: BfgsSettings,
}

impl Default for ZigpFitOptions {
    fn default() -> Self {
        Self {
            dispersion: Link::Free,
            zero_inflation: Link::Free,
            max_restarts: 5,
            seed: 0,
            bfgs: BfgsSettings::default(),
        }
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Log-pmf of the ZIGP law written directly in terms of the link values, so
/// that `beta -> -inf` and `gamma -> -inf` are exact Poisson.
fn ln_pmf_links(k: f64, eta: f64, beta: f64, gamma: f64) -> f64 {
    let mu = eta.exp();
    let disp = beta.exp(); // phi - 1
    let phi = 1.0 + disp;
    let ln_phi = disp.ln_1p();
    let omega = logistic(gamma);
    // ln(1 - omega) = -ln(1 + e^gamma)
    let ln_keep = -softplus(gamma);
    if k == 0.0 {
        let gp0 = (-mu / phi).exp();
        (omega + (1.0 - omega) * gp0).ln()
    } else {
        let shifted = mu + disp * k;
        ln_keep + eta + (k - 1.0) * shifted.ln() - statrs::function::gamma::ln_gamma(k + 1.0) - k * ln_phi
            - shifted / phi
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

struct Layout {
    p: usize,
    dispersion: Link,
    zero_inflation: Link,
}

impl Layout {
    /// Splits an optimizer vector into (coefficients, beta, gamma).
    fn unpack(&self, theta: &DVector<f64>) -> (DVector<f64>, f64, f64) {
        let coef = theta.rows(0, self.p).into_owned();
        let mut idx = self.p;
        let beta = match self.dispersion {
            Link::Free => {
                idx += 1;
                theta[idx - 1].clamp(-LINK_BOUND, LINK_BOUND)
            }
            Link::Boundary => f64::NEG_INFINITY,
        };
        let gamma = match self.zero_inflation {
            Link::Free => theta[idx].clamp(-LINK_BOUND, LINK_BOUND),
            Link::Boundary => f64::NEG_INFINITY,
        };
        (coef, beta, gamma)
    }

    fn pack(&self, coef: &DVector<f64>, beta: f64, gamma: f64) -> DVector<f64> {
        let mut v: Vec<f64> = coef.iter().copied().collect();
        if self.dispersion == Link::Free {
            v.push(beta);
        }
        if self.zero_inflation == Link::Free {
            v.push(gamma);
        }
        DVector::from_vec(v)
    }
}

/// Weighted log-likelihood `Σ w ln p(y | coefficients)` on the internal scale.
fn design_loglik(design: &Design, coef: &DVector<f64>, beta: f64, gamma: f64) -> f64 {
    (0..design.n())
        .map(|i| design.w[i] * ln_pmf_links(design.y[i], design.eta(coef, i), beta, gamma))
        .sum()
}

/// Weighted log-likelihood of raw-scale coefficients on a team's observations.
pub fn zigp_loglik(coefficients: &ZigpCoefficients, observations: &[WeightedObservation], target: Target) -> f64 {
    observations
        .iter()
        .map(|o| {
            let eta: f64 = target
                .row(o)
                .iter()
                .zip(coefficients.alphas())
                .map(|(x, a)| x * a)
                .sum();
            let y = f64::from(target.response(o));
            o.weight * ln_pmf_links(y, eta, coefficients.beta, coefficients.gamma)
        })
        .sum()
}

/// Initial zero-inflation: the observed excess of zeros over the fitted Poisson GLM.
fn initial_gamma(design: &Design, coef: &DVector<f64>) -> f64 {
    let total = design.total_weight();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..design.n() {
        if design.y[i] == 0.0 {
            observed += design.w[i];
        }
        expected += design.w[i] * (-design.eta(coef, i).exp()).exp();
    }
    let (p_obs, p_pois) = (observed / total, expected / total);
    let excess = if p_pois < 1.0 {
        (p_obs - p_pois) / (1.0 - p_pois)
    } else {
        0.0
    };
    logit(excess.clamp(0.01, 0.99))
}

/// Starting point from the Poisson GLM; an all-zero response starts from a
/// small intercept instead.
fn initial_coefficients(design: &Design) -> DVector<f64> {
    match irls(design, &design.y) {
        Ok(fit) => fit.internal,
        Err(_) => {
            let mut v = DVector::zeros(design.p());
            v[0] = -3.0;
            v
        }
    }
}

/// Fits one ZIGP regression on a team's weighted observations.
pub fn fit_zigp(
    observations: &[WeightedObservation],
    target: Target,
    min_observations: usize,
    options: &ZigpFitOptions,
) -> Result<(ZigpCoefficients, FitReport)> {
    let total_weight: f64 = observations.iter().map(|o| o.weight).sum();
    if observations.len() < min_observations || total_weight <= 0.0 {
        return Err(Error::InsufficientData {
            available: observations.len(),
            required: min_observations,
        });
    }
    let design = Design::from_observations(observations, target);
    let layout = Layout {
        p: design.p(),
        dispersion: options.dispersion,
        zero_inflation: options.zero_inflation,
    };

    let coef0 = initial_coefficients(&design);
    let gamma0 = initial_gamma(&design, &coef0);
    let theta0 = layout.pack(&coef0, INIT_BETA, gamma0);

    // mean negative log-likelihood per unit weight
    let objective = |theta: &DVector<f64>| {
        let (coef, beta, gamma) = layout.unpack(theta);
        -design_loglik(&design, &coef, beta, gamma) / total_weight
    };
    let f_init = objective(&theta0);

    let mut best = minimize(objective, theta0.clone(), &options.bfgs);
    let mut iterations = best.iterations;
    let mut restarts = 0;
    if !best.converged && options.max_restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let noise = Normal::new(0.0, RESTART_SD).expect("valid sd");
        while restarts < options.max_restarts && !best.converged {
            restarts += 1;
            let start = theta0.map(|v| v + noise.sample(&mut rng));
            let trial = minimize(objective, start, &options.bfgs);
            iterations += trial.iterations;
            let better = match (trial.converged, best.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => trial.f < best.f,
            };
            if better {
                best = trial;
            }
        }
    }
    // the reported optimum never falls below the starting point
    if best.f > f_init {
        best.x = theta0;
        best.f = f_init;
    }

    let (coef, beta, gamma) = layout.unpack(&best.x);
    let raw = design.to_raw(&coef);
    let coefficients = ZigpCoefficients::from_raw(&raw, beta, gamma);
    let final_loglik = -best.f * total_weight;
    if !best.converged {
        let mut point = raw.clone();
        point.extend([beta, gamma]);
        return Err(Error::Fit {
            restarts,
            best_point: point,
            best_loglik: final_loglik,
            gradient_norm: best.gradient_norm,
        });
    }
    let gof = super::gof::chi_square_gof(observations, target, &coefficients)?;
    Ok((
        coefficients,
        FitReport {
            converged: true,
            iterations,
            restarts,
            final_loglik,
            initial_loglik: -f_init * total_weight,
            gradient_norm: best.gradient_norm,
            n_obs: observations.len(),
            total_weight,
            chi_sq: gof.chi_sq,
            df: gof.df,
            p_value: gof.p_value,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zigp_dist::ZigpParams;
    use approx::assert_abs_diff_eq;

    #[test]
    fn link_pmf_matches_kernel() {
        let (eta, beta, gamma) = (0.3f64, -1.2f64, -2.0f64);
        let p = ZigpParams::new(eta.exp(), 1.0 + beta.exp(), logistic(gamma)).unwrap();
        for k in 0..20 {
            assert_abs_diff_eq!(ln_pmf_links(f64::from(k), eta, beta, gamma), p.ln_pmf(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn boundary_links_are_poisson() {
        let eta = 0.4f64;
        let p = ZigpParams::poisson(eta.exp()).unwrap();
        for k in 0..15 {
            let v = ln_pmf_links(f64::from(k), eta, f64::NEG_INFINITY, f64::NEG_INFINITY);
            assert_abs_diff_eq!(v, p.ln_pmf(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn logistic_is_stable() {
        assert_abs_diff_eq!(logistic(0.0), 0.5);
        assert_abs_diff_eq!(logistic(-2.942621), 0.05008642, epsilon = 5e-9);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
        assert_abs_diff_eq!(logit(logistic(1.7)), 1.7, epsilon = 1e-12);
    }
}
