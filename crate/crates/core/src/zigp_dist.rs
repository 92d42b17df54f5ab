//! Probability kernels for goal counts.
//!
//! The zero-inflated generalized Poisson (ZIGP) law with mean parameter `mu`,
//! dispersion `phi >= 1` and zero-inflation `omega in [0, 1)` has
//!
//! ```text
//! P[X = 0] = omega + (1 - omega) * exp(-mu / phi)
//! P[X = k] = (1 - omega) * mu * (mu + (phi - 1) k)^(k - 1) / k! * phi^(-k)
//!            * exp(-(mu + (phi - 1) k) / phi)                      (k >= 1)
//! ```
//!
//! so `phi = 1, omega = 0` is the ordinary Poisson law. The bivariate Poisson
//! law is the distribution of `(X1 + X0, X2 + X0)` for independent Poisson
//! components.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Largest goal count kept in probability tables and used by the samplers.
/// Tail mass beyond it is folded into the last cell.
pub const K_MAX: usize = 30;

/// Folded probability table over `0..=K_MAX`.
pub type GoalTable = [f64; K_MAX + 1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZigpParams {
    mu: f64,
    phi: f64,
    omega: f64,
}

impl ZigpParams {
    pub fn new(mu: f64, phi: f64, omega: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::ParameterDomain(format!("mu must be positive, got {mu}")));
        }
        if !(phi.is_finite() && phi >= 1.0) {
            return Err(Error::ParameterDomain(format!("phi must be >= 1, got {phi}")));
        }
        if !(0.0..1.0).contains(&omega) {
            return Err(Error::ParameterDomain(format!(
                "omega must lie in [0, 1), got {omega}"
            )));
        }
        Ok(Self { mu, phi, omega })
    }

    /// Plain Poisson law with the given rate.
    pub fn poisson(mu: f64) -> Result<Self> {
        Self::new(mu, 1.0, 0.0)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Copy with the mean parameter multiplied by `factor` (used for extra time).
    pub fn scale_mu(&self, factor: f64) -> Result<Self> {
        Self::new(self.mu * factor, self.phi, self.omega)
    }

    /// Log-probability of the generalized Poisson part alone (no inflation).
    fn ln_gp(&self, k: u32) -> f64 {
        let kf = f64::from(k);
        let shifted = self.mu + (self.phi - 1.0) * kf;
        if k == 0 {
            return -self.mu / self.phi;
        }
        self.mu.ln() + (kf - 1.0) * shifted.ln() - ln_factorial(u64::from(k))
            - kf * self.phi.ln()
            - shifted / self.phi
    }

    pub fn ln_pmf(&self, k: u32) -> f64 {
        if k == 0 {
            (self.omega + (1.0 - self.omega) * self.ln_gp(0).exp()).ln()
        } else {
            (1.0 - self.omega).ln() + self.ln_gp(k)
        }
    }

    pub fn pmf(&self, k: u32) -> f64 {
        self.ln_pmf(k).exp()
    }

    /// `(mean, variance)` of the distribution.
    pub fn mean_var(&self) -> (f64, f64) {
        let keep = 1.0 - self.omega;
        let mean = keep * self.mu;
        let var = keep * self.mu * (self.phi * self.phi + self.omega * self.mu);
        (mean, var)
    }

    pub fn mean(&self) -> f64 {
        self.mean_var().0
    }

    /// Probabilities for `0..=K_MAX` with the upper tail folded into `K_MAX`.
    pub fn table(&self) -> GoalTable {
        let mut table = [0.0; K_MAX + 1];
        let mut acc = 0.0;
        for (k, cell) in table.iter_mut().enumerate().take(K_MAX) {
            *cell = self.pmf(k as u32);
            acc += *cell;
        }
        table[K_MAX] = (1.0 - acc).max(0.0);
        table
    }

    /// Draws a goal count by inversion of the folded cumulative table.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for k in 0..K_MAX as u32 {
            cum += self.pmf(k);
            if u < cum {
                return k;
            }
        }
        K_MAX as u32
    }
}

pub fn zigp_pmf(k: u32, p: &ZigpParams) -> f64 {
    p.pmf(k)
}

pub fn zigp_mean_var(p: &ZigpParams) -> (f64, f64) {
    p.mean_var()
}

pub fn zigp_sample<R: Rng + ?Sized>(p: &ZigpParams, rng: &mut R) -> u32 {
    p.sample(rng)
}

/// Poisson pmf; `lambda = 0` is the point mass at zero.
pub fn poisson_pmf(k: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = f64::from(k);
    (kf * lambda.ln() - lambda - ln_factorial(u64::from(k))).exp()
}

pub fn poisson_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    // rate validated by callers, Poisson::new only fails on non-positive or non-finite input
    let dist = Poisson::new(lambda).expect("positive finite rate");
    let draw: f64 = dist.sample(rng);
    draw as u32
}

/// Parameters `(lambda1, lambda2, lambda0)` of a bivariate Poisson pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivPoissonParams {
    lambda1: f64,
    lambda2: f64,
    lambda0: f64,
}

impl BivPoissonParams {
    pub fn new(lambda1: f64, lambda2: f64, lambda0: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2), ("lambda0", lambda0)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be a finite non-negative rate, got {v}"
                )));
            }
        }
        Ok(Self {
            lambda1,
            lambda2,
            lambda0,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn marginal_means(&self) -> (f64, f64) {
        (self.lambda1 + self.lambda0, self.lambda2 + self.lambda0)
    }

    /// Joint pmf, summing over the shared component `m = 0..=min(i, j)`.
    pub fn pmf(&self, i: u32, j: u32) -> f64 {
        (0..=i.min(j))
            .map(|m| {
                poisson_pmf(i - m, self.lambda1)
                    * poisson_pmf(j - m, self.lambda2)
                    * poisson_pmf(m, self.lambda0)
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        let x1 = poisson_sample(self.lambda1, rng);
        let x2 = poisson_sample(self.lambda2, rng);
        let x0 = poisson_sample(self.lambda0, rng);
        (x1 + x0, x2 + x0)
    }
}

pub fn bivpois_pmf(i: u32, j: u32, p: &BivPoissonParams) -> f64 {
    p.pmf(i, j)
}

pub fn bivpois_sample<R: Rng + ?Sized>(p: &BivPoissonParams, rng: &mut R) -> (u32, u32) {
    p.sample(rng)
}
