//! BFGS minimizer with central-difference gradients.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BfgsSettings {
    pub max_iterations: usize,
    /// Relative objective change below which (together with `step_tol`) the run stops.
    pub rel_f_tol: f64,
    pub step_tol: f64,
    /// Gradient infinity-norm that counts as stationary on its own.
    pub grad_tol: f64,
    pub fd_step: f64,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_f_tol: 1e-9,
            step_tol: 1e-8,
            grad_tol: 1e-9,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn numeric_gradient<F: Fn(&DVector<f64>) -> f64>(f: &F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        let orig = probe[i];
        probe[i] = orig + step;
        let up = f(&probe);
        probe[i] = orig - step;
        let down = f(&probe);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    g
}

/// Minimizes `f` starting at `x0`. Non-finite objective values are treated as
/// infeasible and rejected by the line search.
pub fn minimize<F: Fn(&DVector<f64>) -> f64>(f: F, x0: DVector<f64>, settings: &BfgsSettings) -> BfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = numeric_gradient(&f, &x, settings.fd_step);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh_hessian = true;

    while iterations < settings.max_iterations {
        iterations += 1;
        if g.amax() < settings.grad_tol {
            converged = true;
            break;
        }
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            h_inv.fill_with_identity();
            dir = -g.clone();
            slope = g.dot(&dir);
        }

        // Armijo backtracking
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + alpha * &dir;
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh_hessian {
                break;
            }
            h_inv.fill_with_identity();
            fresh_hessian = true;
            continue;
        };

        let g_new = numeric_gradient(&f, &x_new, settings.fd_step);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let rel_change = (fx - f_new).abs() / fx.abs().max(1.0);
        let step_norm = s.norm();

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
            fresh_hessian = false;
        }

        x = x_new;
        fx = f_new;
        g = g_new;

        if rel_change < settings.rel_f_tol && step_norm < settings.step_tol {
            converged = true;
            break;
        }
    }

    let gradient_norm = g.norm();
    if !converged && gradient_norm < settings.grad_tol * (n as f64).sqrt() {
        converged = true;
    }
    BfgsOutcome {
        x,
        f: fx,
        gradient_norm,
        iterations,
        converged,
    }
}
