mod common;

use approx::assert_abs_diff_eq;
use common::{boundary_ml_by_bfgs, coefficients, draw_location, obs, simulate_scored};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zigp_core::match_data::{Location, WeightedObservation};
use zigp_core::regression::{
    fit_bivpois, fit_poisson, fit_zigp, zigp_loglik, Link, Target, ZigpCoefficients, ZigpFitOptions,
};
use zigp_core::zigp_dist::BivPoissonParams;

fn recovery_sample() -> (ZigpCoefficients, Vec<WeightedObservation>) {
    let truth = coefficients([1.0, -0.001, 0.2], -8.0, -4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(20221120);
    let data = simulate_scored(&truth, 5000, (100.0, 2500.0), &mut rng);
    (truth, data)
}

fn moderate_sample(seed: u64, n: usize) -> Vec<WeightedObservation> {
    let truth = coefficients([2.0, -0.0009, 0.25], -1.0, -1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = simulate_scored(&truth, n, (1300.0, 2100.0), &mut rng);
    for (i, o) in data.iter_mut().enumerate() {
        o.weight = 0.2 + (i % 7) as f64 * 0.3;
    }
    data
}

#[test]
fn zigp_recovers_synthetic_coefficients() {
    let (truth, data) = recovery_sample();
    let (fit, report) = fit_zigp(&data, Target::Scored, 10, &ZigpFitOptions::default()).unwrap();
    assert!(report.converged);
    assert!((fit.alpha0 - truth.alpha0).abs() <= 0.05, "alpha0 {}", fit.alpha0);
    assert!((fit.alpha1 - truth.alpha1).abs() <= 0.05, "alpha1 {}", fit.alpha1);
    assert!((fit.alpha2 - truth.alpha2).abs() <= 0.05, "alpha2 {}", fit.alpha2);
    assert!((fit.phi() - truth.phi()).abs() <= 0.01, "phi {}", fit.phi());
    assert!((fit.omega() - truth.omega()).abs() <= 0.01, "omega {}", fit.omega());
}

#[test]
fn poisson_recovers_synthetic_coefficients() {
    let truth = coefficients([1.0, -0.001, 0.2], f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(20221120);
    let data = simulate_scored(&truth, 5000, (100.0, 2500.0), &mut rng);
    let (fit, deviance) = fit_poisson(&data, Target::Scored).unwrap();
    assert!(deviance.is_finite() && deviance > 0.0);
    assert!((fit.alpha0 - 1.0).abs() <= 0.05);
    assert!((fit.alpha1 + 0.001).abs() <= 0.05);
    assert!((fit.alpha2 - 0.2).abs() <= 0.05);
}

#[test]
fn boundary_links_reproduce_poisson_glm() {
    let data = moderate_sample(7, 400);
    let options = ZigpFitOptions {
        dispersion: Link::Boundary,
        zero_inflation: Link::Boundary,
        ..ZigpFitOptions::default()
    };
    let (zigp, _) = fit_zigp(&data, Target::Scored, 10, &options).unwrap();
    let (glm, _) = fit_poisson(&data, Target::Scored).unwrap();
    assert_abs_diff_eq!(zigp.alpha0, glm.alpha0, epsilon = 1e-4);
    assert_abs_diff_eq!(zigp.alpha1, glm.alpha1, epsilon = 1e-4);
    assert_abs_diff_eq!(zigp.alpha2, glm.alpha2, epsilon = 1e-4);
    assert_eq!(zigp.phi(), 1.0);
    assert_eq!(zigp.omega(), 0.0);
    // the production fit starts from IRLS, so also reach the optimum from zero
    let reference = boundary_ml_by_bfgs(&data);
    for (u, v) in zigp.alphas().zip(reference) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-4);
    }
}

#[test]
fn boundary_likelihood_is_poisson_per_observation() {
    let data = moderate_sample(8, 200);
    let c = coefficients([0.7, -0.0004, 0.1], f64::NEG_INFINITY, f64::NEG_INFINITY);
    for o in &data {
        let single = WeightedObservation { weight: 1.0, ..o.clone() };
        let mu = (0.7 - 0.0004 * o.elo_opp() + 0.1 * o.loc()).exp();
        let k = o.goals_for();
        let ln_fact: f64 = (1..=k).map(|i| f64::from(i).ln()).sum();
        let oracle = f64::from(k) * mu.ln() - mu - ln_fact;
        let ll = zigp_loglik(&c, std::slice::from_ref(&single), Target::Scored);
        assert_abs_diff_eq!(ll, oracle, epsilon = 1e-8);
    }
}

#[test]
fn all_zero_goals_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<WeightedObservation> = (0..50)
        .map(|_| obs(rng.random_range(1400.0..2000.0), draw_location(&mut rng), 0, 1, 1.0))
        .collect();
    match fit_zigp(&data, Target::Scored, 10, &ZigpFitOptions::default()) {
        Ok((fit, report)) => {
            assert!(report.final_loglik.is_finite());
            let mean = (1.0 - fit.omega()) * fit.mu(1700.0, 0.0, 0);
            assert!(mean < 0.05, "fitted mean {mean}");
        }
        Err(zigp_core::Error::Fit { best_loglik, .. }) => assert!(best_loglik.is_finite()),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn reported_optimum_improves_on_start() {
    for seed in 0..5 {
        let data = moderate_sample(100 + seed, 300);
        let (_, report) = fit_zigp(&data, Target::Scored, 10, &ZigpFitOptions::default()).unwrap();
        assert!(report.final_loglik >= report.initial_loglik);
    }
}

/// Central finite-difference gradient of the mean log-likelihood in raw coordinates.
fn raw_gradient(c: &ZigpCoefficients, data: &[WeightedObservation], target: Target) -> Vec<f64> {
    let total: f64 = data.iter().map(|o| o.weight).sum();
    let mut x: Vec<f64> = c.alphas().chain([c.beta, c.gamma]).collect();
    let n = x.len();
    let build = |v: &[f64]| ZigpCoefficients {
        alpha0: v[0],
        alpha1: v[1],
        alpha2: v[2],
        alpha3: if n == 6 { Some(v[3]) } else { None },
        beta: v[n - 2],
        gamma: v[n - 1],
    };
    (0..n)
        .map(|j| {
            let h = 1e-6 * x[j].abs().max(1e-3);
            let orig = x[j];
            x[j] = orig + h;
            let up = zigp_loglik(&build(&x), data, target);
            x[j] = orig - h;
            let down = zigp_loglik(&build(&x), data, target);
            x[j] = orig;
            // scaled by parameter magnitude
            (up - down) / (2.0 * h) / total * orig.abs().max(1e-3)
        })
        .collect()
}

#[test]
fn gradient_vanishes_at_optimum() {
    let data = moderate_sample(11, 600);
    for target in [Target::Scored, Target::Conditional] {
        let (fit, _) = fit_zigp(&data, target, 10, &ZigpFitOptions::default()).unwrap();
        let g = raw_gradient(&fit, &data, target);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-3, "{target:?} gradient {g:?}");
    }
}

#[test]
fn weight_scale_leaves_argmax_unchanged() {
    let data = moderate_sample(12, 300);
    let scaled: Vec<WeightedObservation> = data
        .iter()
        .map(|o| WeightedObservation { weight: o.weight * 3.5, ..o.clone() })
        .collect();
    let (a, ra) = fit_zigp(&data, Target::Scored, 10, &ZigpFitOptions::default()).unwrap();
    let (b, rb) = fit_zigp(&scaled, Target::Scored, 10, &ZigpFitOptions::default()).unwrap();
    for (u, v) in a.alphas().zip(b.alphas()) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-6);
    }
    assert_abs_diff_eq!(a.beta, b.beta, epsilon = 1e-4);
    assert_abs_diff_eq!(a.gamma, b.gamma, epsilon = 1e-4);
    assert_abs_diff_eq!(rb.final_loglik, 3.5 * ra.final_loglik, epsilon = 1e-6 * ra.final_loglik.abs());
}

#[test]
fn too_few_observations_is_insufficient_data() {
    let data = moderate_sample(13, 9);
    let err = fit_zigp(&data, Target::Scored, 10, &ZigpFitOptions::default()).unwrap_err();
    assert!(matches!(err, zigp_core::Error::InsufficientData { available: 9, required: 10 }));
}

#[test]
fn goodness_of_fit_degrees_of_freedom() {
    let data = moderate_sample(14, 120);
    let (_, r) = fit_zigp(&data, Target::Scored, 10, &ZigpFitOptions::default()).unwrap();
    assert_eq!(r.df, 115);
    assert!((0.0..=1.0).contains(&r.p_value));
    let (_, r) = fit_zigp(&data, Target::Conditional, 10, &ZigpFitOptions::default()).unwrap();
    assert_eq!(r.df, 114);
}

fn bivariate_sample(lambda0: f64, seed: u64, n: usize) -> Vec<WeightedObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let elo = rng.random_range(1200.0..2200.0);
            let loc: Location = draw_location(&mut rng);
            let l1 = (1.2 - 0.0005 * elo + 0.15 * loc.sign()).exp();
            let l2 = (-1.5 + 0.0006 * elo - 0.15 * loc.sign()).exp();
            let (a, b) = BivPoissonParams::new(l1, l2, lambda0).unwrap().sample(&mut rng);
            obs(elo, loc, a, b, 1.0)
        })
        .collect()
}

#[test]
fn bivariate_recovers_shared_rate() {
    let data = bivariate_sample(0.2, 2022_11_21, 4000);
    let (fit, report) = fit_bivpois(&data, 10, false).unwrap();
    assert!(report.converged);
    assert!((fit.tau() - 0.2).abs() <= 0.05, "tau {}", fit.tau());
    assert!(!report.lambda0_at_boundary);
    assert!((fit.scored.alpha2 - 0.15).abs() < 0.1);
}

#[test]
fn bivariate_independent_margins_hit_boundary() {
    let data = bivariate_sample(0.0, 2022_11_22, 4000);
    let (fit, report) = fit_bivpois(&data, 10, false).unwrap();
    assert!(fit.tau() < 0.05, "tau {}", fit.tau());
    assert!(report.lambda0_at_boundary);
}

#[test]
fn bivariate_with_zero_shared_rate_is_two_poisson_fits() {
    let data = bivariate_sample(0.3, 5, 500);
    let (fit, report) = fit_bivpois(&data, 10, true).unwrap();
    let (s, _) = fit_poisson(&data, Target::Scored).unwrap();
    let (c, _) = fit_poisson(&data, Target::Conceded).unwrap();
    assert_abs_diff_eq!(fit.scored.alpha0, s.alpha0, epsilon = 1e-10);
    assert_abs_diff_eq!(fit.scored.alpha1, s.alpha1, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.conceded.alpha0, c.alpha0, epsilon = 1e-10);
    assert_abs_diff_eq!(fit.conceded.alpha2, c.alpha2, epsilon = 1e-10);
    assert!(fit.tau() < 1e-9);
    assert_eq!(report.loglik, report.independent_loglik);
}
