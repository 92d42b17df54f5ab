#![allow(dead_code)]

use chrono::NaiveDate;
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use zigp_core::match_data::{Competition, Location, MatchRecord, WeightedObservation};
use zigp_core::regression::optimizer::{minimize, BfgsSettings};
use zigp_core::regression::{zigp_loglik, Target, ZigpCoefficients};
use zigp_core::zigp_dist::ZigpParams;

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

pub fn obs(elo_opp: f64, location: Location, goals_for: u32, goals_against: u32, weight: f64) -> WeightedObservation {
    WeightedObservation {
        record: MatchRecord {
            date: date("2020-01-01"),
            team_a: "Subject".into(),
            team_b: "Opponent".into(),
            goals_a: goals_for,
            goals_b: goals_against,
            competition: Competition::FriendlyOrOther,
            location,
            elo_a: 1800.0,
            elo_b: elo_opp,
        },
        weight,
    }
}

/// Location with P(home) = P(away) = 0.4, P(neutral) = 0.2.
pub fn draw_location(rng: &mut ChaCha8Rng) -> Location {
    let u: f64 = rng.random();
    if u < 0.4 {
        Location::HomeA
    } else if u < 0.8 {
        Location::HomeB
    } else {
        Location::Neutral
    }
}

pub fn coefficients(alpha: [f64; 3], beta: f64, gamma: f64) -> ZigpCoefficients {
    ZigpCoefficients {
        alpha0: alpha[0],
        alpha1: alpha[1],
        alpha2: alpha[2],
        alpha3: None,
        beta,
        gamma,
    }
}

/// Goals scored drawn from a ZIGP regression, opponent Elo uniform on `elo_range`.
pub fn simulate_scored(
    truth: &ZigpCoefficients,
    n: usize,
    elo_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Vec<WeightedObservation> {
    (0..n)
        .map(|_| {
            let elo = rng.random_range(elo_range.0..elo_range.1);
            let loc = draw_location(rng);
            let p: ZigpParams = truth.params(elo, loc.sign(), 0).unwrap();
            obs(elo, loc, p.sample(rng), 0, 1.0)
        })
        .collect()
}

/// Poisson ML for goals scored reached through the ZIGP likelihood with both
/// links at the boundary, maximized by BFGS from zero (Elo slope per 1000 points).
/// Independent of the IRLS start used by the production fit.
pub fn boundary_ml_by_bfgs(data: &[WeightedObservation]) -> [f64; 3] {
    let total: f64 = data.iter().map(|o| o.weight).sum();
    let build = |t: &DVector<f64>| coefficients([t[0], t[1] / 1000.0, t[2]], f64::NEG_INFINITY, f64::NEG_INFINITY);
    let objective = |t: &DVector<f64>| -zigp_loglik(&build(t), data, Target::Scored) / total;
    let settings = BfgsSettings {
        max_iterations: 2000,
        rel_f_tol: 1e-15,
        step_tol: 1e-12,
        grad_tol: 1e-11,
        ..BfgsSettings::default()
    };
    let out = minimize(objective, DVector::zeros(3), &settings);
    assert!(out.converged, "reference BFGS did not converge");
    [out.x[0], out.x[1] / 1000.0, out.x[2]]
}
