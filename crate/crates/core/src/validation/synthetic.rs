//! Synthetic tournaments generated from a known nested-ZIGP truth.
//!
//! A replication draws a match history from the truth, fits all model families
//! on it, draws one realized tournament from the truth and scores the fitted
//! forecasts against it.

use std::collections::{BTreeMap, HashMap};

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compare_fitted, ComparisonTable, RealizedResults};
use crate::elo::EloTable;
use crate::error::Result;
use crate::match_data::{Competition, Location, MatchRecord, WeightConfig};
use crate::match_model::{MatchContext, MatchLaw, ModelTag};
use crate::regression::{
    fit_all, BivPoissonCoefficients, FitConfig, ModelSet, PoissonCoefficients, TeamModel, ZigpCoefficients,
};
use crate::tournament::{run_rng, Simulator, Slot, TournamentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesign {
    pub n_groups: usize,
    pub elo_low: f64,
    pub elo_step: f64,
    /// `log mu = base + slope (elo_own - elo_opp) + home loc` for every team.
    pub base: f64,
    pub slope: f64,
    pub home: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Opponent-goals slope of the conditional regression.
    pub alpha3: f64,
    /// History size, counted in matches per team.
    pub matches_per_team: usize,
    pub n_runs: usize,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self {
            n_groups: 8,
            elo_low: 1500.0,
            elo_step: 20.0,
            base: 0.2,
            slope: 0.0015,
            home: 0.25,
            beta: 0.0,
            gamma: -1.386_294_361_119_890_6, // omega = 0.2
            alpha3: -0.3,
            matches_per_team: 120,
            n_runs: 4000,
        }
    }
}

pub struct SyntheticWorld {
    pub config: TournamentConfig,
    pub elo: EloTable,
    pub truth: ModelSet,
}

fn team_name(i: usize) -> String {
    format!("T{:02}", i + 1)
}

fn truth_model(team: &str, elo: f64, d: &SyntheticDesign) -> TeamModel {
    let zigp = |sign: f64, alpha3: Option<f64>| ZigpCoefficients {
        alpha0: d.base + sign * d.slope * elo,
        alpha1: -sign * d.slope,
        alpha2: sign * d.home,
        alpha3,
        beta: d.beta,
        gamma: d.gamma,
    };
    let pois = |sign: f64| PoissonCoefficients {
        alpha0: d.base + sign * d.slope * elo,
        alpha1: -sign * d.slope,
        alpha2: sign * d.home,
    };
    TeamModel {
        team: team.to_string(),
        scored: zigp(1.0, None),
        conceded: zigp(-1.0, None),
        conditional: zigp(1.0, Some(d.alpha3)),
        ip_scored: pois(1.0),
        ip_conceded: pois(-1.0),
        bv: BivPoissonCoefficients {
            scored: pois(1.0),
            conceded: pois(-1.0),
            log_tau: -20.0,
        },
        meta: None,
    }
}

/// Teams seeded into pots by Elo, groups labelled A, B, ..., bracket pairing
/// group winners with runners-up of the neighbouring group.
pub fn synthetic_world(d: &SyntheticDesign) -> SyntheticWorld {
    let n_teams = 4 * d.n_groups;
    let elo_of = |i: usize| d.elo_low + d.elo_step * i as f64;
    let mut groups: Vec<(String, Vec<String>)> = (0..d.n_groups)
        .map(|g| (((b'A' + g as u8) as char).to_string(), Vec::new()))
        .collect();
    // pot p holds ranks p*n_groups .. (p+1)*n_groups counted from the strongest
    for pot in 0..4 {
        for (g, group) in groups.iter_mut().enumerate() {
            let rank = pot * d.n_groups + g;
            group.1.push(team_name(n_teams - 1 - rank));
        }
    }
    let mut bracket = Vec::new();
    for pair in (0..d.n_groups).step_by(2) {
        bracket.push(Slot { group: pair, rank: 1 });
        bracket.push(Slot { group: pair + 1, rank: 2 });
    }
    for pair in (0..d.n_groups).step_by(2) {
        bracket.push(Slot { group: pair + 1, rank: 1 });
        bracket.push(Slot { group: pair, rank: 2 });
    }
    let config = TournamentConfig {
        name: "synthetic".into(),
        host: None,
        groups,
        bracket,
        n_runs: d.n_runs,
        seed: 0,
    };
    let ratings: HashMap<String, f64> = (0..n_teams).map(|i| (team_name(i), elo_of(i))).collect();
    let truth = ModelSet::new((0..n_teams).map(|i| truth_model(&team_name(i), elo_of(i), d)));
    SyntheticWorld {
        config,
        elo: EloTable::new(ratings),
        truth,
    }
}

pub const HISTORY_START: &str = "2016-06-01";
pub const REFERENCE_DATE: &str = "2022-11-20";

fn parse_date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid constant date")
}

/// Matches among the synthetic teams drawn from the truth at fixed ratings.
pub fn synthetic_history(world: &SyntheticWorld, d: &SyntheticDesign, rng: &mut ChaCha8Rng) -> Result<Vec<MatchRecord>> {
    let teams: Vec<String> = world.config.teams().cloned().collect();
    let n = teams.len();
    let start = parse_date(HISTORY_START);
    let span = (parse_date(REFERENCE_DATE) - start).num_days();
    let n_matches = d.matches_per_team * n / 2;
    let mut out = Vec::with_capacity(n_matches);
    for _ in 0..n_matches {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let u: f64 = rng.random();
        let location = if u < 0.4 {
            Location::HomeA
        } else if u < 0.8 {
            Location::HomeB
        } else {
            Location::Neutral
        };
        let v: f64 = rng.random();
        let competition = if v < 0.4 {
            Competition::FriendlyOrOther
        } else if v < 0.85 {
            Competition::QualifierOrNationsLeague
        } else if v < 0.95 {
            Competition::ContinentalFinal
        } else {
            Competition::WorldCup
        };
        let date = start + Duration::days(rng.random_range(0..span));
        let (ta, tb) = (&teams[a], &teams[b]);
        let ctx = MatchContext::new(ta, tb, world.elo.get(ta)?, world.elo.get(tb)?, location);
        let law = MatchLaw::new(world.truth.get(ta)?, world.truth.get(tb)?, &ctx, ModelTag::NestedZigp)?;
        let (goals_a, goals_b) = law.sample(rng)?;
        out.push(MatchRecord {
            date,
            team_a: ta.clone(),
            team_b: tb.clone(),
            goals_a,
            goals_b,
            competition,
            location,
            elo_a: ctx.elo_a,
            elo_b: ctx.elo_b,
        });
    }
    out.sort_by_key(|x| x.date);
    Ok(out)
}

/// One realized tournament drawn from the truth.
pub fn realized_tournament(world: &SyntheticWorld, seed: u64) -> Result<RealizedResults> {
    let sim = Simulator::new(&world.truth, None, ModelTag::NestedZigp);
    let mut elo = world.elo.clone();
    elo.reset();
    // forecast runs use streams 0..n_runs
    let mut rng = run_rng(seed, u64::MAX - 1);
    let (cats, _) = sim.simulate_once(&world.config, &mut elo, &mut rng)?;
    RealizedResults::new(cats.into_iter().collect::<BTreeMap<_, _>>())
}

/// Fits on a fresh history and scores the forecasts of each model family in
/// `tags` against one realized tournament.
pub fn run_replication(d: &SyntheticDesign, seed: u64, tags: &[ModelTag]) -> Result<ComparisonTable> {
    let mut world = synthetic_world(d);
    world.config.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let history = synthetic_history(&world, d, &mut rng)?;
    let participants: Vec<String> = world.config.teams().cloned().collect();
    let weights = WeightConfig::new(parse_date(REFERENCE_DATE));
    let fit = FitConfig {
        seed,
        ..FitConfig::default()
    };
    let fitted = fit_all(&participants, &history, &weights, &fit)?;
    let realized = realized_tournament(&world, seed)?;
    compare_fitted(&world.config, &fitted.models, &world.elo, tags, &realized)
}
