//! Scoring of stage-probability forecasts against realized tournament results,
//! and the harness that compares the three model families.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elo::EloTable;
use crate::error::{Error, Result};
use crate::match_data::{MatchRecord, WeightConfig};
use crate::match_model::ModelTag;
use crate::regression::{fit_all, FitConfig, ModelSet};
use crate::tournament::{run_tournament, TournamentConfig, N_CATEGORIES};

pub mod synthetic;

/// Probabilities of result categories 1..=6 for one team.
pub type StageForecast = [f64; N_CATEGORIES];

/// Realized result category (1 = champion .. 6 = group exit) per team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedResults {
    pub categories: BTreeMap<String, u8>,
}

#[derive(Debug, Deserialize)]
struct ResultRow {
    team: String,
    category: u8,
}

impl RealizedResults {
    pub fn new(categories: BTreeMap<String, u8>) -> Result<Self> {
        for (team, c) in &categories {
            if !(1..=N_CATEGORIES as u8).contains(c) {
                return Err(Error::Domain(format!("{team}: category {c} outside 1..=6")));
            }
        }
        Ok(Self { categories })
    }

    /// Reads a `team,category` CSV.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut categories = BTreeMap::new();
        for (idx, row) in rdr.deserialize::<ResultRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                line: idx + 2,
                message: e.to_string(),
            })?;
            if categories.insert(row.team.clone(), row.category).is_some() {
                return Err(Error::Parse {
                    line: idx + 2,
                    message: format!("{} listed twice", row.team),
                });
            }
        }
        Self::new(categories)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Checks the category counts of a completed tournament whose knockout
    /// stage has `bracket_size` entrants out of `n_teams`.
    pub fn check_counts(&self, n_teams: usize, bracket_size: usize) -> Result<()> {
        let mut expected = [0usize; N_CATEGORIES];
        expected[0] = 1;
        let mut losers = 1;
        let mut entrants = 2;
        for slot in expected.iter_mut().take(N_CATEGORIES - 1).skip(1) {
            if entrants > bracket_size {
                break;
            }
            *slot = losers;
            losers *= 2;
            entrants *= 2;
        }
        expected[N_CATEGORIES - 1] = n_teams - bracket_size;
        let mut actual = [0usize; N_CATEGORIES];
        for c in self.categories.values() {
            actual[usize::from(*c) - 1] += 1;
        }
        if actual != expected {
            return Err(Error::Mismatch(format!(
                "category counts {actual:?} do not match a completed tournament {expected:?}"
            )));
        }
        Ok(())
    }
}

fn check_forecast(team: &str, p: &StageForecast) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || p.iter().any(|v| !(0.0..=1.0 + 1e-12).contains(v)) {
        return Err(Error::Domain(format!("{team}: forecast {p:?} is not a probability vector")));
    }
    Ok(())
}

/// `Σ_j (p_j - 1[category = j])^2` for one team.
pub fn brier_team(p: &StageForecast, category: u8) -> f64 {
    p.iter()
        .enumerate()
        .map(|(j, pj)| {
            let e = if j + 1 == usize::from(category) { 1.0 } else { 0.0 };
            (pj - e).powi(2)
        })
        .sum()
}

/// `(1/5) Σ_{i=1}^{5} (Σ_{j<=i} (p_j - e_j))^2` for one team.
pub fn rps_team(p: &StageForecast, category: u8) -> f64 {
    let mut cum = 0.0;
    let mut total = 0.0;
    for (j, pj) in p.iter().enumerate().take(N_CATEGORIES - 1) {
        let e = if j + 1 == usize::from(category) { 1.0 } else { 0.0 };
        cum += pj - e;
        total += cum * cum;
    }
    total / (N_CATEGORIES - 1) as f64
}

fn score_all(
    forecast: &BTreeMap<String, StageForecast>,
    realized: &RealizedResults,
    per_team: fn(&StageForecast, u8) -> f64,
) -> Result<f64> {
    for team in realized.categories.keys() {
        if !forecast.contains_key(team) {
            return Err(Error::Mismatch(format!("{team} has a result but no forecast")));
        }
    }
    let mut total = 0.0;
    for (team, p) in forecast {
        let category = *realized
            .categories
            .get(team)
            .ok_or_else(|| Error::Mismatch(format!("{team} has a forecast but no result")))?;
        check_forecast(team, p)?;
        total += per_team(p, category);
    }
    Ok(total)
}

/// Brier score summed over all teams.
pub fn brier_score(forecast: &BTreeMap<String, StageForecast>, realized: &RealizedResults) -> Result<f64> {
    score_all(forecast, realized, brier_team)
}

/// Rank probability score summed over all teams.
pub fn rank_probability_score(forecast: &BTreeMap<String, StageForecast>, realized: &RealizedResults) -> Result<f64> {
    score_all(forecast, realized, rps_team)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub tag: ModelTag,
    pub brier: f64,
    pub rps: f64,
}

/// Brier and RPS per model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub label: String,
    pub seed: u64,
    pub n_runs: u64,
    pub scores: Vec<ModelScore>,
}

impl ComparisonTable {
    pub fn get(&self, tag: ModelTag) -> Option<&ModelScore> {
        self.scores.iter().find(|s| s.tag == tag)
    }

    /// Rows are scoring functions, columns model families.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("score");
        for s in &self.scores {
            out.push(',');
            out.push_str(s.tag.as_str());
        }
        out.push('\n');
        for (name, pick) in [("brier", 0), ("rps", 1)] {
            out.push_str(name);
            for s in &self.scores {
                let v = if pick == 0 { s.brier } else { s.rps };
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Scores already-simulated forecasts of several model families.
pub fn score_forecasts(
    label: &str,
    seed: u64,
    n_runs: u64,
    forecasts: &[(ModelTag, BTreeMap<String, StageForecast>)],
    realized: &RealizedResults,
) -> Result<ComparisonTable> {
    let scores = forecasts
        .iter()
        .map(|(tag, f)| {
            Ok(ModelScore {
                tag: *tag,
                brier: brier_score(f, realized)?,
                rps: rank_probability_score(f, realized)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        label: label.to_string(),
        seed,
        n_runs,
        scores,
    })
}

/// Simulates the tournament under each model family with the same seed and
/// scores the forecasts.
pub fn compare_fitted(
    config: &TournamentConfig,
    models: &ModelSet,
    base_elo: &EloTable,
    tags: &[ModelTag],
    realized: &RealizedResults,
) -> Result<ComparisonTable> {
    let forecasts = tags
        .iter()
        .map(|&tag| {
            let table = run_tournament(config, models, base_elo, tag).inspect_err(|e| log::error!("{tag}: {e}"))?;
            Ok((tag, table.category_probabilities()))
        })
        .collect::<Result<Vec<_>>>()?;
    score_forecasts(&config.name, config.seed, config.n_runs as u64, &forecasts, realized)
}

/// Fits every participant on the pre-tournament matches, then compares the
/// model families on the realized results.
pub fn compare_models(
    records: &[MatchRecord],
    weights: &WeightConfig,
    fit: &FitConfig,
    config: &TournamentConfig,
    base_elo: &EloTable,
    realized: &RealizedResults,
) -> Result<ComparisonTable> {
    let participants: Vec<String> = config.teams().cloned().collect();
    let outcome = fit_all(&participants, records, weights, fit)?;
    compare_fitted(config, &outcome.models, base_elo, &ModelTag::ALL, realized)
}
