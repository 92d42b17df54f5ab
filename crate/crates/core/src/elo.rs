//! World Football Elo arithmetic.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// K weight applied to World Cup matches, and to every simulated tournament match.
pub const WORLD_CUP_K: f64 = 60.0;

/// Elo-expected result `1 / (10^(-D/400) + 1)` with `D = own - opp`.
pub fn expected_result(elo_own: f64, elo_opp: f64) -> f64 {
    let d = elo_own - elo_opp;
    1.0 / (10f64.powf(-d / 400.0) + 1.0)
}

/// Goal-difference multiplier `G`.
pub fn goal_multiplier(goal_diff: i32) -> Result<f64> {
    match goal_diff {
        d if d < 0 => Err(Error::Domain(format!("negative goal difference {d}"))),
        0 | 1 => Ok(1.0),
        2 => Ok(1.5),
        n => Ok((11.0 + f64::from(n)) / 8.0),
    }
}

/// Match result `W` from the subject's point of view.
pub fn result_value(goals_own: u32, goals_opp: u32) -> f64 {
    match goals_own.cmp(&goals_opp) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Less => 0.0,
    }
}

/// Rating change `K * G * (W - W_e)` for an explicit result value.
pub fn rating_change(elo_own: f64, elo_opp: f64, goal_diff: u32, w: f64, k_weight: f64) -> f64 {
    // goal_diff is unsigned, so the multiplier cannot fail
    let g = goal_multiplier(goal_diff as i32).unwrap_or(1.0);
    k_weight * g * (w - expected_result(elo_own, elo_opp))
}

/// Post-match rating `Elo_before + K * G * (W - W_e)`.
pub fn update(elo_own: f64, elo_opp: f64, goals_own: u32, goals_opp: u32, k_weight: f64) -> f64 {
    let w = result_value(goals_own, goals_opp);
    elo_own + rating_change(elo_own, elo_opp, goals_own.abs_diff(goals_opp), w, k_weight)
}

/// Mutable rating table with an immutable snapshot to reset to.
#[derive(Debug, Clone)]
pub struct EloTable {
    ratings: HashMap<String, f64>,
    snapshot: HashMap<String, f64>,
}

#[derive(Debug, Deserialize)]
struct RatingRow {
    team: String,
    elo: f64,
}

impl EloTable {
    pub fn new(ratings: HashMap<String, f64>) -> Self {
        Self {
            snapshot: ratings.clone(),
            ratings,
        }
    }

    /// Reads a `team,elo` CSV.
    pub fn from_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut ratings = HashMap::new();
        for (idx, row) in rdr.deserialize::<RatingRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                line: idx + 2,
                message: e.to_string(),
            })?;
            if !(row.elo.is_finite() && row.elo > 0.0) {
                return Err(Error::Parse {
                    line: idx + 2,
                    message: format!("invalid rating {} for {}", row.elo, row.team),
                });
            }
            ratings.insert(row.team, row.elo);
        }
        Ok(Self::new(ratings))
    }

    pub fn get(&self, team: &str) -> Result<f64> {
        self.ratings
            .get(team)
            .copied()
            .ok_or_else(|| Error::UnknownTeam(team.to_string()))
    }

    pub fn contains(&self, team: &str) -> bool {
        self.ratings.contains_key(team)
    }

    pub fn set(&mut self, team: &str, elo: f64) {
        match self.ratings.get_mut(team) {
            Some(r) => *r = elo,
            None => {
                self.ratings.insert(team.to_string(), elo);
            }
        }
    }

    pub fn ratings(&self) -> &HashMap<String, f64> {
        &self.ratings
    }

    /// Applies a played match to both ratings. `w_a` is team A's result value.
    pub fn apply_result(
        &mut self,
        team_a: &str,
        team_b: &str,
        goal_diff: u32,
        w_a: f64,
        k_weight: f64,
    ) -> Result<()> {
        let elo_a = self.get(team_a)?;
        let elo_b = self.get(team_b)?;
        let delta = rating_change(elo_a, elo_b, goal_diff, w_a, k_weight);
        self.set(team_a, elo_a + delta);
        self.set(team_b, elo_b - delta);
        Ok(())
    }

    /// Updates both teams after a match decided by its score.
    pub fn record_match(
        &mut self,
        team_a: &str,
        team_b: &str,
        goals_a: u32,
        goals_b: u32,
        k_weight: f64,
    ) -> Result<()> {
        self.apply_result(
            team_a,
            team_b,
            goals_a.abs_diff(goals_b),
            result_value(goals_a, goals_b),
            k_weight,
        )
    }

    /// Restores the ratings captured at construction.
    pub fn reset(&mut self) {
        self.ratings.clone_from(&self.snapshot);
    }

    /// Makes the current ratings the new reset point.
    pub fn commit(&mut self) {
        self.snapshot.clone_from(&self.ratings);
    }
}
