//! Monte Carlo simulation of a group-plus-knockout tournament.
//!
//! Each run starts from the same Elo snapshot, plays the group round robins and
//! the knockout bracket with in-tournament Elo updates, and records every team's
//! final stage. Runs are independent counter-based RNG streams, so tallies do
//! not depend on how rayon splits the work.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elo::{expected_result, EloTable, WORLD_CUP_K};
use crate::error::{Error, Result};
use crate::match_data::Location;
use crate::match_model::{MatchContext, MatchLaw, ModelTag, EXTRA_TIME_FACTOR};
use crate::regression::ModelSet;

/// Result categories: champion, runner-up, semifinal, quarterfinal, round of 16, group exit.
pub const N_CATEGORIES: usize = 6;
pub const GROUP_EXIT: u8 = 6;

/// Round-robin order for a group of four, by position.
const MATCHDAYS: [(usize, usize); 6] = [(0, 1), (2, 3), (0, 2), (3, 1), (3, 0), (1, 2)];

const BUNDLED_WC2022: &str = include_str!("../data/wc2022.conf");

/// A round-of-16 (or first knockout round) slot: the team finishing `rank` in group `group`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub group: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentConfig {
    pub name: String,
    pub host: Option<String>,
    /// Group labels with their four teams.
    pub groups: Vec<(String, Vec<String>)>,
    pub bracket: Vec<Slot>,
    pub n_runs: usize,
    pub seed: u64,
}

impl TournamentConfig {
    pub fn wc2022() -> Self {
        Self::parse(BUNDLED_WC2022).expect("bundled tournament config is valid")
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses the `key = value` format; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("tournament");
        let mut host = None;
        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut bracket_spec = None;
        let mut n_runs = 10_000;
        let mut seed = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |m: String| Error::Parse {
                line: idx + 1,
                message: m,
            };
            match key {
                "name" => name = value.to_string(),
                "host" => host = (!value.is_empty()).then(|| value.to_string()),
                "bracket" => bracket_spec = Some((idx + 1, value.to_string())),
                "n_runs" => {
                    n_runs = value.parse().map_err(|_| bad(format!("invalid n_runs '{value}'")))?;
                }
                "seed" => seed = value.parse().map_err(|_| bad(format!("invalid seed '{value}'")))?,
                k if k.starts_with("group.") => {
                    let label = k["group.".len()..].trim().to_string();
                    let teams: Vec<String> = value.split(',').map(|t| t.trim().to_string()).collect();
                    if groups.insert(label.clone(), teams).is_some() {
                        return Err(bad(format!("group {label} defined twice")));
                    }
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        let groups: Vec<(String, Vec<String>)> = groups.into_iter().collect();
        let (line, spec) = bracket_spec.ok_or_else(|| Error::Config("tournament config has no bracket".into()))?;
        let bracket = spec
            .split_whitespace()
            .map(|tok| {
                let (label, rank) = tok.split_at(tok.len().saturating_sub(1));
                let group = groups.iter().position(|(l, _)| l == label);
                match (group, rank.parse::<usize>()) {
                    (Some(group), Ok(rank)) => Ok(Slot { group, rank }),
                    _ => Err(Error::Parse {
                        line,
                        message: format!("invalid bracket slot '{tok}'"),
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let config = Self {
            name,
            host,
            groups,
            bracket,
            n_runs,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config("tournament has no groups".into()));
        }
        let mut seen = HashMap::new();
        for (label, teams) in &self.groups {
            if teams.len() != 4 {
                return Err(Error::Config(format!("group {label} has {} teams, expected 4", teams.len())));
            }
            for t in teams {
                if t.is_empty() {
                    return Err(Error::Config(format!("empty team name in group {label}")));
                }
                if let Some(other) = seen.insert(t.clone(), label.clone()) {
                    return Err(Error::Config(format!("{t} appears in groups {other} and {label}")));
                }
            }
        }
        let expected = 2 * self.groups.len();
        if self.bracket.len() != expected || !expected.is_power_of_two() || expected > 16 {
            return Err(Error::Config(format!(
                "bracket has {} slots; expected the top two of {} groups as a power of two up to 16",
                self.bracket.len(),
                self.groups.len()
            )));
        }
        for g in 0..self.groups.len() {
            for rank in 1..=2 {
                let n = self.bracket.iter().filter(|s| s.group == g && s.rank == rank).count();
                if n != 1 {
                    return Err(Error::Config(format!(
                        "bracket must contain {}{} exactly once",
                        self.groups[g].0, rank
                    )));
                }
            }
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be positive".into()));
        }
        if let Some(h) = &self.host {
            if !seen.contains_key(h) {
                log::warn!("host {h} is not a participant");
            }
        }
        Ok(())
    }

    pub fn teams(&self) -> impl Iterator<Item = &String> {
        self.groups.iter().flat_map(|(_, t)| t)
    }

    /// Checks that every participant has a fitted model and a rating.
    pub fn check_inputs(&self, models: &ModelSet, elo: &EloTable) -> Result<()> {
        for t in self.teams() {
            models.get(t)?;
            elo.get(t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandingRow {
    pub team: String,
    pub points: u32,
    pub goals_for: u32,
    pub goals_against: u32,
    pub rank: usize,
}

impl StandingRow {
    pub fn goal_diff(&self) -> i64 {
        i64::from(self.goals_for) - i64::from(self.goals_against)
    }
}

/// Final group table, ordered by rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStanding {
    pub rows: Vec<StandingRow>,
}

impl GroupStanding {
    pub fn team_at(&self, rank: usize) -> &str {
        &self.rows[rank - 1].team
    }
}

/// Orders rows by points, goal difference, goals scored, then `lots`
/// (higher ranks first); ranks are assigned 1..n.
pub fn rank_rows(rows: &mut [StandingRow], lots: &[u64]) {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        let key = |k: usize| (rows[k].points, rows[k].goal_diff(), rows[k].goals_for, lots[k]);
        key(j).cmp(&key(i))
    });
    let ranked: Vec<StandingRow> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| StandingRow {
            rank: pos + 1,
            ..rows[i].clone()
        })
        .collect();
    rows.clone_from_slice(&ranked);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayedMatch {
    pub goals_a: u32,
    pub goals_b: u32,
    pub extra_time: bool,
    /// Set when a drawn knockout match went to the shootout.
    pub shootout_a_wins: Option<bool>,
}

impl PlayedMatch {
    pub fn a_advances(&self) -> bool {
        self.shootout_a_wins.unwrap_or(self.goals_a > self.goals_b)
    }
}

/// Plays matches for one model family against a shared set of fitted models.
#[derive(Debug, Clone, Copy)]
pub struct Simulator<'a> {
    pub models: &'a ModelSet,
    pub host: Option<&'a str>,
    pub tag: ModelTag,
    pub k_weight: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(models: &'a ModelSet, host: Option<&'a str>, tag: ModelTag) -> Self {
        Self {
            models,
            host,
            tag,
            k_weight: WORLD_CUP_K,
        }
    }

    pub fn location(&self, team_a: &str, team_b: &str) -> Location {
        match self.host {
            Some(h) if h == team_a => Location::HomeA,
            Some(h) if h == team_b => Location::HomeB,
            _ => Location::Neutral,
        }
    }

    /// Plays one match at current ratings and applies the Elo update.
    ///
    /// Knockout draws get extra time at a third of the scoring rates and then an
    /// Elo-weighted coin for the shootout, which counts as a draw for Elo.
    pub fn play<R: Rng + ?Sized>(
        &self,
        team_a: &str,
        team_b: &str,
        elo: &mut EloTable,
        knockout: bool,
        rng: &mut R,
    ) -> Result<PlayedMatch> {
        let ctx = MatchContext::new(
            team_a,
            team_b,
            elo.get(team_a)?,
            elo.get(team_b)?,
            self.location(team_a, team_b),
        );
        let law = MatchLaw::new(self.models.get(team_a)?, self.models.get(team_b)?, &ctx, self.tag)?;
        let (mut ga, mut gb) = law.sample(rng)?;
        let mut played = PlayedMatch {
            goals_a: ga,
            goals_b: gb,
            extra_time: false,
            shootout_a_wins: None,
        };
        if knockout && ga == gb {
            let (ea, eb) = law.scaled(EXTRA_TIME_FACTOR)?.sample(rng)?;
            ga += ea;
            gb += eb;
            played.goals_a = ga;
            played.goals_b = gb;
            played.extra_time = true;
            if ga == gb {
                let p_a = expected_result(ctx.elo_a, ctx.elo_b);
                played.shootout_a_wins = Some(rng.random::<f64>() < p_a);
            }
        }
        elo.record_match(team_a, team_b, ga, gb, self.k_weight)?;
        Ok(played)
    }

    pub fn simulate_group<R: Rng + ?Sized>(&self, teams: &[String], elo: &mut EloTable, rng: &mut R) -> Result<GroupStanding> {
        if teams.len() != 4 {
            return Err(Error::Config(format!("group needs 4 teams, got {}", teams.len())));
        }
        let mut rows: Vec<StandingRow> = teams
            .iter()
            .map(|t| StandingRow {
                team: t.clone(),
                points: 0,
                goals_for: 0,
                goals_against: 0,
                rank: 0,
            })
            .collect();
        for &(i, j) in &MATCHDAYS {
            let m = self.play(&teams[i], &teams[j], elo, false, rng)?;
            rows[i].goals_for += m.goals_a;
            rows[i].goals_against += m.goals_b;
            rows[j].goals_for += m.goals_b;
            rows[j].goals_against += m.goals_a;
            match m.goals_a.cmp(&m.goals_b) {
                std::cmp::Ordering::Greater => rows[i].points += 3,
                std::cmp::Ordering::Less => rows[j].points += 3,
                std::cmp::Ordering::Equal => {
                    rows[i].points += 1;
                    rows[j].points += 1;
                }
            }
        }
        let lots: Vec<u64> = (0..rows.len()).map(|_| rng.random()).collect();
        rank_rows(&mut rows, &lots);
        Ok(GroupStanding { rows })
    }

    /// Plays the bracket; returns `(team, category)` for every entrant.
    /// Losers of the final get 2, of the semifinals 3, and so on back to 5.
    pub fn simulate_knockout<R: Rng + ?Sized>(
        &self,
        entrants: &[String],
        elo: &mut EloTable,
        rng: &mut R,
    ) -> Result<Vec<(String, u8)>> {
        let n = entrants.len();
        if !n.is_power_of_two() || !(2..=16).contains(&n) {
            return Err(Error::Config(format!("knockout needs 2..16 entrants as a power of two, got {n}")));
        }
        let mut out = Vec::with_capacity(n);
        let mut alive: Vec<String> = entrants.to_vec();
        let mut semifinal_losers = Vec::new();
        while alive.len() > 1 {
            // 2 entrants left = final (category 2 for the loser), 4 = semifinals (3), ...
            let category = 1 + alive.len().trailing_zeros() as u8;
            let mut next = Vec::with_capacity(alive.len() / 2);
            for pair in alive.chunks(2) {
                let m = self.play(&pair[0], &pair[1], elo, true, rng)?;
                let (w, l) = if m.a_advances() { (&pair[0], &pair[1]) } else { (&pair[1], &pair[0]) };
                next.push(w.clone());
                out.push((l.clone(), category));
                if category == 3 {
                    semifinal_losers.push(l.clone());
                }
            }
            alive = next;
        }
        if let [a, b] = semifinal_losers.as_slice() {
            // third-place match affects ratings only
            self.play(a, b, elo, true, rng)?;
        }
        out.push((alive[0].clone(), 1));
        Ok(out)
    }

    /// One full tournament from the current ratings: each team's category and group rank.
    pub fn simulate_once<R: Rng + ?Sized>(
        &self,
        config: &TournamentConfig,
        elo: &mut EloTable,
        rng: &mut R,
    ) -> Result<(HashMap<String, u8>, HashMap<String, usize>)> {
        let mut standings = Vec::with_capacity(config.groups.len());
        let mut categories = HashMap::new();
        let mut ranks = HashMap::new();
        for (_, teams) in &config.groups {
            let s = self.simulate_group(teams, elo, rng)?;
            for row in &s.rows {
                ranks.insert(row.team.clone(), row.rank);
                if row.rank > 2 {
                    categories.insert(row.team.clone(), GROUP_EXIT);
                }
            }
            standings.push(s);
        }
        let entrants: Vec<String> = config
            .bracket
            .iter()
            .map(|s| standings[s.group].team_at(s.rank).to_string())
            .collect();
        for (team, cat) in self.simulate_knockout(&entrants, elo, rng)? {
            categories.insert(team, cat);
        }
        Ok((categories, ranks))
    }
}

/// RNG for one run: the master seed with the run index as stream.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamTally {
    pub team: String,
    pub group: String,
    /// Runs ending in each category 1..=6.
    pub categories: [u64; N_CATEGORIES],
    /// Runs finishing 1st, 2nd, or 3rd/4th in the group.
    pub group_ranks: [u64; 3],
}

/// Aggregated simulation counts and derived probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTable {
    pub n_runs: u64,
    pub seed: u64,
    pub tag: ModelTag,
    pub teams: Vec<TeamTally>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub team: String,
    pub group: String,
    pub champion: f64,
    pub final_: f64,
    pub semifinal: f64,
    pub quarterfinal: f64,
    pub last16: f64,
    pub group_exit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub team: String,
    pub group: String,
    pub winner: f64,
    pub runner_up: f64,
    pub eliminated: f64,
}

impl StageTable {
    pub fn team(&self, team: &str) -> Option<&TeamTally> {
        self.teams.iter().find(|t| t.team == team)
    }

    /// Per-team probabilities of each category 1..=6.
    pub fn category_probabilities(&self) -> BTreeMap<String, [f64; N_CATEGORIES]> {
        let n = self.n_runs as f64;
        self.teams
            .iter()
            .map(|t| (t.team.clone(), t.categories.map(|c| c as f64 / n)))
            .collect()
    }

    /// Reach probabilities: champion, final, semifinal, quarterfinal, last 16, and group exit.
    pub fn stage_rows(&self) -> Vec<StageRow> {
        let n = self.n_runs as f64;
        let mut rows: Vec<StageRow> = self
            .teams
            .iter()
            .map(|t| {
                let reach = |upto: usize| t.categories[..upto].iter().sum::<u64>() as f64 / n;
                StageRow {
                    team: t.team.clone(),
                    group: t.group.clone(),
                    champion: reach(1),
                    final_: reach(2),
                    semifinal: reach(3),
                    quarterfinal: reach(4),
                    last16: reach(5),
                    group_exit: t.categories[5] as f64 / n,
                }
            })
            .collect();
        rows.sort_by(|a, b| {
            b.champion
                .total_cmp(&a.champion)
                .then(b.final_.total_cmp(&a.final_))
                .then(a.team.cmp(&b.team))
        });
        rows
    }

    pub fn group_rows(&self) -> Vec<GroupRow> {
        let n = self.n_runs as f64;
        self.teams
            .iter()
            .map(|t| GroupRow {
                team: t.team.clone(),
                group: t.group.clone(),
                winner: t.group_ranks[0] as f64 / n,
                runner_up: t.group_ranks[1] as f64 / n,
                eliminated: t.group_ranks[2] as f64 / n,
            })
            .collect()
    }

    /// Standard error of a Monte Carlo probability estimate.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n_runs as f64).sqrt()
    }

    pub fn stage_csv(&self) -> String {
        let mut out = String::from("team,group,champion,final,semifinal,quarterfinal,last16,group_exit\n");
        for r in self.stage_rows() {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                csv_field(&r.team),
                csv_field(&r.group),
                r.champion,
                r.final_,
                r.semifinal,
                r.quarterfinal,
                r.last16,
                r.group_exit
            ));
        }
        out
    }

    pub fn group_csv(&self) -> String {
        let mut out = String::from("group,team,winner,runner_up,eliminated\n");
        let mut rows = self.group_rows();
        rows.sort_by(|a, b| a.group.cmp(&b.group).then(b.winner.total_cmp(&a.winner)).then(a.team.cmp(&b.team)));
        for r in rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                csv_field(&r.group),
                csv_field(&r.team),
                r.winner,
                r.runner_up,
                r.eliminated
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone)]
struct Tally {
    categories: Vec<[u64; N_CATEGORIES]>,
    group_ranks: Vec<[u64; 3]>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            categories: vec![[0; N_CATEGORIES]; n],
            group_ranks: vec![[0; 3]; n],
        }
    }

    fn merge(mut self, other: Tally) -> Self {
        for (a, b) in self.categories.iter_mut().zip(&other.categories) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.group_ranks.iter_mut().zip(&other.group_ranks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

/// Runs `config.n_runs` tournaments from `base_elo` under one model family.
pub fn run_tournament(config: &TournamentConfig, models: &ModelSet, base_elo: &EloTable, tag: ModelTag) -> Result<StageTable> {
    config.validate()?;
    config.check_inputs(models, base_elo)?;
    let teams: Vec<(String, String)> = config
        .groups
        .iter()
        .flat_map(|(label, ts)| ts.iter().map(move |t| (t.clone(), label.clone())))
        .collect();
    let index: HashMap<&str, usize> = teams.iter().enumerate().map(|(i, (t, _))| (t.as_str(), i)).collect();
    if let Some(host) = &config.host {
        if index.contains_key(host.as_str()) {
            log::info!("{host} plays its matches at home; all other matches are neutral");
        }
    }
    let sim = Simulator::new(models, config.host.as_deref(), tag);
    // the snapshot is the reset point for every run
    let mut snapshot = EloTable::new(base_elo.ratings().clone());
    snapshot.commit();

    let tally = (0..config.n_runs as u64)
        .into_par_iter()
        .try_fold(
            || (Tally::new(teams.len()), snapshot.clone()),
            |(mut tally, mut elo), run| -> Result<(Tally, EloTable)> {
                elo.reset();
                let mut rng = run_rng(config.seed, run);
                let (cats, ranks) = sim.simulate_once(config, &mut elo, &mut rng)?;
                for (team, cat) in cats {
                    tally.categories[index[team.as_str()]][usize::from(cat) - 1] += 1;
                }
                for (team, rank) in ranks {
                    tally.group_ranks[index[team.as_str()]][rank.min(3) - 1] += 1;
                }
                Ok((tally, elo))
            },
        )
        .map(|r| r.map(|(t, _)| t))
        .try_reduce(|| Tally::new(teams.len()), |a, b| Ok(a.merge(b)))?;

    Ok(StageTable {
        n_runs: config.n_runs as u64,
        seed: config.seed,
        tag,
        teams: teams
            .into_iter()
            .enumerate()
            .map(|(i, (team, group))| TeamTally {
                team,
                group,
                categories: tally.categories[i],
                group_ranks: tally.group_ranks[i],
            })
            .collect(),
    })
}
