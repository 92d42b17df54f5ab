//! Historical match ingestion and observation weighting.
//!
//! Input rows follow the public international-results layout
//! `date,home_team,away_team,home_score,away_score,tournament,city,country,neutral`
//! with optional trailing `home_elo,away_elo` columns. When the Elo columns are
//! absent, pre-match ratings are rebuilt by replaying the Elo rule over the whole
//! file in `(date, home_team, away_team)` order.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::elo::EloTable;
use crate::error::{Error, Result};

pub const DEFAULT_HALF_PERIOD_DAYS: f64 = 3.0 * 365.0;
pub const DEFAULT_INITIAL_ELO: f64 = 1500.0;

const BUNDLED_MAPPING: &str = include_str!("../data/tournament_mapping.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Competition {
    WorldCup,
    ContinentalFinal,
    QualifierOrNationsLeague,
    FriendlyOrOther,
}

impl Competition {
    /// K weight used when replaying Elo ratings from raw results.
    pub fn elo_k(self) -> f64 {
        match self {
            Competition::WorldCup => 60.0,
            Competition::ContinentalFinal => 50.0,
            Competition::QualifierOrNationsLeague => 40.0,
            Competition::FriendlyOrOther => 20.0,
        }
    }
}

impl FromStr for Competition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "world_cup" => Ok(Competition::WorldCup),
            "continental_final" => Ok(Competition::ContinentalFinal),
            "qualifier_or_nations_league" => Ok(Competition::QualifierOrNationsLeague),
            "friendly_or_other" => Ok(Competition::FriendlyOrOther),
            other => Err(Error::Domain(format!("unknown competition category {other:?}"))),
        }
    }
}

/// Where a match was played, relative to the record's `team_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    HomeA,
    Neutral,
    HomeB,
}

impl Location {
    /// Location covariate from team A's side: +1 home, 0 neutral, -1 away.
    pub fn sign(self) -> f64 {
        match self {
            Location::HomeA => 1.0,
            Location::Neutral => 0.0,
            Location::HomeB => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Location::HomeA => Location::HomeB,
            Location::Neutral => Location::Neutral,
            Location::HomeB => Location::HomeA,
        }
    }
}

impl FromStr for Location {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "home_a" | "home" => Ok(Location::HomeA),
            "neutral" => Ok(Location::Neutral),
            "home_b" | "away" => Ok(Location::HomeB),
            other => Err(Error::Domain(format!("unknown location {other:?}"))),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Location::HomeA => "home_a",
            Location::Neutral => "neutral",
            Location::HomeB => "home_b",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub date: NaiveDate,
    pub team_a: String,
    pub team_b: String,
    pub goals_a: u32,
    pub goals_b: u32,
    pub competition: Competition,
    pub location: Location,
    pub elo_a: f64,
    pub elo_b: f64,
}

impl MatchRecord {
    /// Same match seen from team B's side.
    pub fn reversed(&self) -> Self {
        Self {
            date: self.date,
            team_a: self.team_b.clone(),
            team_b: self.team_a.clone(),
            goals_a: self.goals_b,
            goals_b: self.goals_a,
            competition: self.competition,
            location: self.location.flipped(),
            elo_a: self.elo_b,
            elo_b: self.elo_a,
        }
    }

    /// Orients the record so that `team` is `team_a`.
    pub fn oriented_for(&self, team: &str) -> Option<Self> {
        if self.team_a == team {
            Some(self.clone())
        } else if self.team_b == team {
            Some(self.reversed())
        } else {
            None
        }
    }
}

/// A match seen from one team's side (`record.team_a`) with its fitting weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedObservation {
    pub record: MatchRecord,
    pub weight: f64,
}

impl WeightedObservation {
    pub fn goals_for(&self) -> u32 {
        self.record.goals_a
    }

    pub fn goals_against(&self) -> u32 {
        self.record.goals_b
    }

    pub fn elo_own(&self) -> f64 {
        self.record.elo_a
    }

    pub fn elo_opp(&self) -> f64 {
        self.record.elo_b
    }

    pub fn loc(&self) -> f64 {
        self.record.location.sign()
    }
}

/// `(1/2)^(D/H)` for a match played `D` days before the reference date.
pub fn date_weight(match_date: NaiveDate, reference_date: NaiveDate, half_period_days: f64) -> Result<f64> {
    if !(half_period_days.is_finite() && half_period_days > 0.0) {
        return Err(Error::Domain(format!(
            "half period must be positive, got {half_period_days}"
        )));
    }
    let days = (reference_date - match_date).num_days();
    if days < 0 {
        return Err(Error::Domain(format!(
            "match on {match_date} lies after the reference date {reference_date}"
        )));
    }
    Ok(0.5f64.powf(days as f64 / half_period_days))
}

pub fn importance_weight(competition: Competition) -> f64 {
    match competition {
        Competition::WorldCup => 4.0,
        Competition::ContinentalFinal => 3.0,
        Competition::QualifierOrNationsLeague => 2.5,
        Competition::FriendlyOrOther => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub reference_date: NaiveDate,
    pub half_period_days: f64,
}

impl WeightConfig {
    pub fn new(reference_date: NaiveDate) -> Self {
        Self {
            reference_date,
            half_period_days: DEFAULT_HALF_PERIOD_DAYS,
        }
    }

    pub fn weight(&self, record: &MatchRecord) -> Result<f64> {
        Ok(date_weight(record.date, self.reference_date, self.half_period_days)?
            * importance_weight(record.competition))
    }
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::Domain(format!("window start {start} after end {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

/// Table-driven mapping from free-text tournament names to competition categories.
///
/// The first rule whose pattern occurs in the (lower-cased) tournament name wins.
#[derive(Debug, Clone)]
pub struct CompetitionMapping {
    rules: Vec<(String, Competition)>,
}

#[derive(Debug, Deserialize)]
struct MappingRow {
    pattern: String,
    category: String,
}

impl CompetitionMapping {
    pub fn bundled() -> Self {
        // the bundled file is covered by tests
        Self::from_reader(BUNDLED_MAPPING.as_bytes()).expect("bundled mapping parses")
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rules = Vec::new();
        for (idx, row) in rdr.deserialize::<MappingRow>().enumerate() {
            let line = idx + 2;
            let row = row.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            let category = row.category.parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            rules.push((row.pattern.to_lowercase(), category));
        }
        Ok(Self { rules })
    }

    pub fn classify(&self, tournament: &str) -> Option<Competition> {
        let name = tournament.to_lowercase();
        self.rules
            .iter()
            .find(|(pattern, _)| name.contains(pattern.as_str()))
            .map(|(_, c)| *c)
    }
}

/// Reads a participants file: one team per line, blank lines and `#` comments ignored.
pub fn read_participants<P: AsRef<Path>>(path: P) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_participants(&text))
}

pub fn parse_participants(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub struct LoadOptions<'a> {
    pub window: DateWindow,
    pub mapping: &'a CompetitionMapping,
    /// Starting ratings for the Elo replay; unused when the file carries Elo columns.
    pub seed_ratings: Option<&'a EloTable>,
    /// Rating for teams missing from `seed_ratings` at their first replayed match.
    pub initial_elo: f64,
}

struct RawRow {
    line: usize,
    date: NaiveDate,
    home: String,
    away: String,
    home_score: u32,
    away_score: u32,
    competition: Competition,
    neutral: bool,
    elo: Option<(f64, f64)>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "na" | "N/A")
}

/// Loads matches involving at least one participant inside the window.
pub fn load_matches<R: Read>(
    source: R,
    participants: &[String],
    options: &LoadOptions<'_>,
) -> Result<Vec<MatchRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = [
        "date",
        "home_team",
        "away_team",
        "home_score",
        "away_score",
        "tournament",
        "neutral",
    ];
    let mut idx = HashMap::new();
    for name in required {
        let i = col(name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name}"),
        })?;
        idx.insert(name, i);
    }
    let elo_cols = match (col("home_elo"), col("away_elo")) {
        (Some(h), Some(a)) => Some((h, a)),
        _ => None,
    };

    let mut unmapped = BTreeSet::new();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |name: &str| record.get(idx[name]).unwrap_or("");
        let parse_err = |message: String| Error::Parse { line, message };

        let (hs, as_) = (field("home_score"), field("away_score"));
        if is_missing(hs) || is_missing(as_) {
            // scheduled but unplayed fixture
            continue;
        }
        let date = NaiveDate::parse_from_str(field("date"), "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date {:?}: {e}", field("date"))))?;
        let home_score = hs
            .parse()
            .map_err(|_| parse_err(format!("bad home_score {hs:?}")))?;
        let away_score = as_
            .parse()
            .map_err(|_| parse_err(format!("bad away_score {as_:?}")))?;
        let tournament = field("tournament");
        let competition = match options.mapping.classify(tournament) {
            Some(c) => c,
            None => {
                unmapped.insert(tournament.to_string());
                Competition::FriendlyOrOther
            }
        };
        let neutral = parse_bool(field("neutral"))
            .ok_or_else(|| parse_err(format!("bad neutral flag {:?}", field("neutral"))))?;
        let elo = match elo_cols {
            Some((h, a)) => {
                let parse_elo = |s: &str| -> Result<f64> {
                    let v: f64 = s.parse().map_err(|_| parse_err(format!("bad Elo value {s:?}")))?;
                    if v.is_finite() && v > 0.0 {
                        Ok(v)
                    } else {
                        Err(parse_err(format!("Elo value {v} must be positive")))
                    }
                };
                Some((
                    parse_elo(record.get(h).unwrap_or(""))?,
                    parse_elo(record.get(a).unwrap_or(""))?,
                ))
            }
            None => None,
        };
        rows.push(RawRow {
            line,
            date,
            home: field("home_team").to_string(),
            away: field("away_team").to_string(),
            home_score,
            away_score,
            competition,
            neutral,
            elo,
        });
    }
    for name in &unmapped {
        log::warn!("tournament {name:?} not in mapping; treated as friendly_or_other");
    }

    let mut seen: HashSet<&str> = HashSet::new();
    for r in &rows {
        seen.insert(&r.home);
        seen.insert(&r.away);
    }
    if let Some(missing) = participants.iter().find(|p| !seen.contains(p.as_str())) {
        return Err(Error::UnknownTeam(missing.clone()));
    }

    rows.sort_by(|a, b| {
        (a.date, &a.home, &a.away, a.line).cmp(&(b.date, &b.home, &b.away, b.line))
    });

    let mut elo = options.seed_ratings.cloned().unwrap_or_else(|| EloTable::new(HashMap::new()));
    let wanted: HashSet<&str> = participants.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for r in rows {
        let (elo_home, elo_away) = match r.elo {
            Some(pair) => pair,
            None => {
                for team in [&r.home, &r.away] {
                    if !elo.contains(team) {
                        elo.set(team, options.initial_elo);
                    }
                }
                let pre = (elo.get(&r.home)?, elo.get(&r.away)?);
                elo.record_match(&r.home, &r.away, r.home_score, r.away_score, r.competition.elo_k())?;
                pre
            }
        };
        let involved = wanted.is_empty() || wanted.contains(r.home.as_str()) || wanted.contains(r.away.as_str());
        if involved && options.window.contains(r.date) {
            out.push(MatchRecord {
                date: r.date,
                team_a: r.home,
                team_b: r.away,
                goals_a: r.home_score,
                goals_b: r.away_score,
                competition: r.competition,
                location: if r.neutral { Location::Neutral } else { Location::HomeA },
                elo_a: elo_home,
                elo_b: elo_away,
            });
        }
    }
    Ok(out)
}

/// Replays the Elo rule over a results file and returns the ratings after the
/// last match on or before `until`.
pub fn replay_ratings<R: Read>(
    source: R,
    mapping: &CompetitionMapping,
    seed_ratings: Option<&EloTable>,
    initial_elo: f64,
    until: NaiveDate,
) -> Result<EloTable> {
    let window = DateWindow::new(NaiveDate::MIN, until)?;
    let options = LoadOptions {
        window,
        mapping,
        seed_ratings,
        initial_elo,
    };
    let records = load_matches(source, &[], &options)?;
    let mut table = seed_ratings.cloned().unwrap_or_else(|| EloTable::new(HashMap::new()));
    for r in &records {
        for (team, pre) in [(&r.team_a, r.elo_a), (&r.team_b, r.elo_b)] {
            table.set(team, pre);
        }
        table.record_match(&r.team_a, &r.team_b, r.goals_a, r.goals_b, r.competition.elo_k())?;
    }
    table.commit();
    Ok(table)
}

pub fn load_matches_from_path<P: AsRef<Path>>(
    path: P,
    participants: &[String],
    options: &LoadOptions<'_>,
) -> Result<Vec<MatchRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_matches(file, participants, options)
}

/// All of `team`'s matches, oriented with `team` as the subject and weighted.
pub fn observations_for(
    team: &str,
    records: &[MatchRecord],
    weights: &WeightConfig,
) -> Result<Vec<WeightedObservation>> {
    let mut out = Vec::new();
    for record in records.iter().filter_map(|r| r.oriented_for(team)) {
        let weight = weights.weight(&record)?;
        out.push(WeightedObservation { record, weight });
    }
    if out.is_empty() {
        return Err(Error::EmptyHistory(team.to_string()));
    }
    Ok(out)
}
