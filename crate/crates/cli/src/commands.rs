//! The four subcommands. Every input is loaded and checked before the first
//! output file is written.

use chrono::{Months, NaiveDate};
use serde_json::{json, Value};
use zigp_core::elo::EloTable;
use zigp_core::match_data::{
    load_matches_from_path, read_participants, replay_ratings, CompetitionMapping, DateWindow, LoadOptions,
    Location, MatchRecord, WeightConfig,
};
use zigp_core::match_model::{score_distribution, stronger_goal_params, MatchContext, ModelTag};
use zigp_core::regression::{fit_all, FitConfig, ModelSet};
use zigp_core::tournament::{run_tournament, TournamentConfig};
use zigp_core::validation::{compare_fitted, RealizedResults};
use zigp_core::zigp_dist::K_MAX;

use crate::config::RunConfig;
use crate::output::Artifacts;
use crate::CliError;

/// Default training window length before the reference date.
const DEFAULT_WINDOW_MONTHS: u32 = 72;
/// Largest goal count printed in the score-matrix CSV.
const MATRIX_GOALS: usize = 10;

fn mapping(cfg: &RunConfig) -> Result<CompetitionMapping, CliError> {
    match cfg.file("mapping")? {
        Some(p) => Ok(CompetitionMapping::from_path(p)?),
        None => Ok(CompetitionMapping::bundled()),
    }
}

fn reference_date(cfg: &RunConfig) -> Result<NaiveDate, CliError> {
    cfg.date("reference_date")?
        .ok_or_else(|| CliError::Config("missing required setting 'reference_date'".into()))
}

struct History {
    records: Vec<MatchRecord>,
    weights: WeightConfig,
    window: DateWindow,
}

fn load_history(cfg: &RunConfig, participants: &[String]) -> Result<History, CliError> {
    let matches = cfg.require_file("matches")?;
    let reference = reference_date(cfg)?;
    let end = cfg.date("window_end")?.unwrap_or(reference);
    let start = match cfg.date("window_start")? {
        Some(d) => d,
        None => end
            .checked_sub_months(Months::new(DEFAULT_WINDOW_MONTHS))
            .ok_or_else(|| CliError::Config("window start out of range".into()))?,
    };
    if end > reference {
        return Err(CliError::Config(format!("window_end {end} is after reference_date {reference}")));
    }
    let window = DateWindow::new(start, end).map_err(|e| CliError::Config(e.to_string()))?;
    let weights = WeightConfig {
        reference_date: reference,
        half_period_days: cfg.half_period_days()?,
    };
    let seed_ratings = cfg.file("ratings")?.map(EloTable::from_csv).transpose()?;
    let mapping = mapping(cfg)?;
    let options = LoadOptions {
        window,
        mapping: &mapping,
        seed_ratings: seed_ratings.as_ref(),
        initial_elo: cfg.initial_elo()?,
    };
    let records = load_matches_from_path(&matches, participants, &options)?;
    log::info!("loaded {} matches from {}", records.len(), matches.display());
    Ok(History {
        records,
        weights,
        window,
    })
}

fn fit_config(cfg: &RunConfig) -> Result<FitConfig, CliError> {
    let d = FitConfig::default();
    Ok(FitConfig {
        min_observations: cfg.usize_or("min_observations", d.min_observations)?,
        restrict_conceded_to_stronger: cfg.restrict_conceded()?,
        seed: cfg.seed()?.unwrap_or(d.seed),
        max_restarts: cfg.usize_or("max_restarts", d.max_restarts)?,
    })
}

fn fit_models(cfg: &RunConfig, participants: &[String], hash: &str) -> Result<ModelSet, CliError> {
    let history = load_history(cfg, participants)?;
    let fit = fit_config(cfg)?;
    let outcome = fit_all(participants, &history.records, &history.weights, &fit)?;
    for (team, reason) in &outcome.fallbacks {
        log::warn!("{team}: using pooled coefficients ({reason})");
    }
    let mut models = outcome.models;
    models.window = Some(history.window);
    models.config_hash = Some(hash.to_string());
    Ok(models)
}

/// Models from the `models` file, or fitted on the spot from `matches`.
fn obtain_models(cfg: &RunConfig, participants: &[String], hash: &str) -> Result<ModelSet, CliError> {
    match cfg.file("models")? {
        Some(p) => Ok(ModelSet::from_path(p)?),
        None if cfg.get("matches").is_some() => fit_models(cfg, participants, hash),
        None => Err(CliError::Config("need either 'models' or 'matches' to obtain team models".into())),
    }
}

/// Pre-tournament ratings from the `ratings` file, or an Elo replay of `matches`.
fn ratings(cfg: &RunConfig) -> Result<EloTable, CliError> {
    if let Some(p) = cfg.file("ratings")? {
        return Ok(EloTable::from_csv(p)?);
    }
    if let Some(m) = cfg.file("matches")? {
        let until = reference_date(cfg)?;
        let file = std::fs::File::open(&m).map_err(|e| CliError::Data(format!("{}: {e}", m.display())))?;
        return Ok(replay_ratings(file, &mapping(cfg)?, None, cfg.initial_elo()?, until)?);
    }
    Err(CliError::Config("need either 'ratings' or 'matches' for Elo ratings".into()))
}

fn tournament(cfg: &RunConfig) -> Result<TournamentConfig, CliError> {
    let mut t = match cfg.get("tournament") {
        None | Some("wc2022") => TournamentConfig::wc2022(),
        Some(_) => TournamentConfig::from_path(cfg.require_file("tournament")?)?,
    };
    if let Some(n) = cfg.n_runs()? {
        t.n_runs = n;
    }
    if let Some(s) = cfg.seed()? {
        t.seed = s;
    }
    t.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(t)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Data(e.to_string()))
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash("fit");
    let format = cfg.format()?;
    let participants_file = cfg.require_file("participants")?;
    let participants = read_participants(&participants_file)?;
    if participants.is_empty() {
        return Err(CliError::Data(format!("no teams listed in {}", participants_file.display())));
    }
    let models = fit_models(cfg, &participants, &hash)?;
    let seed = models.fit.map_or(FitConfig::default().seed, |f| f.seed);

    let mut csv = String::from("team,regression,n_obs,total_weight,converged,iterations,loglik,chi_sq,df,p_value,pooled_fallback\n");
    let mut rows = Vec::new();
    for (team, m) in &models.teams {
        let Some(meta) = &m.meta else { continue };
        for (name, r) in [("scored", &meta.scored), ("conceded", &meta.conceded), ("conditional", &meta.conditional)] {
            csv.push_str(&format!(
                "{team},{name},{},{:.6},{},{},{:.6},{:.6},{},{:.6},{}\n",
                r.n_obs, r.total_weight, r.converged, r.iterations, r.final_loglik, r.chi_sq, r.df, r.p_value,
                meta.pooled_fallback
            ));
            rows.push(json!({
                "team": team,
                "regression": name,
                "n_obs": r.n_obs,
                "total_weight": r.total_weight,
                "converged": r.converged,
                "iterations": r.iterations,
                "loglik": r.final_loglik,
                "chi_sq": r.chi_sq,
                "df": r.df,
                "p_value": r.p_value,
                "pooled_fallback": meta.pooled_fallback,
            }));
        }
    }

    let out = Artifacts::new(cfg.out_dir(), hash, seed, format);
    let mut body = models
        .to_json()
        .map_err(|e| CliError::Data(e.to_string()))?;
    body.push('\n');
    out.raw("models.json", &body)?;
    out.table("fit_report", &csv, json!({ "rows": rows }))?;
    Ok(())
}

pub fn predict_match(
    cfg: &RunConfig,
    team_a: &str,
    team_b: &str,
    location: &str,
    elo_a: Option<f64>,
    elo_b: Option<f64>,
) -> Result<(), CliError> {
    let hash = cfg.hash(&format!("predict-match {team_a} {team_b} {location} {elo_a:?} {elo_b:?}"));
    let format = cfg.format()?;
    let tag = cfg.model()?;
    let location: Location = location.parse().map_err(|e: zigp_core::Error| CliError::Config(e.to_string()))?;
    let models = ModelSet::from_path(cfg.require_file("models")?)?;
    let model_a = models.get(team_a)?;
    let model_b = models.get(team_b)?;
    let table = if elo_a.is_none() || elo_b.is_none() {
        Some(ratings(cfg)?)
    } else {
        None
    };
    let lookup = |team: &str, flag: Option<f64>| -> Result<f64, CliError> {
        match (flag, &table) {
            (Some(v), _) => Ok(v),
            (None, Some(t)) => Ok(t.get(team)?),
            (None, None) => unreachable!("ratings loaded whenever a flag is missing"),
        }
    };
    let ctx = MatchContext::new(team_a, team_b, lookup(team_a, elo_a)?, lookup(team_b, elo_b)?, location);
    let dist = score_distribution(model_a, model_b, &ctx, tag)?;
    let outcome = dist.outcome();
    let (ea, eb, cov) = dist.moments();
    let mut summary = json!({
        "team_a": team_a,
        "team_b": team_b,
        "elo_a": ctx.elo_a,
        "elo_b": ctx.elo_b,
        "location": location,
        "model": tag,
        "win_a": outcome.win_a,
        "draw": outcome.draw,
        "win_b": outcome.win_b,
        "expected_goals_a": ea,
        "expected_goals_b": eb,
        "covariance": cov,
        "total_probability": dist.total(),
        "most_likely": dist.most_likely(5).iter()
            .map(|((i, j), p)| json!({ "goals_a": i, "goals_b": j, "probability": p }))
            .collect::<Vec<_>>(),
    });
    if tag == ModelTag::NestedZigp {
        let (strong, weak, strong_ctx) = if ctx.a_is_stronger() {
            (model_a, model_b, ctx.clone())
        } else {
            (model_b, model_a, ctx.swapped())
        };
        let p = stronger_goal_params(strong, weak, &strong_ctx)?;
        summary["stronger"] = json!({
            "team": strong_ctx.team_a,
            "mu": p.mu(),
            "phi": p.phi(),
            "omega": p.omega(),
            "mean": p.mean(),
        });
    }

    let out = Artifacts::new(cfg.out_dir(), hash, cfg.seed()?.unwrap_or(0), format);
    out.table("score_matrix", &dist.to_csv(MATRIX_GOALS), json!({
        "team_a": team_a,
        "team_b": team_b,
        "max_goals": K_MAX,
        "joint": dist.joint,
    }))?;
    out.json("outcome.json", summary.clone())?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Data(e.to_string()))?);
    Ok(())
}

fn check_inputs(t: &TournamentConfig, models: &ModelSet, elo: &EloTable) -> Result<(), CliError> {
    t.check_inputs(models, elo).map_err(|e| CliError::Data(format!("tournament inputs: {e}")))
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash("simulate");
    let format = cfg.format()?;
    let tag = cfg.model()?;
    let t = tournament(cfg)?;
    let teams: Vec<String> = t.teams().cloned().collect();
    let elo = ratings(cfg)?;
    let models = obtain_models(cfg, &teams, &hash)?;
    check_inputs(&t, &models, &elo)?;

    eprintln!("simulating {} runs of {} ({tag})", t.n_runs, t.name);
    let table = run_tournament(&t, &models, &elo, tag)?;

    let out = Artifacts::new(cfg.out_dir(), hash, t.seed, format);
    out.table("stage_probabilities", &table.stage_csv(), json!({
        "tournament": t.name,
        "model": tag,
        "n_runs": t.n_runs,
        "rows": to_value(&table.stage_rows())?,
    }))?;
    out.table("group_probabilities", &table.group_csv(), json!({
        "tournament": t.name,
        "model": tag,
        "n_runs": t.n_runs,
        "rows": to_value(&table.group_rows())?,
    }))?;
    Ok(())
}

pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash("validate");
    let format = cfg.format()?;
    let t = tournament(cfg)?;
    let realized = RealizedResults::from_path(cfg.require_file("realized")?)?;
    let n_teams = t.groups.iter().map(|g| g.1.len()).sum();
    realized.check_counts(n_teams, t.bracket.len())?;
    let teams: Vec<String> = t.teams().cloned().collect();
    let elo = ratings(cfg)?;
    let models = obtain_models(cfg, &teams, &hash)?;
    check_inputs(&t, &models, &elo)?;

    let table = compare_fitted(&t, &models, &elo, &ModelTag::ALL, &realized)?;
    let out = Artifacts::new(cfg.out_dir(), hash, t.seed, format);
    out.table("comparison", &table.to_csv(), to_value(&table)?)?;
    for s in &table.scores {
        eprintln!("{:<20} brier {:.4}  rps {:.4}", s.tag.as_str(), s.brier, s.rps);
    }
    Ok(())
}
