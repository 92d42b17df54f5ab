//! Per-team weighted maximum-likelihood fitting.
//!
//! Every participant gets three ZIGP regressions (goals scored, goals conceded,
//! and goals scored given the opponent's goals), two independent Poisson
//! regressions and one bivariate Poisson regression, all on the same weighted
//! observation set. Coefficients refer to the raw Elo covariate.

mod bivariate;
mod design;
mod gof;
pub mod optimizer;
mod poisson;
mod zigp;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bivariate::{fit_bivpois, BivFitReport, BivPoissonCoefficients};
pub use design::{Design, Target};
pub use gof::{chi_square_gof, chi_square_p_value, chi_square_statistic, GoodnessOfFit};
pub use poisson::{deviance as poisson_deviance, irls, IrlsFit};
pub use zigp::{fit_zigp, zigp_loglik, Link, ZigpFitOptions};

use crate::error::{Error, Result};
use crate::match_data::{observations_for, DateWindow, MatchRecord, WeightConfig, WeightedObservation};
use crate::zigp_dist::ZigpParams;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Bounds on `log mu` when a regression is evaluated far outside its data, so
/// the rate stays a valid positive number.
const MIN_LOG_RATE: f64 = -30.0;
const MAX_LOG_RATE: f64 = 10.0;

/// Coefficients of one ZIGP regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigpCoefficients {
    pub alpha0: f64,
    /// Opponent Elo slope.
    pub alpha1: f64,
    /// Location slope.
    pub alpha2: f64,
    /// Opponent-goals slope, only for the conditional regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha3: Option<f64>,
    /// Dispersion link, `phi = 1 + e^beta`.
    pub beta: f64,
    /// Zero-inflation link, `omega = e^gamma / (1 + e^gamma)`.
    pub gamma: f64,
}

impl ZigpCoefficients {
    pub(crate) fn from_raw(raw: &[f64], beta: f64, gamma: f64) -> Self {
        Self {
            alpha0: raw[0],
            alpha1: raw[1],
            alpha2: raw[2],
            alpha3: raw.get(3).copied(),
            beta,
            gamma,
        }
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        [self.alpha0, self.alpha1, self.alpha2].into_iter().chain(self.alpha3)
    }

    pub fn phi(&self) -> f64 {
        1.0 + self.beta.exp()
    }

    pub fn omega(&self) -> f64 {
        zigp::logistic(self.gamma)
    }

    /// `mu` at the given opponent Elo, location sign and (for the conditional
    /// regression) opponent goals.
    pub fn mu(&self, elo_opp: f64, loc: f64, opp_goals: u32) -> f64 {
        let mut eta = self.alpha0 + self.alpha1 * elo_opp + self.alpha2 * loc;
        if let Some(a3) = self.alpha3 {
            eta += a3 * f64::from(opp_goals);
        }
        eta.clamp(MIN_LOG_RATE, MAX_LOG_RATE).exp()
    }

    pub fn params(&self, elo_opp: f64, loc: f64, opp_goals: u32) -> Result<ZigpParams> {
        ZigpParams::new(self.mu(elo_opp, loc, opp_goals), self.phi(), self.omega())
    }

    fn is_finite(&self) -> bool {
        self.alphas().all(f64::is_finite) && self.beta.is_finite() && self.gamma.is_finite()
    }
}

/// Log-linear Poisson rate coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonCoefficients {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl PoissonCoefficients {
    pub(crate) fn from_raw(raw: &[f64]) -> Self {
        Self {
            alpha0: raw[0],
            alpha1: raw[1],
            alpha2: raw[2],
        }
    }

    pub fn rate(&self, elo_opp: f64, loc: f64) -> f64 {
        (self.alpha0 + self.alpha1 * elo_opp + self.alpha2 * loc).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub final_loglik: f64,
    pub initial_loglik: f64,
    pub gradient_norm: f64,
    pub n_obs: usize,
    pub total_weight: f64,
    pub chi_sq: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Weighted Poisson GLM `log mu = a0 + a1 elo_opp + a2 loc`.
pub fn fit_poisson(observations: &[WeightedObservation], target: Target) -> Result<(PoissonCoefficients, f64)> {
    let design = Design::from_observations(observations, target);
    let fit = irls(&design, &design.y)?;
    Ok((PoissonCoefficients::from_raw(&design.to_raw(&fit.internal)), fit.deviance))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub min_observations: usize,
    /// Restrict the goals-conceded regression to matches against higher-rated opponents.
    pub restrict_conceded_to_stronger: bool,
    pub seed: u64,
    pub max_restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            min_observations: 10,
            restrict_conceded_to_stronger: false,
            seed: 2022,
            max_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamFitMeta {
    pub n_obs: usize,
    pub total_weight: f64,
    pub scored: FitReport,
    pub conceded: FitReport,
    pub conditional: FitReport,
    pub ip_scored_deviance: f64,
    pub ip_conceded_deviance: f64,
    pub bv: BivFitReport,
    /// Coefficients were inherited from the pooled fit.
    pub pooled_fallback: bool,
}

/// All fitted regressions for one team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamModel {
    pub team: String,
    pub scored: ZigpCoefficients,
    pub conceded: ZigpCoefficients,
    pub conditional: ZigpCoefficients,
    pub ip_scored: PoissonCoefficients,
    pub ip_conceded: PoissonCoefficients,
    pub bv: BivPoissonCoefficients,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<TeamFitMeta>,
}

/// Stable 64-bit FNV-1a, used to derive per-team seeds.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Fits every regression of one team on its observations.
pub fn fit_team(team: &str, observations: &[WeightedObservation], config: &FitConfig) -> Result<TeamModel> {
    let seed = config.seed ^ fnv1a(team.as_bytes());
    let options = |salt: u64| ZigpFitOptions {
        seed: seed.wrapping_add(salt),
        max_restarts: config.max_restarts,
        ..ZigpFitOptions::default()
    };
    let min = config.min_observations;

    let (scored, scored_report) = fit_zigp(observations, Target::Scored, min, &options(1))?;
    let conceded_obs: Vec<WeightedObservation> = if config.restrict_conceded_to_stronger {
        observations
            .iter()
            .filter(|o| o.elo_opp() > o.elo_own())
            .cloned()
            .collect()
    } else {
        observations.to_vec()
    };
    let (conceded, conceded_report) = fit_zigp(&conceded_obs, Target::Conceded, min, &options(2))?;
    let (conditional, conditional_report) = fit_zigp(observations, Target::Conditional, min, &options(3))?;
    let (ip_scored, ip_scored_deviance) = fit_poisson(observations, Target::Scored)?;
    let (ip_conceded, ip_conceded_deviance) = fit_poisson(observations, Target::Conceded)?;
    let (bv, bv_report) = fit_bivpois(observations, min, false)?;

    for c in [&scored, &conceded, &conditional] {
        if !c.is_finite() {
            return Err(Error::Fit {
                restarts: config.max_restarts,
                best_point: c.alphas().chain([c.beta, c.gamma]).collect(),
                best_loglik: f64::NAN,
                gradient_norm: f64::NAN,
            });
        }
    }

    Ok(TeamModel {
        team: team.to_string(),
        scored,
        conceded,
        conditional,
        ip_scored,
        ip_conceded,
        bv,
        meta: Some(TeamFitMeta {
            n_obs: observations.len(),
            total_weight: observations.iter().map(|o| o.weight).sum(),
            scored: scored_report,
            conceded: conceded_report,
            conditional: conditional_report,
            ip_scored_deviance,
            ip_conceded_deviance,
            bv: bv_report,
            pooled_fallback: false,
        }),
    })
}

/// Fitted models for a set of teams, plus the data settings they were fitted under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<DateWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub teams: BTreeMap<String, TeamModel>,
}

impl ModelSet {
    pub fn new(teams: impl IntoIterator<Item = TeamModel>) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            window: None,
            weights: None,
            fit: None,
            config_hash: None,
            teams: teams.into_iter().map(|m| (m.team.clone(), m)).collect(),
        }
    }

    pub fn get(&self, team: &str) -> Result<&TeamModel> {
        self.teams.get(team).ok_or_else(|| Error::UnknownTeam(team.to_string()))
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let set: ModelSet = serde_json::from_reader(reader)?;
        if set.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "model file format {} not supported (expected {MODEL_FORMAT_VERSION})",
                set.format_version
            )));
        }
        Ok(set)
    }

    pub fn from_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

/// Outcome of fitting all participants.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub models: ModelSet,
    /// Teams that fell back to the pooled fit, with the reason.
    pub fallbacks: Vec<(String, String)>,
}

/// Fits all participants in parallel. Teams with too little data, or whose own
/// fit fails, inherit coefficients fitted on the pooled observations of all
/// participants.
pub fn fit_all(
    participants: &[String],
    records: &[MatchRecord],
    weights: &WeightConfig,
    config: &FitConfig,
) -> Result<FitOutcome> {
    let per_team: Vec<(String, Result<Vec<WeightedObservation>>)> = participants
        .iter()
        .map(|t| (t.clone(), observations_for(t, records, weights)))
        .collect();

    let fits: Vec<(String, Result<TeamModel>)> = per_team
        .par_iter()
        .map(|(team, obs)| {
            let model = match obs {
                Ok(obs) => fit_team(team, obs, config),
                Err(Error::EmptyHistory(t)) => Err(Error::EmptyHistory(t.clone())),
                Err(e) => Err(Error::Domain(e.to_string())),
            };
            (team.clone(), model)
        })
        .collect();

    let mut teams = Vec::new();
    let mut fallbacks = Vec::new();
    let mut pooled: Option<TeamModel> = None;
    for (team, fit) in fits {
        match fit {
            Ok(m) => teams.push(m),
            Err(e) => {
                log::warn!("{team}: {e}; using pooled coefficients");
                if pooled.is_none() {
                    let all: Vec<WeightedObservation> = per_team
                        .iter()
                        .filter_map(|(_, o)| o.as_ref().ok())
                        .flatten()
                        .cloned()
                        .collect();
                    pooled = Some(fit_team("__pooled__", &all, config)?);
                }
                let mut m = pooled.clone().expect("pooled fit present");
                m.team = team.clone();
                if let Some(meta) = m.meta.as_mut() {
                    meta.pooled_fallback = true;
                }
                teams.push(m);
                fallbacks.push((team, e.to_string()));
            }
        }
    }

    let mut models = ModelSet::new(teams);
    models.weights = Some(*weights);
    models.fit = Some(*config);
    Ok(FitOutcome { models, fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_links() {
        let c = ZigpCoefficients {
            alpha0: 2.472632,
            alpha1: -0.0010679575,
            alpha2: 0.2724600768,
            alpha3: None,
            beta: -11.846181,
            gamma: -4.058738,
        };
        assert!((c.mu(1971.0, 0.0, 0) - 1.444391).abs() < 5e-7);
        assert!((c.omega() - 0.0169776).abs() < 5e-8);
        assert!((c.phi() - 1.000007).abs() < 5e-7);
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
