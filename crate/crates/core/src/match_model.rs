//! Score distributions for a single match from two fitted team models.
//!
//! The nested model draws the Elo-stronger side's goals from the average of its
//! scored-goals regression and the opponent's conceded-goals regression, then
//! the weaker side's goals from its conditional regression given that count.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::match_data::Location;
use crate::regression::TeamModel;
use crate::zigp_dist::{poisson_sample, BivPoissonParams, ZigpParams, K_MAX};

/// Share of a regular match's scoring rate available in extra time.
pub const EXTRA_TIME_FACTOR: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    NestedZigp,
    IndependentPoisson,
    BivariatePoisson,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [
        ModelTag::NestedZigp,
        ModelTag::BivariatePoisson,
        ModelTag::IndependentPoisson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::NestedZigp => "nested_zigp",
            ModelTag::IndependentPoisson => "independent_poisson",
            ModelTag::BivariatePoisson => "bivariate_poisson",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nested_zigp" | "zigp" | "nested" => Ok(ModelTag::NestedZigp),
            "independent_poisson" | "ip" | "independent" => Ok(ModelTag::IndependentPoisson),
            "bivariate_poisson" | "bv" | "bivariate" => Ok(ModelTag::BivariatePoisson),
            other => Err(Error::Config(format!("unknown model tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchContext {
    pub team_a: String,
    pub team_b: String,
    pub elo_a: f64,
    pub elo_b: f64,
    pub location: Location,
}

impl MatchContext {
    pub fn new(team_a: &str, team_b: &str, elo_a: f64, elo_b: f64, location: Location) -> Self {
        Self {
            team_a: team_a.to_string(),
            team_b: team_b.to_string(),
            elo_a,
            elo_b,
            location,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            team_a: self.team_b.clone(),
            team_b: self.team_a.clone(),
            elo_a: self.elo_b,
            elo_b: self.elo_a,
            location: self.location.flipped(),
        }
    }

    /// Whether `team_a` takes the stronger role: higher Elo, ties to the smaller id.
    pub fn a_is_stronger(&self) -> bool {
        a_is_stronger(&self.team_a, &self.team_b, self.elo_a, self.elo_b)
    }
}

fn a_is_stronger(team_a: &str, team_b: &str, elo_a: f64, elo_b: f64) -> bool {
    elo_a > elo_b || (elo_a == elo_b && team_a <= team_b)
}

/// Averages the attacking side's scored-goals parameters with the defending
/// side's conceded-goals parameters.
pub fn combine_params(attack: &ZigpParams, defense: &ZigpParams) -> ZigpParams {
    ZigpParams::new(
        0.5 * (attack.mu() + defense.mu()),
        0.5 * (attack.phi() + defense.phi()),
        0.5 * (attack.omega() + defense.omega()),
    )
    .expect("averages of valid parameters are valid")
}

/// Goal law of `team_a` (assumed the stronger side) against `team_b`.
pub fn stronger_goal_params(model_a: &TeamModel, model_b: &TeamModel, ctx: &MatchContext) -> Result<ZigpParams> {
    let loc = ctx.location.sign();
    let attack = model_a.scored.params(ctx.elo_b, loc, 0)?;
    let defense = model_b.conceded.params(ctx.elo_a, -loc, 0)?;
    Ok(combine_params(&attack, &defense))
}

/// Goal law of `team_b` (the weaker side) given that `team_a` scored `g_a`.
pub fn weaker_goal_params(model_b: &TeamModel, ctx: &MatchContext, g_a: u32) -> Result<ZigpParams> {
    if g_a as usize > K_MAX {
        return Err(Error::Domain(format!("goal count {g_a} exceeds {K_MAX}")));
    }
    model_b.conditional.params(ctx.elo_a, -ctx.location.sign(), g_a)
}

/// Rate-averaged independent Poisson rates `(lambda_a, lambda_b)`.
pub fn independent_rates(model_a: &TeamModel, model_b: &TeamModel, ctx: &MatchContext) -> (f64, f64) {
    let loc = ctx.location.sign();
    let la = 0.5 * (model_a.ip_scored.rate(ctx.elo_b, loc) + model_b.ip_conceded.rate(ctx.elo_a, -loc));
    let lb = 0.5 * (model_b.ip_scored.rate(ctx.elo_a, -loc) + model_a.ip_conceded.rate(ctx.elo_b, loc));
    (la, lb)
}

/// Averaged bivariate Poisson parameters, oriented `(team_a, team_b)`.
pub fn bivariate_params(model_a: &TeamModel, model_b: &TeamModel, ctx: &MatchContext) -> Result<BivPoissonParams> {
    let loc = ctx.location.sign();
    let (a, b) = (&model_a.bv, &model_b.bv);
    let l1 = 0.5 * (a.scored.rate(ctx.elo_b, loc) + b.conceded.rate(ctx.elo_a, -loc));
    let l2 = 0.5 * (b.scored.rate(ctx.elo_a, -loc) + a.conceded.rate(ctx.elo_b, loc));
    let l0 = 0.5 * (a.tau() + b.tau());
    BivPoissonParams::new(l1, l2, l0)
}

/// Parameters of a single match under one model tag, ready for sampling.
#[derive(Debug, Clone)]
pub enum MatchLaw {
    /// `stronger` is `team_a` unless `swapped`; the conditional law is built per draw.
    Nested {
        stronger: ZigpParams,
        weak_coefficients: crate::regression::ZigpCoefficients,
        elo_strong: f64,
        loc_weak: f64,
        swapped: bool,
        rate_factor: f64,
    },
    Independent {
        lambda_a: f64,
        lambda_b: f64,
    },
    Bivariate(BivPoissonParams),
}

impl MatchLaw {
    pub fn new(model_a: &TeamModel, model_b: &TeamModel, ctx: &MatchContext, tag: ModelTag) -> Result<Self> {
        if model_a.team != ctx.team_a || model_b.team != ctx.team_b {
            return Err(Error::Domain(format!(
                "models ({}, {}) do not match context ({}, {})",
                model_a.team, model_b.team, ctx.team_a, ctx.team_b
            )));
        }
        Ok(match tag {
            ModelTag::NestedZigp => {
                let swapped = !ctx.a_is_stronger();
                let (strong, weak, c) = if swapped {
                    (model_b, model_a, ctx.swapped())
                } else {
                    (model_a, model_b, ctx.clone())
                };
                MatchLaw::Nested {
                    stronger: stronger_goal_params(strong, weak, &c)?,
                    weak_coefficients: weak.conditional.clone(),
                    elo_strong: c.elo_a,
                    loc_weak: -c.location.sign(),
                    swapped,
                    rate_factor: 1.0,
                }
            }
            ModelTag::IndependentPoisson => {
                let (lambda_a, lambda_b) = independent_rates(model_a, model_b, ctx);
                MatchLaw::Independent { lambda_a, lambda_b }
            }
            ModelTag::BivariatePoisson => MatchLaw::Bivariate(bivariate_params(model_a, model_b, ctx)?),
        })
    }

    /// The same law with every scoring rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(match self {
            MatchLaw::Nested {
                stronger,
                weak_coefficients,
                elo_strong,
                loc_weak,
                swapped,
                rate_factor,
            } => MatchLaw::Nested {
                stronger: stronger.scale_mu(factor)?,
                weak_coefficients: weak_coefficients.clone(),
                elo_strong: *elo_strong,
                loc_weak: *loc_weak,
                swapped: *swapped,
                rate_factor: rate_factor * factor,
            },
            MatchLaw::Independent { lambda_a, lambda_b } => MatchLaw::Independent {
                lambda_a: lambda_a * factor,
                lambda_b: lambda_b * factor,
            },
            MatchLaw::Bivariate(p) => MatchLaw::Bivariate(BivPoissonParams::new(
                p.lambda1() * factor,
                p.lambda2() * factor,
                p.lambda0() * factor,
            )?),
        })
    }

    fn weak_params(
        weak: &crate::regression::ZigpCoefficients,
        elo_strong: f64,
        loc_weak: f64,
        rate_factor: f64,
        g_strong: u32,
    ) -> Result<ZigpParams> {
        let p = weak.params(elo_strong, loc_weak, g_strong)?;
        if rate_factor == 1.0 {
            Ok(p)
        } else {
            p.scale_mu(rate_factor)
        }
    }

    /// Draws `(goals_a, goals_b)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u32, u32)> {
        Ok(match self {
            MatchLaw::Nested {
                stronger,
                weak_coefficients,
                elo_strong,
                loc_weak,
                swapped,
                rate_factor,
            } => {
                let gs = stronger.sample(rng);
                let gw = Self::weak_params(weak_coefficients, *elo_strong, *loc_weak, *rate_factor, gs)?.sample(rng);
                if *swapped {
                    (gw, gs)
                } else {
                    (gs, gw)
                }
            }
            MatchLaw::Independent { lambda_a, lambda_b } => {
                (poisson_sample(*lambda_a, rng), poisson_sample(*lambda_b, rng))
            }
            MatchLaw::Bivariate(p) => p.sample(rng),
        })
    }

    /// Joint score table oriented `(team_a, team_b)`.
    pub fn distribution(&self, tag: ModelTag) -> Result<ScoreDistribution> {
        let n = K_MAX + 1;
        let mut joint = vec![vec![0.0; n]; n];
        match self {
            MatchLaw::Nested {
                stronger,
                weak_coefficients,
                elo_strong,
                loc_weak,
                swapped,
                rate_factor,
            } => {
                let strong = stronger.table();
                for (i, &p_i) in strong.iter().enumerate() {
                    let cond = Self::weak_params(weak_coefficients, *elo_strong, *loc_weak, *rate_factor, i as u32)?
                        .table();
                    for (j, &q_j) in cond.iter().enumerate() {
                        if *swapped {
                            joint[j][i] = p_i * q_j;
                        } else {
                            joint[i][j] = p_i * q_j;
                        }
                    }
                }
            }
            MatchLaw::Independent { lambda_a, lambda_b } => {
                let ta = ZigpParams::poisson(*lambda_a)?.table();
                let tb = ZigpParams::poisson(*lambda_b)?.table();
                for i in 0..n {
                    for j in 0..n {
                        joint[i][j] = ta[i] * tb[j];
                    }
                }
            }
            MatchLaw::Bivariate(p) => {
                let mut total = 0.0;
                for (i, row) in joint.iter_mut().enumerate() {
                    for (j, cell) in row.iter_mut().enumerate() {
                        *cell = p.pmf(i as u32, j as u32);
                        total += *cell;
                    }
                }
                // residual mass beyond the table is renormalized
                for row in joint.iter_mut() {
                    for cell in row.iter_mut() {
                        *cell /= total;
                    }
                }
            }
        }
        Ok(ScoreDistribution { joint, tag })
    }
}

/// Joint probabilities of `(goals_a, goals_b)` for `0..=K_MAX` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub joint: Vec<Vec<f64>>,
    pub tag: ModelTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub win_a: f64,
    pub draw: f64,
    pub win_b: f64,
}

impl ScoreDistribution {
    pub fn prob(&self, goals_a: usize, goals_b: usize) -> f64 {
        self.joint[goals_a][goals_b]
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().flatten().sum()
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        (0..self.joint.len())
            .map(|j| self.joint.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn transposed(&self) -> Self {
        let n = self.joint.len();
        Self {
            joint: (0..n).map(|i| (0..n).map(|j| self.joint[j][i]).collect()).collect(),
            tag: self.tag,
        }
    }

    pub fn outcome(&self) -> OutcomeSummary {
        let mut s = OutcomeSummary {
            win_a: 0.0,
            draw: 0.0,
            win_b: 0.0,
        };
        for (i, row) in self.joint.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                match i.cmp(&j) {
                    std::cmp::Ordering::Greater => s.win_a += p,
                    std::cmp::Ordering::Equal => s.draw += p,
                    std::cmp::Ordering::Less => s.win_b += p,
                }
            }
        }
        s
    }

    /// Cells sorted by decreasing probability.
    pub fn most_likely(&self, n: usize) -> Vec<((usize, usize), f64)> {
        let mut cells: Vec<((usize, usize), f64)> = self
            .joint
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, p)| ((i, j), *p)))
            .collect();
        cells.sort_by(|a, b| b.1.total_cmp(&a.1));
        cells.truncate(n);
        cells
    }

    /// `E[goals_a]`, `E[goals_b]` and their covariance over the table.
    pub fn moments(&self) -> (f64, f64, f64) {
        let (mut ea, mut eb, mut eab) = (0.0, 0.0, 0.0);
        for (i, row) in self.joint.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                ea += i as f64 * p;
                eb += j as f64 * p;
                eab += (i * j) as f64 * p;
            }
        }
        (ea, eb, eab - ea * eb)
    }

    /// Square CSV table, rows = goals of team A, columns = goals of team B.
    pub fn to_csv(&self, max_goals: usize) -> String {
        let m = max_goals.min(self.joint.len() - 1);
        let mut out = String::from("goals_a");
        for j in 0..=m {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for i in 0..=m {
            out.push_str(&i.to_string());
            for j in 0..=m {
                out.push_str(&format!(",{:.10}", self.joint[i][j]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn score_distribution(
    model_a: &TeamModel,
    model_b: &TeamModel,
    ctx: &MatchContext,
    tag: ModelTag,
) -> Result<ScoreDistribution> {
    MatchLaw::new(model_a, model_b, ctx, tag)?.distribution(tag)
}

pub fn sample_score<R: Rng + ?Sized>(
    model_a: &TeamModel,
    model_b: &TeamModel,
    ctx: &MatchContext,
    tag: ModelTag,
    rng: &mut R,
) -> Result<(u32, u32)> {
    MatchLaw::new(model_a, model_b, ctx, tag)?.sample(rng)
}
