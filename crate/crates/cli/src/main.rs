mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Nested ZIGP football forecasting: fit team models, predict matches,
/// simulate tournaments and score forecasts.
#[derive(Debug, Parser)]
#[command(name = "zigp", version)]
struct Cli {
    /// Flat `key = value` config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format for tables: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Directory receiving all output files.
    #[arg(long, global = true)]
    out_dir: Option<String>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit all participants' models on a results file.
    Fit(DataArgs),
    /// Score matrix and outcome probabilities for one match.
    PredictMatch(PredictArgs),
    /// Monte Carlo simulation of a tournament.
    Simulate(SimulateArgs),
    /// Compare the three model families against realized results.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Default)]
struct DataArgs {
    #[arg(long)]
    matches: Option<String>,
    #[arg(long)]
    ratings: Option<String>,
    #[arg(long)]
    participants: Option<String>,
    #[arg(long)]
    mapping: Option<String>,
    #[arg(long)]
    reference_date: Option<String>,
    #[arg(long)]
    window_start: Option<String>,
    #[arg(long)]
    window_end: Option<String>,
    #[arg(long)]
    half_period_days: Option<String>,
    #[arg(long)]
    initial_elo: Option<String>,
    #[arg(long)]
    min_observations: Option<String>,
    /// Fit the conceded-goals regression only on matches against stronger opponents.
    #[arg(long)]
    restrict_conceded: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    ratings: Option<String>,
    #[arg(long)]
    team_a: String,
    #[arg(long)]
    team_b: String,
    /// home_a, neutral or home_b.
    #[arg(long, default_value = "neutral")]
    location: String,
    #[arg(long)]
    elo_a: Option<f64>,
    #[arg(long)]
    elo_b: Option<f64>,
    /// nested_zigp, independent_poisson or bivariate_poisson.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    models: Option<String>,
    /// Tournament config file, or `wc2022` for the bundled one.
    #[arg(long)]
    tournament: Option<String>,
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long)]
    model: Option<String>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    tournament: Option<String>,
    /// `team,category` CSV of the realized results.
    #[arg(long)]
    realized: Option<String>,
    #[arg(long)]
    n_runs: Option<usize>,
    #[command(flatten)]
    data: DataArgs,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Fit(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Fit(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Fit(m) => write!(f, "fit error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl From<zigp_core::Error> for CliError {
    fn from(e: zigp_core::Error) -> Self {
        use zigp_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) => CliError::Config(msg),
            E::Fit { .. } | E::InsufficientData { .. } | E::ParameterDomain(_) => CliError::Fit(msg),
            _ => CliError::Data(msg),
        }
    }
}

fn put<T: ToString>(cfg: &mut RunConfig, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        cfg.set(key, v.to_string());
    }
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        put(cfg, "matches", &self.matches);
        put(cfg, "ratings", &self.ratings);
        put(cfg, "participants", &self.participants);
        put(cfg, "mapping", &self.mapping);
        put(cfg, "reference_date", &self.reference_date);
        put(cfg, "window_start", &self.window_start);
        put(cfg, "window_end", &self.window_end);
        put(cfg, "half_period_days", &self.half_period_days);
        put(cfg, "initial_elo", &self.initial_elo);
        put(cfg, "min_observations", &self.min_observations);
        if self.restrict_conceded {
            cfg.set("restrict_conceded", "true");
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    put(&mut cfg, "format", &cli.format);
    put(&mut cfg, "out_dir", &cli.out_dir);
    put(&mut cfg, "seed", &cli.seed);
    match cli.command {
        Command::Fit(a) => {
            a.apply(&mut cfg);
            commands::fit(&cfg)
        }
        Command::PredictMatch(a) => {
            put(&mut cfg, "models", &a.models);
            put(&mut cfg, "ratings", &a.ratings);
            put(&mut cfg, "model", &a.model);
            commands::predict_match(&cfg, &a.team_a, &a.team_b, &a.location, a.elo_a, a.elo_b)
        }
        Command::Simulate(a) => {
            a.data.apply(&mut cfg);
            put(&mut cfg, "models", &a.models);
            put(&mut cfg, "tournament", &a.tournament);
            put(&mut cfg, "n_runs", &a.n_runs);
            put(&mut cfg, "model", &a.model);
            commands::simulate(&cfg)
        }
        Command::Validate(a) => {
            a.data.apply(&mut cfg);
            put(&mut cfg, "models", &a.models);
            put(&mut cfg, "tournament", &a.tournament);
            put(&mut cfg, "realized", &a.realized);
            put(&mut cfg, "n_runs", &a.n_runs);
            commands::validate(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zigp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
