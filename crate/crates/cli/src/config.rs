//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use zigp_core::match_data::{DEFAULT_HALF_PERIOD_DAYS, DEFAULT_INITIAL_ELO};
use zigp_core::match_model::ModelTag;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "matches",
    "ratings",
    "participants",
    "mapping",
    "models",
    "tournament",
    "realized",
    "reference_date",
    "window_start",
    "window_end",
    "half_period_days",
    "initial_elo",
    "min_observations",
    "restrict_conceded",
    "max_restarts",
    "model",
    "n_runs",
    "seed",
    "out_dir",
    "format",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Raw key/value settings after merging the config file and flag overrides.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Directory the config file lives in; relative paths resolve against it.
    base: PathBuf,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self {
                values: BTreeMap::new(),
                base: PathBuf::from("."),
            });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", idx + 1)))?;
            let key = k.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!("config line {}: unknown key '{key}'", idx + 1)));
            }
            values.insert(key.to_string(), v.trim().to_string());
        }
        Ok(Self {
            values,
            base: PathBuf::from("."),
        })
    }

    /// Applies a flag override; flags win over file values and are not rebased.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key));
        let value = value.into();
        if matches!(
            key,
            "matches" | "ratings" | "participants" | "mapping" | "models" | "tournament" | "realized" | "out_dir"
        ) && value != "wc2022"
        {
            let p = std::path::absolute(&value).unwrap_or_else(|_| PathBuf::from(&value));
            self.values.insert(key.to_string(), p.to_string_lossy().into_owned());
        } else {
            self.values.insert(key.to_string(), value);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn resolve(&self, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        if p.is_absolute() {
            p
        } else {
            self.base.join(p)
        }
    }

    /// Path setting that must name an existing file.
    pub fn file(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let p = self.resolve(v);
        if !p.is_file() {
            return Err(CliError::Config(format!("{key}: file {} does not exist", p.display())));
        }
        Ok(Some(p))
    }

    pub fn require_file(&self, key: &str) -> Result<PathBuf, CliError> {
        self.file(key)?
            .ok_or_else(|| CliError::Config(format!("missing required setting '{key}'")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.get("out_dir").map_or_else(|| PathBuf::from("zigp-output"), |v| self.resolve(v))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("{key}: cannot parse '{v}'")))
            })
            .transpose()
    }

    pub fn date(&self, key: &str) -> Result<Option<NaiveDate>, CliError> {
        self.get(key)
            .map(|v| {
                NaiveDate::parse_from_str(v, "%Y-%m-%d")
                    .map_err(|_| CliError::Config(format!("{key}: expected YYYY-MM-DD, got '{v}'")))
            })
            .transpose()
    }

    pub fn half_period_days(&self) -> Result<f64, CliError> {
        let h = self.parsed("half_period_days")?.unwrap_or(DEFAULT_HALF_PERIOD_DAYS);
        if !(h > 0.0 && f64::is_finite(h)) {
            return Err(CliError::Config(format!("half_period_days must be positive, got {h}")));
        }
        Ok(h)
    }

    pub fn initial_elo(&self) -> Result<f64, CliError> {
        Ok(self.parsed("initial_elo")?.unwrap_or(DEFAULT_INITIAL_ELO))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn n_runs(&self) -> Result<Option<usize>, CliError> {
        let n: Option<usize> = self.parsed("n_runs")?;
        if n == Some(0) {
            return Err(CliError::Config("n_runs must be positive".into()));
        }
        Ok(n)
    }

    pub fn seed(&self) -> Result<Option<u64>, CliError> {
        self.parsed("seed")
    }

    pub fn restrict_conceded(&self) -> Result<bool, CliError> {
        match self.get("restrict_conceded").map(str::to_ascii_lowercase).as_deref() {
            None | Some("false") | Some("no") | Some("0") => Ok(false),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some(other) => Err(CliError::Config(format!("restrict_conceded: expected true/false, got '{other}'"))),
        }
    }

    pub fn model(&self) -> Result<ModelTag, CliError> {
        self.get("model")
            .map_or(Ok(ModelTag::NestedZigp), |v| v.parse().map_err(|e: zigp_core::Error| CliError::Config(e.to_string())))
    }

    pub fn format(&self) -> Result<Format, CliError> {
        match self.get("format").map(str::to_ascii_lowercase).as_deref() {
            None | Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            Some(other) => Err(CliError::Config(format!("format must be csv or json, got '{other}'"))),
        }
    }

    /// SHA-256 over the merged settings in key order, plus the command name.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        for (k, v) in &self.values {
            if k == "out_dir" || k == "format" {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
