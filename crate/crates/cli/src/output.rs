//! Writes artifacts tagged with the config hash and master seed.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::Format;
use crate::CliError;

pub struct Artifacts {
    dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub format: Format,
}

impl Artifacts {
    pub fn new(dir: PathBuf, config_hash: String, seed: u64, format: Format) -> Self {
        Self {
            dir,
            config_hash,
            seed,
            format,
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", self.dir.display())))?;
        Ok(self.dir.join(name))
    }

    fn write(&self, path: &Path, body: &str) -> Result<(), CliError> {
        std::fs::write(path, body).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    /// CSV body preceded by a `#` provenance line.
    pub fn csv(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.path(name)?;
        let text = format!("# config_hash={} seed={}\n{body}", self.config_hash, self.seed);
        self.write(&path, &text)
    }

    /// JSON object with `config_hash` and `seed` added at the top level.
    pub fn json(&self, name: &str, value: Value) -> Result<(), CliError> {
        let path = self.path(name)?;
        let mut obj = Map::new();
        obj.insert("config_hash".into(), Value::from(self.config_hash.clone()));
        obj.insert("seed".into(), Value::from(self.seed));
        match value {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(obj))
            .map_err(|e| CliError::Data(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(&path, &text)
    }

    /// A table written as `<stem>.csv` or as `<stem>.json`, per the format setting.
    pub fn table(&self, stem: &str, csv_body: &str, json: Value) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.csv(&format!("{stem}.csv"), csv_body),
            Format::Json => self.json(&format!("{stem}.json"), json),
        }
    }

    pub fn raw(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.path(name)?;
        self.write(&path, body)
    }
}
