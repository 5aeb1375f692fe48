//! JSON configuration file with environment overrides.
//!
//! ```json
//! {
//!   "source": { "csv_dir": "fixtures/invoice" },
//!   "models": { "dir": "fixtures/invoice/models" },
//!   "state_path": "out/watermark.json",
//!   "output_dir": "out",
//!   "activity_type_filter": ["userTask", "serviceTask"],
//!   "service_port": 8080,
//!   "ui_dir": "webui/dist"
//! }
//! ```
//!
//! `source` takes exactly one of `csv_dir` or `database` (`sqlite:<path>`);
//! `models` takes `dir` or `rest` (a Camunda REST base URL). `PM_DB_URL`
//! replaces the source by a database URL and `PM_REST_URL` replaces the
//! model source by a REST URL. Relative paths resolve against the directory
//! holding the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const ENV_DB_URL: &str = "PM_DB_URL";
pub const ENV_REST_URL: &str = "PM_REST_URL";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventSource {
    CsvDir(PathBuf),
    Database(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSource {
    Dir(PathBuf),
    Rest(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub source: EventSource,
    pub models: Option<ModelSource>,
    pub state_path: PathBuf,
    pub output_dir: PathBuf,
    /// Activity types kept by analyses; empty keeps everything.
    pub activity_type_filter: BTreeSet<String>,
    pub service_port: u16,
    /// Built web UI served under `/` by `serve`.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    source: RawSource,
    models: Option<RawModels>,
    state_path: Option<PathBuf>,
    output_dir: PathBuf,
    #[serde(default)]
    activity_type_filter: BTreeSet<String>,
    service_port: Option<u16>,
    ui_dir: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSource {
    csv_dir: Option<PathBuf>,
    database: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModels {
    dir: Option<PathBuf>,
    rest: Option<String>,
}

impl Config {
    /// Reads the file and applies the process environment.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        Config::load_with_env(path, |k| std::env::var(k).ok().filter(|v| !v.is_empty()))
    }

    pub fn load_with_env(path: &Path, env: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let invalid = |message: &str| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let source = match (env(ENV_DB_URL), raw.source.csv_dir, raw.source.database) {
            (Some(url), _, _) => EventSource::Database(url),
            (None, Some(dir), None) => EventSource::CsvDir(resolve(dir)),
            (None, None, Some(url)) => EventSource::Database(url),
            (None, Some(_), Some(_)) => return Err(invalid("source: give either `csv_dir` or `database`, not both")),
            (None, None, None) => return Err(invalid("source: one of `csv_dir` or `database` is required")),
        };
        let models = match (env(ENV_REST_URL), raw.models) {
            (Some(url), _) => Some(ModelSource::Rest(url)),
            (None, None) => None,
            (None, Some(RawModels { dir: Some(d), rest: None })) => Some(ModelSource::Dir(resolve(d))),
            (None, Some(RawModels { dir: None, rest: Some(u) })) => Some(ModelSource::Rest(u)),
            (None, Some(_)) => return Err(invalid("models: give exactly one of `dir` or `rest`")),
        };
        let output_dir = resolve(raw.output_dir);
        let state_path = raw.state_path.map(resolve).unwrap_or_else(|| output_dir.join("watermark.json"));
        Ok(Config {
            source,
            models,
            state_path,
            output_dir,
            activity_type_filter: raw.activity_type_filter,
            service_port: raw.service_port.unwrap_or(DEFAULT_PORT),
            ui_dir: raw.ui_dir.map(resolve),
        })
    }
}
