//! Persisted watermark state and the lock guarding it.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use pm_core::extract::{KeyWatermark, WatermarkState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timefmt::{format_ts, parse_ts};

const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: corrupt state file: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{0} exists; another extraction is running (remove it if stale)")]
    Locked(PathBuf),
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    version: u32,
    processes: BTreeMap<String, KeyEntry>,
}

#[derive(Serialize, Deserialize)]
struct KeyEntry {
    high_time: String,
    ids: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StateError + '_ {
    move |source| StateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A missing file is the empty state.
pub fn load_state(path: &Path) -> Result<WatermarkState, StateError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(WatermarkState::default()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let corrupt = |message: String| StateError::Corrupt {
        path: path.to_path_buf(),
        message,
    };
    let file: StateFile = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if file.version != VERSION {
        return Err(corrupt(format!("unsupported version {}", file.version)));
    }
    let mut state = WatermarkState::default();
    for (key, entry) in file.processes {
        let high_time = parse_ts(&entry.high_time).ok_or_else(|| corrupt(format!("`{}` is not a timestamp", entry.high_time)))?;
        state.keys.insert(
            key,
            KeyWatermark {
                high_time,
                ids: entry.ids.into_iter().collect(),
            },
        );
    }
    Ok(state)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_state(path: &Path, state: &WatermarkState) -> Result<(), StateError> {
    let file = StateFile {
        version: VERSION,
        processes: state
            .keys
            .iter()
            .map(|(k, w)| {
                (
                    k.clone(),
                    KeyEntry {
                        high_time: format_ts(w.high_time),
                        ids: w.ids.iter().cloned().collect(),
                    },
                )
            })
            .collect(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp");
    let text = serde_json::to_string_pretty(&file).expect("state serialises");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Held for the duration of one extraction; removed on drop.
#[derive(Debug)]
pub struct StateLock {
    path: PathBuf,
}

impl StateLock {
    pub fn acquire(state_path: &Path) -> Result<Self, StateError> {
        let path = state_path.with_extension("lock");
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(StateLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(StateError::Locked(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for StateLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
