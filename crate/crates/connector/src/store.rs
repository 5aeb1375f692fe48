//! Extracted artifacts under the output directory.
//!
//! ```text
//! <output_dir>/logs/<key>.csv     cumulative log, read back by analyses
//! <output_dir>/logs/<key>.xes     same log for external tools
//! <output_dir>/models/<key>.bpmn  diagram of the process, when known
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pm_core::EventLog;
use thiserror::Error;

use crate::csv_log::{export_csv, import_csv, CsvLogError};
use crate::loader::{load_models_dir, LoadedModels};
use crate::xes::export_xes;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: CsvLogError },
    #[error("process key `{0}` cannot be used as a file name")]
    BadKey(String),
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary sibling so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

fn check_key(key: &str) -> Result<(), StoreError> {
    let bad = key.is_empty() || key.starts_with('.') || key.contains(['/', '\\', '\0']);
    if bad {
        Err(StoreError::BadKey(key.to_string()))
    } else {
        Ok(())
    }
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, key: &str) -> PathBuf {
        self.root.join("logs").join(format!("{key}.csv"))
    }

    pub fn xes_path(&self, key: &str) -> PathBuf {
        self.root.join("logs").join(format!("{key}.xes"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    /// Keys with a stored log, sorted. A missing directory has none.
    pub fn keys(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("logs");
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(&dir)(e)),
        };
        let mut keys = Vec::new();
        for entry in entries {
            let path = entry.map_err(io(&dir))?.path();
            if path.extension().is_some_and(|e| e == "csv") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    keys.push(stem.to_string());
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    pub fn read_log(&self, key: &str) -> Result<Option<EventLog>, StoreError> {
        check_key(key)?;
        let path = self.log_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io(&path)(e)),
        };
        import_csv(&bytes, key).map(Some).map_err(|source| StoreError::Log { path, source })
    }

    pub fn read_logs(&self) -> Result<BTreeMap<String, EventLog>, StoreError> {
        let mut out = BTreeMap::new();
        for key in self.keys()? {
            if let Some(log) = self.read_log(&key)? {
                out.insert(key, log);
            }
        }
        Ok(out)
    }

    pub fn write_log(&self, log: &EventLog) -> Result<(), StoreError> {
        check_key(&log.process_key)?;
        write_atomic(&self.xes_path(&log.process_key), export_xes(log).as_bytes())?;
        write_atomic(&self.log_path(&log.process_key), &export_csv(log))
    }

    /// Appends `delta` to the stored log of its key. Events whose id is
    /// already stored are dropped and counted, which happens only when an
    /// earlier run wrote the logs but died before saving its watermark.
    pub fn append(&self, delta: EventLog) -> Result<(usize, usize), StoreError> {
        let key = delta.process_key.clone();
        let (merged, added, dropped) = match self.read_log(&key)? {
            None => {
                let n = delta.n_events();
                (delta, n, 0)
            }
            Some(stored) => {
                let known: std::collections::HashSet<String> = stored.events().map(|e| e.event_id.clone()).collect();
                let fresh = delta.filter_events(|e| !known.contains(&e.event_id));
                let (added, dropped) = (fresh.n_events(), delta.n_events() - fresh.n_events());
                let merged = stored.merged(fresh).map_err(|e| StoreError::Log {
                    path: self.log_path(&key),
                    source: e.into(),
                })?;
                (merged, added, dropped)
            }
        };
        if added > 0 || !self.log_path(&key).exists() {
            self.write_log(&merged)?;
        }
        Ok((added, dropped))
    }

    pub fn write_model(&self, key: &str, xml: &str) -> Result<(), StoreError> {
        check_key(key)?;
        let path = self.models_dir().join(format!("{key}.bpmn"));
        if fs::read_to_string(&path).is_ok_and(|old| old == xml) {
            return Ok(());
        }
        write_atomic(&path, xml.as_bytes())
    }

    /// Stored models; a missing directory has none.
    pub fn read_models(&self) -> LoadedModels {
        let dir = self.models_dir();
        if !dir.is_dir() {
            return LoadedModels::default();
        }
        load_models_dir(&dir).unwrap_or_else(|e| LoadedModels {
            warnings: vec![e.to_string()],
            ..Default::default()
        })
    }
}
