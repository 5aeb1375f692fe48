//! Table sources: a directory of CSV dumps and an SQLite database.

use std::path::{Path, PathBuf};

use pm_core::extract::{ActInstRow, DetailRow, TableSource};
use pm_core::Timestamp;
use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use thiserror::Error;

use crate::tables::{read_actinst_csv, read_detail_csv, TableError};
use crate::timefmt::{format_sql_ts, parse_ts};

pub const ACTINST_FILE: &str = "ACT_HI_ACTINST.csv";
pub const DETAIL_FILE: &str = "ACT_HI_DETAIL.csv";

/// Ids bound per `IN (...)` query.
const IN_CHUNK: usize = 500;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("source unreachable: {0}")]
    Unreachable(String),
    #[error("{file}: {source}")]
    Table { file: String, source: TableError },
    #[error("database: {0}")]
    Sql(#[from] rusqlite::Error),
    #[error("database: column `{column}` holds `{value}`, expected a timestamp")]
    BadTimestamp { column: &'static str, value: String },
    #[error("unsupported database URL `{0}` (expected sqlite:<path>)")]
    UnsupportedUrl(String),
}

impl SourceError {
    pub fn is_unreachable(&self) -> bool {
        matches!(self, SourceError::Unreachable(_))
    }
}

/// `ACT_HI_ACTINST.csv` and an optional `ACT_HI_DETAIL.csv` in one directory.
#[derive(Debug, Clone)]
pub struct CsvDirSource {
    dir: PathBuf,
}

impl CsvDirSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CsvDirSource { dir: dir.into() }
    }

    fn read(&self, name: &str) -> Result<Option<Vec<u8>>, SourceError> {
        if !self.dir.is_dir() {
            return Err(SourceError::Unreachable(format!("{} is not a directory", self.dir.display())));
        }
        let path = self.dir.join(name);
        match std::fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(SourceError::Unreachable(format!("{}: {e}", path.display()))),
        }
    }
}

impl TableSource for CsvDirSource {
    type Error = SourceError;

    fn actinst_rows(&mut self, since: Option<Timestamp>) -> Result<Vec<ActInstRow>, SourceError> {
        let bytes = self
            .read(ACTINST_FILE)?
            .ok_or_else(|| SourceError::Unreachable(format!("{} has no {ACTINST_FILE}", self.dir.display())))?;
        let rows = read_actinst_csv(&bytes).map_err(|source| SourceError::Table {
            file: ACTINST_FILE.into(),
            source,
        })?;
        Ok(match since {
            None => rows,
            Some(s) => rows.into_iter().filter(|r| r.end_time_.is_some_and(|e| e >= s)).collect(),
        })
    }

    fn detail_rows(&mut self, act_inst_ids: &[String]) -> Result<Vec<DetailRow>, SourceError> {
        let Some(bytes) = self.read(DETAIL_FILE)? else {
            return Ok(Vec::new());
        };
        let wanted: std::collections::HashSet<&str> = act_inst_ids.iter().map(String::as_str).collect();
        let rows = read_detail_csv(&bytes).map_err(|source| SourceError::Table {
            file: DETAIL_FILE.into(),
            source,
        })?;
        Ok(rows.into_iter().filter(|r| wanted.contains(r.act_inst_id_.as_str())).collect())
    }
}

/// History tables in an SQLite database. Timestamps may be stored as ISO-8601
/// text (`YYYY-MM-DD HH:MM:SS.fff`, UTC) or as integer epoch milliseconds.
pub struct SqliteSource {
    conn: Connection,
}

impl SqliteSource {
    pub fn open(path: &Path) -> Result<Self, SourceError> {
        let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)
            .map_err(|e| SourceError::Unreachable(format!("{}: {e}", path.display())))?;
        Ok(SqliteSource { conn })
    }

    /// Opens a `sqlite:<path>` (or `sqlite://<path>`) URL.
    pub fn from_url(url: &str) -> Result<Self, SourceError> {
        let path = url
            .strip_prefix("sqlite://")
            .or_else(|| url.strip_prefix("sqlite:"))
            .ok_or_else(|| SourceError::UnsupportedUrl(url.to_string()))?;
        SqliteSource::open(Path::new(path))
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }
}

fn time_of(v: ValueRef<'_>, column: &'static str) -> Result<Option<Timestamp>, SourceError> {
    match v {
        ValueRef::Null => Ok(None),
        ValueRef::Integer(ms) => Ok(Some(Timestamp(ms))),
        ValueRef::Text(t) => {
            let s = String::from_utf8_lossy(t);
            parse_ts(&s).map(Some).ok_or(SourceError::BadTimestamp {
                column,
                value: s.into_owned(),
            })
        }
        other => Err(SourceError::BadTimestamp {
            column,
            value: format!("{other:?}"),
        }),
    }
}

const ACTINST_SELECT: &str = "SELECT id_, proc_def_key_, proc_inst_id_, act_id_, act_name_, act_type_, start_time_, end_time_, assignee_ FROM ACT_HI_ACTINST";

impl TableSource for SqliteSource {
    type Error = SourceError;

    fn actinst_rows(&mut self, since: Option<Timestamp>) -> Result<Vec<ActInstRow>, SourceError> {
        let (sql, param) = match since {
            None => (ACTINST_SELECT.to_string(), None),
            Some(t) => (format!("{ACTINST_SELECT} WHERE end_time_ >= ?1"), Some(t)),
        };
        let mut stmt = self.conn.prepare(&sql)?;
        let mut rows = match param {
            // integer columns compare numerically, text columns lexicographically
            Some(t) => stmt.query(rusqlite::params![if self.integer_times()? { t.0.to_string() } else { format_sql_ts(t) }])?,
            None => stmt.query([])?,
        };
        let mut out = Vec::new();
        while let Some(r) = rows.next()? {
            let text = |i: usize| -> Result<Option<String>, rusqlite::Error> { r.get::<_, Option<String>>(i) };
            out.push(ActInstRow {
                id_: text(0)?.unwrap_or_default(),
                proc_def_key_: text(1)?.unwrap_or_default(),
                proc_inst_id_: text(2)?.unwrap_or_default(),
                act_id_: text(3)?.unwrap_or_default(),
                act_name_: text(4)?.unwrap_or_default(),
                act_type_: text(5)?.unwrap_or_default(),
                start_time_: time_of(r.get_ref(6)?, "start_time_")?.unwrap_or_default(),
                end_time_: time_of(r.get_ref(7)?, "end_time_")?,
                assignee_: text(8)?,
            });
        }
        Ok(out)
    }

    fn detail_rows(&mut self, act_inst_ids: &[String]) -> Result<Vec<DetailRow>, SourceError> {
        let mut out = Vec::new();
        for chunk in act_inst_ids.chunks(IN_CHUNK) {
            let marks = vec!["?"; chunk.len()].join(",");
            let sql = format!(
                "SELECT act_inst_id_, name_, var_type_, text_, long_, double_, time_ FROM ACT_HI_DETAIL WHERE act_inst_id_ IN ({marks}) ORDER BY rowid"
            );
            let mut stmt = self.conn.prepare(&sql)?;
            let mut rows = stmt.query(rusqlite::params_from_iter(chunk.iter()))?;
            while let Some(r) = rows.next()? {
                out.push(DetailRow {
                    act_inst_id_: r.get(0)?,
                    name_: r.get(1)?,
                    var_type_: r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                    text_: r.get(3)?,
                    long_: r.get(4)?,
                    double_: r.get(5)?,
                    time_: time_of(r.get_ref(6)?, "time_")?,
                });
            }
        }
        Ok(out)
    }
}

impl SqliteSource {
    /// Whether `end_time_` values are stored as integers (checked on the first non-null row).
    fn integer_times(&self) -> Result<bool, SourceError> {
        let t: Option<String> = self
            .conn
            .query_row(
                "SELECT typeof(end_time_) FROM ACT_HI_ACTINST WHERE end_time_ IS NOT NULL LIMIT 1",
                [],
                |r| r.get(0),
            )
            .map(Some)
            .or_else(|e| match e {
                rusqlite::Error::QueryReturnedNoRows => Ok(None),
                e => Err(e),
            })?;
        Ok(t.as_deref() == Some("integer"))
    }
}
