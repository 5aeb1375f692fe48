//! ISO-8601 rendering and parsing of millisecond timestamps.

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use pm_core::Timestamp;

/// `2024-03-01T09:00:00.000Z`
pub fn format_ts(ts: Timestamp) -> String {
    match Utc.timestamp_millis_opt(ts.0) {
        chrono::LocalResult::Single(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        _ => format!("{}", ts.0),
    }
}

/// Accepts RFC 3339 with any offset (normalised to UTC) and the naive
/// `YYYY-MM-DD HH:MM:SS[.fff]` form databases print, read as UTC.
/// Digits below the millisecond are truncated.
pub fn parse_ts(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(Timestamp(dt.timestamp_millis()));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Timestamp(dt.and_utc().timestamp_millis()));
        }
    }
    None
}

/// Naive UTC form compared lexicographically by SQL sources.
pub fn format_sql_ts(ts: Timestamp) -> String {
    match Utc.timestamp_millis_opt(ts.0) {
        chrono::LocalResult::Single(dt) => dt.format("%Y-%m-%d %H:%M:%S%.3f").to_string(),
        _ => format!("{}", ts.0),
    }
}
