//! Flat CSV form of an event log.
//!
//! Fixed columns `case_id,event_id,activity,activity_id,activity_type,start,end,resource`
//! are followed by one `attr:<name>` column per attribute name in the log.
//! Attribute cells carry a type tag: `s:` string, `i:` integer, `f:` float,
//! `b:` boolean, `t:` timestamp. An empty cell means the attribute (or the
//! resource) is absent.

use std::collections::BTreeSet;

use pm_core::eventlog::{build_log, AttributeValue, Event, EventLog, LogError};
use thiserror::Error;

use crate::timefmt::{format_ts, parse_ts};

pub const HEADER: [&str; 8] = ["case_id", "event_id", "activity", "activity_id", "activity_type", "start", "end", "resource"];
const ATTR_PREFIX: &str = "attr:";

#[derive(Debug, Error)]
pub enum CsvLogError {
    #[error("header: expected column {index} to be `{expected}`, found `{found}`")]
    Header { index: usize, expected: String, found: String },
    #[error("line {line}, column `{column}`: {message}")]
    Cell { line: u64, column: String, message: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Log(#[from] LogError),
}

fn encode(v: &AttributeValue) -> String {
    match v {
        AttributeValue::String(s) => format!("s:{s}"),
        AttributeValue::Integer(i) => format!("i:{i}"),
        AttributeValue::Float(f) => format!("f:{f}"),
        AttributeValue::Boolean(b) => format!("b:{b}"),
        AttributeValue::Timestamp(t) => format!("t:{}", format_ts(*t)),
    }
}

fn decode(cell: &str) -> Result<AttributeValue, String> {
    let (tag, body) = cell.split_once(':').ok_or_else(|| format!("`{cell}` lacks a type tag"))?;
    let bad = || format!("cannot read `{body}` as type `{tag}`");
    Ok(match tag {
        "s" => AttributeValue::String(body.to_string()),
        "i" => AttributeValue::Integer(body.parse().map_err(|_| bad())?),
        "f" => AttributeValue::Float(body.parse().map_err(|_| bad())?),
        "b" => match body {
            "true" => AttributeValue::Boolean(true),
            "false" => AttributeValue::Boolean(false),
            _ => return Err(bad()),
        },
        "t" => AttributeValue::Timestamp(parse_ts(body).ok_or_else(bad)?),
        _ => return Err(format!("unknown type tag `{tag}`")),
    })
}

pub fn export_csv(log: &EventLog) -> Vec<u8> {
    let names: BTreeSet<&str> = log.events().flat_map(|e| e.attributes.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(names.iter().map(|n| format!("{ATTR_PREFIX}{n}")));
    w.write_record(&header).expect("writing to memory");
    for t in &log.traces {
        for e in &t.events {
            let mut row = vec![
                t.case_id.clone(),
                e.event_id.clone(),
                e.activity.clone(),
                e.activity_id.clone(),
                e.activity_type.clone(),
                format_ts(e.start),
                format_ts(e.end),
                e.resource.clone().unwrap_or_default(),
            ];
            row.extend(names.iter().map(|n| e.attributes.get(*n).map(encode).unwrap_or_default()));
            w.write_record(&row).expect("writing to memory");
        }
    }
    w.into_inner().expect("flush to memory")
}

pub fn import_csv(bytes: &[u8], process_key: &str) -> Result<EventLog, CsvLogError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers()?.clone();
    for (index, expected) in HEADER.iter().enumerate() {
        let found = header.get(index).unwrap_or("");
        if found != *expected {
            return Err(CsvLogError::Header {
                index,
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
    }
    let mut attr_names = Vec::new();
    for (index, name) in header.iter().enumerate().skip(HEADER.len()) {
        match name.strip_prefix(ATTR_PREFIX) {
            Some(n) if !n.is_empty() => attr_names.push(n.to_string()),
            _ => {
                return Err(CsvLogError::Header {
                    index,
                    expected: format!("{ATTR_PREFIX}<name>"),
                    found: name.to_string(),
                })
            }
        }
    }

    let mut pairs = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell_err = |column: &str, message: String| CsvLogError::Cell {
            line,
            column: column.to_string(),
            message,
        };
        let ts = |i: usize| parse_ts(&record[i]).ok_or_else(|| cell_err(HEADER[i], format!("`{}` is not an ISO-8601 timestamp", &record[i])));
        let mut e = Event {
            event_id: record[1].to_string(),
            activity: record[2].to_string(),
            activity_id: record[3].to_string(),
            activity_type: record[4].to_string(),
            start: ts(5)?,
            end: ts(6)?,
            resource: (!record[7].is_empty()).then(|| record[7].to_string()),
            attributes: Default::default(),
        };
        for (k, name) in attr_names.iter().enumerate() {
            let cell = &record[HEADER.len() + k];
            if !cell.is_empty() {
                let v = decode(cell).map_err(|m| cell_err(&format!("{ATTR_PREFIX}{name}"), m))?;
                e.attributes.insert(name.clone(), v);
            }
        }
        if record[0].is_empty() {
            return Err(CsvLogError::Row {
                line,
                message: "empty case_id".into(),
            });
        }
        pairs.push((record[0].to_string(), e));
    }
    Ok(build_log(pairs, process_key)?)
}
