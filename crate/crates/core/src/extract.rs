//! Mapping of engine history rows to event logs, with an incremental cursor.
//!
//! Activity-instance rows become interval events; detail rows become typed
//! event attributes. [`incremental_extract`] remembers, per process key, the
//! highest completion time seen and the ids of the rows completed at exactly
//! that instant, so rows sharing a millisecond are neither lost nor repeated.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{build_log, AttributeValue, Event, EventLog, LogError, Timestamp};

/// One row of the activity-instance history table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActInstRow {
    pub id_: String,
    pub proc_def_key_: String,
    pub proc_inst_id_: String,
    pub act_id_: String,
    pub act_name_: String,
    pub act_type_: String,
    pub start_time_: Timestamp,
    pub end_time_: Option<Timestamp>,
    pub assignee_: Option<String>,
}

/// One row of the variable-detail history table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub act_inst_id_: String,
    pub name_: String,
    pub var_type_: String,
    pub text_: Option<String>,
    pub long_: Option<i64>,
    pub double_: Option<f64>,
    pub time_: Option<Timestamp>,
}

impl DetailRow {
    /// Typed value selected by `var_type_`. Unknown types fall back to the
    /// first populated column (text, long, double, time).
    pub fn value(&self) -> Option<AttributeValue> {
        match self.var_type_.as_str() {
            "string" => self.text_.clone().map(AttributeValue::String),
            "long" | "integer" | "short" => self.long_.map(AttributeValue::Integer),
            "double" => self.double_.map(AttributeValue::Float),
            "date" => self.time_.map(AttributeValue::Timestamp),
            "boolean" => match self.text_.as_deref().map(str::trim) {
                Some(t) if t.eq_ignore_ascii_case("true") => Some(AttributeValue::Boolean(true)),
                Some(t) if t.eq_ignore_ascii_case("false") => Some(AttributeValue::Boolean(false)),
                // the engine itself stores booleans as 0/1 in long_
                _ => self.long_.map(|v| AttributeValue::Boolean(v != 0)),
            },
            _ => {
                if let Some(t) = &self.text_ {
                    Some(AttributeValue::String(t.clone()))
                } else if let Some(v) = self.long_ {
                    Some(AttributeValue::Integer(v))
                } else if let Some(v) = self.double_ {
                    Some(AttributeValue::Float(v))
                } else {
                    self.time_.map(AttributeValue::Timestamp)
                }
            }
        }
    }
}

/// Cursor of one process key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyWatermark {
    pub high_time: Timestamp,
    /// Rows completed exactly at `high_time` that were already emitted.
    pub ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatermarkState {
    pub keys: BTreeMap<String, KeyWatermark>,
}

impl WatermarkState {
    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Whether a completed row was emitted by an earlier extraction.
    pub fn covers(&self, key: &str, id: &str, end: Timestamp) -> bool {
        match self.keys.get(key) {
            None => false,
            Some(wm) => end < wm.high_time || (end == wm.high_time && wm.ids.contains(id)),
        }
    }

    /// Smallest completion time a source must still return. `None` means
    /// everything.
    pub fn lower_bound(&self) -> Option<Timestamp> {
        self.keys.values().map(|w| w.high_time).min()
    }

    fn advance(&mut self, key: &str, id: &str, end: Timestamp) {
        match self.keys.get_mut(key) {
            None => {
                let mut ids = BTreeSet::new();
                ids.insert(String::from(id));
                self.keys.insert(String::from(key), KeyWatermark { high_time: end, ids });
            }
            Some(wm) => {
                if end > wm.high_time {
                    wm.high_time = end;
                    wm.ids.clear();
                    wm.ids.insert(String::from(id));
                } else if end == wm.high_time {
                    wm.ids.insert(String::from(id));
                }
            }
        }
    }
}

/// Events grouped by process key, in row order.
pub type KeyedEvents = BTreeMap<String, Vec<(String, Event)>>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowReport {
    pub input_rows: usize,
    pub emitted: usize,
    pub skipped_incomplete: usize,
    /// Rows whose `id_` repeats an earlier row of the same batch.
    pub rejected_duplicates: Vec<String>,
    /// Rows without any usable activity name or id.
    pub rejected_invalid: Vec<String>,
    /// Completed rows already covered by the watermark.
    pub already_extracted: usize,
}

impl RowReport {
    pub fn is_balanced(&self) -> bool {
        self.input_rows
            == self.emitted
                + self.skipped_incomplete
                + self.rejected_duplicates.len()
                + self.rejected_invalid.len()
                + self.already_extracted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRows {
    pub events: KeyedEvents,
    pub report: RowReport,
}

fn row_to_event(row: &ActInstRow, end: Timestamp) -> Event {
    // gateways and events are frequently unnamed; fall back to the element id
    let activity = if row.act_name_.trim().is_empty() {
        row.act_id_.clone()
    } else {
        row.act_name_.clone()
    };
    Event {
        event_id: row.id_.clone(),
        activity,
        activity_id: row.act_id_.clone(),
        activity_type: row.act_type_.clone(),
        start: row.start_time_,
        end,
        resource: row.assignee_.clone().filter(|a| !a.is_empty()),
        attributes: BTreeMap::new(),
    }
}

fn parse_filtered(rows: &[ActInstRow], state: &WatermarkState) -> ParsedRows {
    let mut report = RowReport {
        input_rows: rows.len(),
        ..RowReport::default()
    };
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut events = KeyedEvents::new();
    for row in rows {
        if !seen.insert(row.id_.as_str()) {
            report.rejected_duplicates.push(row.id_.clone());
            continue;
        }
        let Some(end) = row.end_time_ else {
            report.skipped_incomplete += 1;
            continue;
        };
        if state.covers(&row.proc_def_key_, &row.id_, end) {
            report.already_extracted += 1;
            continue;
        }
        let valid = !row.id_.is_empty()
            && !row.proc_def_key_.is_empty()
            && !row.proc_inst_id_.is_empty()
            && !(row.act_name_.trim().is_empty() && row.act_id_.is_empty())
            && row.start_time_ <= end;
        if !valid {
            report.rejected_invalid.push(row.id_.clone());
            continue;
        }
        report.emitted += 1;
        events
            .entry(row.proc_def_key_.clone())
            .or_default()
            .push((row.proc_inst_id_.clone(), row_to_event(row, end)));
    }
    ParsedRows { events, report }
}

/// Maps activity-instance rows to events, split by process definition key.
///
/// Rows without an end time are skipped and counted; a repeated `id_` keeps
/// the first row and reports the later ones.
pub fn parse_actinst_rows(rows: &[ActInstRow]) -> ParsedRows {
    parse_filtered(rows, &WatermarkState::default())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetailReport {
    pub merged: usize,
    /// Detail rows whose `act_inst_id_` matched no event.
    pub unmatched: usize,
    /// Detail rows with no value for their declared type.
    pub without_value: usize,
}

/// Attaches detail rows to their events (`act_inst_id_ == event_id`).
/// When a name repeats for an event the last row wins.
pub fn merge_detail_attributes(events: &mut KeyedEvents, details: &[DetailRow]) -> DetailReport {
    let mut index: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (key, list) in events.iter() {
        for (i, (_, e)) in list.iter().enumerate() {
            index.insert(e.event_id.clone(), (key.clone(), i));
        }
    }
    let mut report = DetailReport::default();
    for d in details {
        let Some((key, i)) = index.get(&d.act_inst_id_) else {
            report.unmatched += 1;
            continue;
        };
        let Some(value) = d.value() else {
            report.without_value += 1;
            continue;
        };
        let event = &mut events.get_mut(key).expect("indexed key")[*i].1;
        event.attributes.insert(d.name_.clone(), value);
        report.merged += 1;
    }
    report
}

/// Where history rows come from.
pub trait TableSource {
    type Error;

    /// Activity-instance rows, including incomplete ones. When `since` is
    /// given the source may omit completed rows ending strictly before it.
    fn actinst_rows(&mut self, since: Option<Timestamp>) -> Result<Vec<ActInstRow>, Self::Error>;

    /// Detail rows attached to any of the given activity-instance ids.
    fn detail_rows(&mut self, act_inst_ids: &[String]) -> Result<Vec<DetailRow>, Self::Error>;
}

#[derive(Debug, Error)]
pub enum ExtractError<E> {
    #[error("source error: {0}")]
    Source(E),
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// New events per process key. Keys without new events are absent.
    pub logs: BTreeMap<String, EventLog>,
    pub state: WatermarkState,
    pub rows: RowReport,
    pub details: DetailReport,
}

impl Extraction {
    pub fn n_events(&self) -> usize {
        self.logs.values().map(EventLog::n_events).sum()
    }
}

/// Extracts the completed rows not yet covered by `state`.
///
/// The input state is never modified; the caller persists the returned
/// state once the delta has been stored.
pub fn incremental_extract<S: TableSource>(
    source: &mut S,
    state: &WatermarkState,
) -> Result<Extraction, ExtractError<S::Error>> {
    let rows = source.actinst_rows(state.lower_bound()).map_err(ExtractError::Source)?;
    let ParsedRows { mut events, report } = parse_filtered(&rows, state);

    let ids: Vec<String> = events
        .values()
        .flat_map(|list| list.iter().map(|(_, e)| e.event_id.clone()))
        .collect();
    let details = if ids.is_empty() {
        Vec::new()
    } else {
        source.detail_rows(&ids).map_err(ExtractError::Source)?
    };
    let detail_report = merge_detail_attributes(&mut events, &details);

    let mut new_state = state.clone();
    let mut logs = BTreeMap::new();
    for (key, list) in events {
        for (_, e) in &list {
            new_state.advance(&key, &e.event_id, e.end);
        }
        let log = build_log(list, key.clone())?;
        logs.insert(key, log);
    }
    Ok(Extraction {
        logs,
        state: new_state,
        rows: report,
        details: detail_report,
    })
}

/// In-memory tables, mostly for tests and fixtures.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    pub actinst: Vec<ActInstRow>,
    pub details: Vec<DetailRow>,
}

impl TableSource for MemorySource {
    type Error = core::convert::Infallible;

    fn actinst_rows(&mut self, since: Option<Timestamp>) -> Result<Vec<ActInstRow>, Self::Error> {
        Ok(self
            .actinst
            .iter()
            .filter(|r| match (since, r.end_time_) {
                (Some(s), Some(end)) => end >= s,
                _ => true,
            })
            .cloned()
            .collect())
    }

    fn detail_rows(&mut self, act_inst_ids: &[String]) -> Result<Vec<DetailRow>, Self::Error> {
        let wanted: BTreeSet<&str> = act_inst_ids.iter().map(String::as_str).collect();
        Ok(self
            .details
            .iter()
            .filter(|d| wanted.contains(d.act_inst_id_.as_str()))
            .cloned()
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    pub(crate) fn row(id: &str, key: &str, inst: &str, name: &str, start: i64, end: Option<i64>) -> ActInstRow {
        ActInstRow {
            id_: id.to_string(),
            proc_def_key_: key.to_string(),
            proc_inst_id_: inst.to_string(),
            act_id_: name.to_lowercase().replace(' ', "_"),
            act_name_: name.to_string(),
            act_type_: "userTask".to_string(),
            start_time_: Timestamp(start),
            end_time_: end.map(Timestamp),
            assignee_: None,
        }
    }

    fn detail(id: &str, name: &str, var_type: &str) -> DetailRow {
        DetailRow {
            act_inst_id_: id.to_string(),
            name_: name.to_string(),
            var_type_: var_type.to_string(),
            text_: None,
            long_: None,
            double_: None,
            time_: None,
        }
    }

    #[test]
    fn maps_invoice_row() {
        let mut r = row("e1", "invoice", "c1", "Approve Invoice", 1_000, Some(2_000));
        r.assignee_ = Some("demo".to_string());
        let parsed = parse_actinst_rows(&[r]);
        let list = &parsed.events["invoice"];
        assert_eq!(list.len(), 1);
        let (case, e) = &list[0];
        assert_eq!(case, "c1");
        assert_eq!(e.activity, "Approve Invoice");
        assert_eq!(e.activity_type, "userTask");
        assert_eq!(e.resource.as_deref(), Some("demo"));
        assert_eq!((e.start, e.end), (Timestamp(1_000), Timestamp(2_000)));
    }

    #[test]
    fn incomplete_rows_skipped_and_counted() {
        let parsed = parse_actinst_rows(&[row("e1", "k", "c", "A", 0, None), row("e2", "k", "c", "B", 0, Some(1))]);
        assert_eq!(parsed.report.skipped_incomplete, 1);
        assert_eq!(parsed.report.emitted, 1);
        assert!(parsed.report.is_balanced());
    }

    #[test]
    fn keys_split() {
        let parsed = parse_actinst_rows(&[row("e1", "a", "c", "A", 0, Some(1)), row("e2", "b", "c", "B", 0, Some(1))]);
        assert_eq!(parsed.events.len(), 2);
    }

    #[test]
    fn duplicate_rows_reported() {
        let parsed = parse_actinst_rows(&[row("e1", "k", "c", "A", 0, Some(1)), row("e1", "k", "c", "B", 0, Some(1))]);
        assert_eq!(parsed.report.rejected_duplicates, vec!["e1".to_string()]);
        assert_eq!(parsed.events["k"][0].1.activity, "A");
        assert!(parsed.report.is_balanced());
    }

    #[test]
    fn unnamed_gateway_uses_element_id() {
        let mut r = row("e1", "k", "c", "", 0, Some(1));
        r.act_id_ = "gw_1".to_string();
        let parsed = parse_actinst_rows(&[r]);
        assert_eq!(parsed.events["k"][0].1.activity, "gw_1");
    }

    #[test]
    fn detail_merge_typed_and_last_wins() {
        let mut events = parse_actinst_rows(&[row("e1", "k", "c", "A", 0, Some(1))]).events;
        let mut amount = detail("e1", "amount", "double");
        amount.double_ = Some(1500.0);
        let mut x1 = detail("e1", "x", "string");
        x1.text_ = Some("first".to_string());
        let mut x2 = detail("e1", "x", "string");
        x2.text_ = Some("second".to_string());
        let mut ok = detail("e1", "ok", "boolean");
        ok.text_ = Some("true".to_string());
        let mut orphan = detail("nope", "y", "long");
        orphan.long_ = Some(1);
        let report = merge_detail_attributes(&mut events, &[amount, x1, x2, ok, orphan]);
        let attrs = &events["k"][0].1.attributes;
        assert_eq!(attrs["amount"], AttributeValue::Float(1500.0));
        assert_eq!(attrs["x"], AttributeValue::String("second".to_string()));
        assert_eq!(attrs["ok"], AttributeValue::Boolean(true));
        assert_eq!(report.unmatched, 1);
        assert_eq!(report.merged, 4);
    }

    #[test]
    fn empty_details_change_nothing() {
        let mut events = parse_actinst_rows(&[row("e1", "k", "c", "A", 0, Some(1))]).events;
        let before = events.clone();
        merge_detail_attributes(&mut events, &[]);
        assert_eq!(events, before);
    }

    #[test]
    fn empty_state_is_full_extraction_and_repeat_is_empty() {
        let mut src = MemorySource {
            actinst: vec![
                row("e1", "k", "c1", "A", 0, Some(5)),
                row("e2", "k", "c1", "B", 5, Some(9)),
                row("e3", "k", "c2", "A", 1, None),
            ],
            details: vec![],
        };
        let first = incremental_extract(&mut src, &WatermarkState::default()).unwrap();
        assert_eq!(first.n_events(), 2);
        assert_eq!(first.state.keys["k"].high_time, Timestamp(9));
        let second = incremental_extract(&mut src, &first.state).unwrap();
        assert_eq!(second.n_events(), 0);
        assert_eq!(second.state, first.state);
        assert!(second.rows.is_balanced());
    }

    #[test]
    fn same_millisecond_rows_arriving_late_are_emitted_once() {
        let mut src = MemorySource {
            actinst: vec![row("e1", "k", "c1", "A", 0, Some(5))],
            details: vec![],
        };
        let first = incremental_extract(&mut src, &WatermarkState::default()).unwrap();
        src.actinst.push(row("e2", "k", "c2", "A", 0, Some(5)));
        let second = incremental_extract(&mut src, &first.state).unwrap();
        let ids: Vec<_> = second.logs["k"].events().map(|e| e.event_id.clone()).collect();
        assert_eq!(ids, ["e2"]);
        assert_eq!(second.state.keys["k"].ids.len(), 2);
        assert_eq!(second.rows.already_extracted, 1);
    }

    #[test]
    fn newly_completed_row_is_picked_up() {
        let mut src = MemorySource {
            actinst: vec![row("e1", "k", "c1", "A", 0, Some(5)), row("e2", "k", "c1", "B", 5, None)],
            details: vec![],
        };
        let first = incremental_extract(&mut src, &WatermarkState::default()).unwrap();
        src.actinst[1].end_time_ = Some(Timestamp(12));
        let second = incremental_extract(&mut src, &first.state).unwrap();
        assert_eq!(second.n_events(), 1);
        assert_eq!(second.state.keys["k"].high_time, Timestamp(12));
    }
}
