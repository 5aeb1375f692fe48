//! Interval event logs.
//!
//! One [`Event`] corresponds to one activity-instance row of the engine's
//! history: it carries both the start and the end timestamp instead of a
//! start/complete lifecycle pair. Events are grouped into [`Trace`]s by case
//! id and every [`EventLog`] belongs to exactly one process definition key.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    /// Signed distance `self - earlier` in seconds.
    pub fn seconds_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1000.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Typed value of a dynamic event attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum AttributeValue {
    String(String),
    Integer(i64),
    Float(f64),
    Boolean(bool),
    Timestamp(Timestamp),
}

impl AttributeValue {
    /// Numeric view used by threshold learners; strings and booleans have none.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttributeValue::Integer(v) => Some(*v as f64),
            AttributeValue::Float(v) => Some(*v),
            AttributeValue::Timestamp(t) => Some(t.0 as f64),
            AttributeValue::String(_) | AttributeValue::Boolean(_) => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            AttributeValue::String(_) => "string",
            AttributeValue::Integer(_) => "integer",
            AttributeValue::Float(_) => "float",
            AttributeValue::Boolean(_) => "boolean",
            AttributeValue::Timestamp(_) => "timestamp",
        }
    }
}

pub type Attributes = BTreeMap<String, AttributeValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: String,
    pub activity: String,
    /// Id of the BPMN element that produced the event.
    pub activity_id: String,
    /// BPMN element type, e.g. `userTask` or `exclusiveGateway`.
    pub activity_type: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub resource: Option<String>,
    #[serde(default)]
    pub attributes: Attributes,
}

impl Event {
    /// Event with `start == end`, no resource and no attributes.
    pub fn instant(event_id: impl Into<String>, activity: impl Into<String>, at: Timestamp) -> Self {
        let activity = activity.into();
        Event {
            event_id: event_id.into(),
            activity_id: activity.clone(),
            activity,
            activity_type: String::from("task"),
            start: at,
            end: at,
            resource: None,
            attributes: Attributes::new(),
        }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.end.seconds_since(self.start)
    }

    fn sort_key(&self) -> (Timestamp, Timestamp, &str) {
        (self.start, self.end, self.event_id.as_str())
    }

    fn validate(&self) -> Result<(), LogError> {
        if self.event_id.is_empty() {
            return Err(LogError::InvalidEvent {
                event_id: String::new(),
                reason: "empty event id",
            });
        }
        if self.activity.is_empty() {
            return Err(LogError::InvalidEvent {
                event_id: self.event_id.clone(),
                reason: "empty activity name",
            });
        }
        if self.start > self.end {
            return Err(LogError::InvalidEvent {
                event_id: self.event_id.clone(),
                reason: "start after end",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn first(&self) -> &Event {
        &self.events[0]
    }

    pub fn last(&self) -> &Event {
        &self.events[self.events.len() - 1]
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> + '_ {
        self.events.iter().map(|e| e.activity.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub process_key: String,
    pub traces: Vec<Trace>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogError {
    #[error("duplicate event id `{0}`")]
    DuplicateEventId(String),
    #[error("invalid event `{event_id}`: {reason}")]
    InvalidEvent { event_id: String, reason: &'static str },
    #[error("empty case id for event `{0}`")]
    EmptyCaseId(String),
}

/// Groups `(case_id, event)` pairs into a log.
///
/// Traces come out ordered by case id and each trace is sorted by
/// `(start, end, event_id)`, so the result does not depend on input order.
pub fn build_log<I>(events: I, process_key: impl Into<String>) -> Result<EventLog, LogError>
where
    I: IntoIterator<Item = (String, Event)>,
{
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut cases: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    for (case_id, event) in events {
        event.validate()?;
        if case_id.is_empty() {
            return Err(LogError::EmptyCaseId(event.event_id));
        }
        if !seen.insert(event.event_id.clone()) {
            return Err(LogError::DuplicateEventId(event.event_id));
        }
        cases.entry(case_id).or_default().push(event);
    }
    let traces = cases
        .into_iter()
        .map(|(case_id, mut events)| {
            events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
            Trace { case_id, events }
        })
        .collect();
    Ok(EventLog {
        process_key: process_key.into(),
        traces,
    })
}

impl EventLog {
    pub fn empty(process_key: impl Into<String>) -> Self {
        EventLog {
            process_key: process_key.into(),
            traces: Vec::new(),
        }
    }

    pub fn n_events(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> + '_ {
        self.traces.iter().flat_map(|t| t.events.iter())
    }

    pub fn trace(&self, case_id: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.case_id == case_id)
    }

    /// Flattens the log back into `(case_id, event)` pairs.
    pub fn into_pairs(self) -> impl Iterator<Item = (String, Event)> {
        self.traces.into_iter().flat_map(|t| {
            let case_id = t.case_id;
            t.events.into_iter().map(move |e| (case_id.clone(), e))
        })
    }

    /// Union of two logs of the same process. Fails if an event id occurs in both.
    pub fn merged(self, other: EventLog) -> Result<EventLog, LogError> {
        let key = self.process_key.clone();
        build_log(self.into_pairs().chain(other.into_pairs()), key)
    }

    /// Keeps only events whose `activity_type` is in `keep`; traces left
    /// empty are dropped and the remaining case order is unchanged.
    pub fn filter_activity_types(&self, keep: &BTreeSet<String>) -> EventLog {
        self.filter_events(|e| keep.contains(&e.activity_type))
    }

    pub fn filter_events<F: Fn(&Event) -> bool>(&self, keep: F) -> EventLog {
        let traces = self
            .traces
            .iter()
            .filter_map(|t| {
                let events: Vec<Event> = t.events.iter().filter(|e| keep(e)).cloned().collect();
                (!events.is_empty()).then(|| Trace {
                    case_id: t.case_id.clone(),
                    events,
                })
            })
            .collect();
        EventLog {
            process_key: self.process_key.clone(),
            traces,
        }
    }

    /// Keeps traces whose first start is `>= from` and last end is `<= to`.
    pub fn filter_time_range(&self, from: Option<Timestamp>, to: Option<Timestamp>) -> EventLog {
        let traces = self
            .traces
            .iter()
            .filter(|t| {
                from.is_none_or(|f| t.first().start >= f) && to.is_none_or(|x| t.last().end <= x)
            })
            .cloned()
            .collect();
        EventLog {
            process_key: self.process_key.clone(),
            traces,
        }
    }

    /// Activity sequences, one per trace.
    pub fn variants(&self) -> Vec<Vec<String>> {
        self.traces
            .iter()
            .map(|t| t.events.iter().map(|e| e.activity.clone()).collect())
            .collect()
    }

    /// Builds a log of instantaneous events from plain activity sequences.
    /// Cases are named `c0000`, `c0001`, ...; event `j` of case `i` happens at `1000 * j` ms.
    pub fn from_sequences<S: AsRef<str>>(process_key: &str, sequences: &[Vec<S>]) -> EventLog {
        let traces = sequences
            .iter()
            .enumerate()
            .map(|(i, seq)| Trace {
                case_id: alloc::format!("c{:04}", i),
                events: seq
                    .iter()
                    .enumerate()
                    .map(|(j, a)| {
                        Event::instant(
                            alloc::format!("c{:04}-e{:03}", i, j),
                            a.as_ref(),
                            Timestamp(1000 * j as i64),
                        )
                    })
                    .collect(),
            })
            .filter(|t| !t.events.is_empty())
            .collect();
        EventLog {
            process_key: String::from(process_key),
            traces,
        }
    }
}
