//! XES 1.0 export and import.
//!
//! An event is written with `concept:name` (activity), `time:timestamp`
//! (end), `identity:id` (event id), `org:resource`, `activity_id`,
//! `activity_type` and `start_timestamp`, followed by its own attributes.
//! On import the first attribute carrying a reserved key fills the field;
//! later ones are ordinary attributes.

use std::fmt::Write as _;

use pm_core::eventlog::{build_log, AttributeValue, Attributes, Event, EventLog, LogError};
use pm_core::Timestamp;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;
use thiserror::Error;

use crate::timefmt::{format_ts, parse_ts};

const EXTENSIONS: &[(&str, &str, &str)] = &[
    ("Concept", "concept", "http://www.xes-standard.org/concept.xesext"),
    ("Time", "time", "http://www.xes-standard.org/time.xesext"),
    ("Organizational", "org", "http://www.xes-standard.org/org.xesext"),
    ("Identity", "identity", "http://www.xes-standard.org/identity.xesext"),
];

#[derive(Debug, Error)]
pub enum XesError {
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },
    #[error("document ends before </log>")]
    Truncated,
    #[error("root element is <{0}>, expected <log>")]
    NotXes(String),
    #[error("trace {trace}: {message}")]
    Trace { trace: usize, message: String },
    #[error(transparent)]
    Log(#[from] LogError),
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // attribute-value normalisation would turn these into spaces
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn attr(out: &mut String, indent: usize, tag: &str, key: &str, value: &str) {
    let _ = writeln!(out, "{:indent$}<{tag} key=\"{}\" value=\"{}\"/>", "", escape(key), escape(value));
}

fn typed_attr(out: &mut String, indent: usize, key: &str, value: &AttributeValue) {
    match value {
        AttributeValue::String(s) => attr(out, indent, "string", key, s),
        AttributeValue::Integer(v) => attr(out, indent, "int", key, &v.to_string()),
        AttributeValue::Float(v) => attr(out, indent, "float", key, &v.to_string()),
        AttributeValue::Boolean(v) => attr(out, indent, "boolean", key, &v.to_string()),
        AttributeValue::Timestamp(t) => attr(out, indent, "date", key, &format_ts(*t)),
    }
}

pub fn export_xes(log: &EventLog) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<log xes.version=\"1.0\" xes.features=\"nested-attributes\" xmlns=\"http://www.xes-standard.org/\">\n");
    for (name, prefix, uri) in EXTENSIONS {
        let _ = writeln!(out, "  <extension name=\"{name}\" prefix=\"{prefix}\" uri=\"{uri}\"/>");
    }
    out.push_str("  <classifier name=\"Activity\" keys=\"concept:name\"/>\n");
    attr(&mut out, 2, "string", "concept:name", &log.process_key);
    for trace in &log.traces {
        out.push_str("  <trace>\n");
        attr(&mut out, 4, "string", "concept:name", &trace.case_id);
        for e in &trace.events {
            out.push_str("    <event>\n");
            attr(&mut out, 6, "string", "concept:name", &e.activity);
            attr(&mut out, 6, "date", "time:timestamp", &format_ts(e.end));
            attr(&mut out, 6, "id", "identity:id", &e.event_id);
            if let Some(r) = &e.resource {
                attr(&mut out, 6, "string", "org:resource", r);
            }
            attr(&mut out, 6, "string", "activity_id", &e.activity_id);
            attr(&mut out, 6, "string", "activity_type", &e.activity_type);
            attr(&mut out, 6, "date", "start_timestamp", &format_ts(e.start));
            for (k, v) in &e.attributes {
                typed_attr(&mut out, 6, k, v);
            }
            out.push_str("    </event>\n");
        }
        out.push_str("  </trace>\n");
    }
    out.push_str("</log>\n");
    out
}

#[derive(Default)]
struct PendingEvent {
    activity: Option<String>,
    end: Option<Timestamp>,
    event_id: Option<String>,
    resource: Option<String>,
    activity_id: Option<String>,
    activity_type: Option<String>,
    start: Option<Timestamp>,
    attributes: Attributes,
}

#[derive(Default)]
struct PendingTrace {
    case_id: Option<String>,
    events: Vec<PendingEvent>,
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Log,
    Trace,
    Event,
    /// Anything whose content is ignored: globals, nested attributes, unknown elements.
    Skip,
}

const VALUE_TAGS: &[&str] = &["string", "date", "int", "float", "boolean", "id"];

struct Parsed {
    tag: String,
    key: String,
    value: Option<String>,
}

fn parse_value(p: &Parsed) -> Result<AttributeValue, String> {
    let raw = p.value.as_deref().ok_or_else(|| format!("attribute `{}` has no value", p.key))?;
    let bad = || format!("attribute `{}`: cannot read `{raw}` as {}", p.key, p.tag);
    Ok(match p.tag.as_str() {
        "string" | "id" => AttributeValue::String(raw.to_string()),
        "int" => AttributeValue::Integer(raw.trim().parse().map_err(|_| bad())?),
        "float" => AttributeValue::Float(raw.trim().parse().map_err(|_| bad())?),
        "boolean" => match raw.trim() {
            "true" => AttributeValue::Boolean(true),
            "false" => AttributeValue::Boolean(false),
            _ => return Err(bad()),
        },
        "date" => AttributeValue::Timestamp(parse_ts(raw).ok_or_else(bad)?),
        _ => unreachable!("filtered by VALUE_TAGS"),
    })
}

fn absorb(ev: &mut PendingEvent, p: &Parsed) -> Result<(), String> {
    let value = parse_value(p)?;
    let text = |v: &AttributeValue| match v {
        AttributeValue::String(s) => Some(s.clone()),
        _ => None,
    };
    let time = |v: &AttributeValue| match v {
        AttributeValue::Timestamp(t) => Some(*t),
        _ => None,
    };
    let slot_taken = match p.key.as_str() {
        "concept:name" if ev.activity.is_none() => text(&value).map(|s| ev.activity = Some(s)),
        "time:timestamp" if ev.end.is_none() => time(&value).map(|t| ev.end = Some(t)),
        "identity:id" if ev.event_id.is_none() => text(&value).map(|s| ev.event_id = Some(s)),
        "org:resource" if ev.resource.is_none() => text(&value).map(|s| ev.resource = Some(s)),
        "activity_id" if ev.activity_id.is_none() => text(&value).map(|s| ev.activity_id = Some(s)),
        "activity_type" if ev.activity_type.is_none() => text(&value).map(|s| ev.activity_type = Some(s)),
        "start_timestamp" if ev.start.is_none() => time(&value).map(|t| ev.start = Some(t)),
        _ => None,
    };
    if slot_taken.is_none() {
        ev.attributes.insert(p.key.clone(), value);
    }
    Ok(())
}

fn read_attr(e: &BytesStart<'_>) -> Result<Parsed, quick_xml::Error> {
    let tag = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
    let mut key = String::new();
    let mut value = None;
    for a in e.attributes() {
        let a = a.map_err(quick_xml::Error::from)?;
        match a.key.as_ref() {
            b"key" => key = a.unescape_value()?.into_owned(),
            b"value" => value = Some(a.unescape_value()?.into_owned()),
            _ => {}
        }
    }
    Ok(Parsed { tag, key, value })
}

fn finish_trace(index: usize, t: PendingTrace, out: &mut Vec<(String, Event)>) -> Result<(), XesError> {
    let err = |message: String| XesError::Trace { trace: index, message };
    let case_id = t.case_id.ok_or_else(|| err("missing concept:name".into()))?;
    for (j, p) in t.events.into_iter().enumerate() {
        let activity = p.activity.ok_or_else(|| err(format!("event {j} has no concept:name")))?;
        let end = p.end.ok_or_else(|| err(format!("event {j} has no time:timestamp")))?;
        out.push((
            case_id.clone(),
            Event {
                event_id: p.event_id.unwrap_or_else(|| format!("{case_id}#{j}")),
                activity_id: p.activity_id.unwrap_or_else(|| activity.clone()),
                activity,
                activity_type: p.activity_type.unwrap_or_else(|| "task".into()),
                start: p.start.unwrap_or(end),
                end,
                resource: p.resource,
                attributes: p.attributes,
            },
        ));
    }
    Ok(())
}

/// Reads an XES document. Events without `identity:id` get `<case>#<index>`
/// as id, events without `start_timestamp` start at their timestamp.
pub fn import_xes(xml: &str) -> Result<EventLog, XesError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let xml_err = |r: &Reader<&[u8]>, e: quick_xml::Error| XesError::Xml {
        position: r.buffer_position(),
        message: e.to_string(),
    };

    let mut stack: Vec<Ctx> = Vec::new();
    let mut process_key: Option<String> = None;
    let mut trace: Option<PendingTrace> = None;
    let mut n_traces = 0;
    let mut pairs = Vec::new();
    let mut seen_root = false;

    loop {
        let ev = reader.read_event().map_err(|e| xml_err(&reader, e))?;
        let (start, empty) = match &ev {
            XmlEvent::Start(s) => (Some(s.clone()), false),
            XmlEvent::Empty(s) => (Some(s.clone()), true),
            XmlEvent::End(_) => {
                match stack.pop() {
                    Some(Ctx::Trace) => {
                        let t = trace.take().expect("open trace");
                        finish_trace(n_traces, t, &mut pairs)?;
                        n_traces += 1;
                    }
                    Some(_) => {}
                    None => unreachable!("reader checks end names"),
                }
                continue;
            }
            XmlEvent::Eof => break,
            _ => continue,
        };
        let start = start.expect("start or empty");
        let name = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
        let parent = stack.last().copied();
        let ctx = match parent {
            None => {
                if name != "log" || seen_root {
                    return Err(XesError::NotXes(name));
                }
                seen_root = true;
                Ctx::Log
            }
            Some(Ctx::Skip) => Ctx::Skip,
            Some(Ctx::Log) if name == "trace" => {
                trace = Some(PendingTrace::default());
                Ctx::Trace
            }
            Some(Ctx::Trace) if name == "event" => {
                trace.as_mut().expect("open trace").events.push(PendingEvent::default());
                Ctx::Event
            }
            Some(p) if VALUE_TAGS.contains(&name.as_str()) => {
                let parsed = read_attr(&start).map_err(|e| xml_err(&reader, e))?;
                let fail = |message: String| XesError::Trace { trace: n_traces, message };
                match p {
                    Ctx::Log if parsed.key == "concept:name" && process_key.is_none() => process_key = parsed.value,
                    Ctx::Trace if parsed.key == "concept:name" => {
                        let t = trace.as_mut().expect("open trace");
                        if t.case_id.is_none() {
                            t.case_id = parsed.value;
                        }
                    }
                    Ctx::Event => {
                        let t = trace.as_mut().expect("open trace");
                        absorb(t.events.last_mut().expect("open event"), &parsed).map_err(fail)?;
                    }
                    _ => {}
                }
                // nested attributes are not part of the model
                Ctx::Skip
            }
            Some(_) => Ctx::Skip,
        };
        if !empty {
            stack.push(ctx);
        } else if ctx == Ctx::Trace {
            finish_trace(n_traces, trace.take().expect("open trace"), &mut pairs)?;
            n_traces += 1;
        }
    }
    if !stack.is_empty() || !seen_root {
        return Err(XesError::Truncated);
    }
    Ok(build_log(pairs, process_key.unwrap_or_default())?)
}
