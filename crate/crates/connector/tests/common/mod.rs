//! Shared helpers for the connector integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pm_core::eventlog::{build_log, AttributeValue, Event, EventLog, Timestamp};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture_dir() -> PathBuf {
    crate_dir().join("fixtures/invoice")
}

/// Writes a config next to a fresh output directory and returns both.
pub fn fixture_config(dir: &Path) -> PathBuf {
    let fixtures = fixture_dir();
    let config = serde_json::json!({
        "source": {"csv_dir": fixtures},
        "models": {"dir": fixtures.join("models")},
        "output_dir": "out",
    });
    let path = dir.join("pm.json");
    std::fs::write(&path, config.to_string()).unwrap();
    path
}

/// Runs the CLI in-process; returns (exit code, stdout).
pub fn pm(config: &Path, args: &[&str]) -> (i32, String) {
    let mut argv = vec!["pm", "--config", config.to_str().unwrap()];
    argv.extend_from_slice(args);
    let mut out = Vec::new();
    let code = pm_connector::cli::run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

pub fn schema(name: &str) -> jsonschema::Validator {
    let path = crate_dir().join("schemas").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

/// Schema violations of `value`, rendered; empty when valid.
pub fn violations(schema_name: &str, value: &Value) -> Vec<String> {
    schema(schema_name)
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect()
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    let res = app
        .clone()
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = res.status();
    let content_type = res
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        body,
    }
}

const TEXTS: &[&str] = &[
    "Approve Invoice",
    "Rechnung prüfen",
    "請求書を承認",
    "quote \" and 'apostrophe'",
    "<tag> & ampersand;",
    "comma, separated",
    "line\nbreak",
    "tab\there",
    "cr\r\nlf",
    "  padded  ",
    "emoji 🧾",
    "s:looks-typed",
];

fn text(rng: &mut ChaCha8Rng) -> String {
    let base = TEXTS.choose(rng).unwrap();
    if rng.gen_bool(0.5) {
        format!("{base} {}", rng.gen_range(0..50))
    } else {
        base.to_string()
    }
}

fn value(rng: &mut ChaCha8Rng) -> AttributeValue {
    match rng.gen_range(0..5) {
        0 => AttributeValue::String(if rng.gen_bool(0.1) { String::new() } else { text(rng) }),
        1 => AttributeValue::Integer(match rng.gen_range(0..3) {
            0 => rng.gen_range(-1000..1000),
            1 => i64::MAX,
            _ => rng.gen(),
        }),
        2 => AttributeValue::Float(match rng.gen_range(0..4) {
            0 => rng.gen_range(-1e6..1e6),
            1 => rng.gen::<f64>() * 1e-300,
            2 => (rng.gen_range(0..100000) as f64) / 100.0,
            _ => f64::MAX,
        }),
        3 => AttributeValue::Boolean(rng.gen()),
        _ => AttributeValue::Timestamp(random_ts(rng)),
    }
}

/// Millisecond timestamps between 1950 and 2100.
fn random_ts(rng: &mut ChaCha8Rng) -> Timestamp {
    Timestamp(rng.gen_range(-631_152_000_000i64..4_102_444_800_000))
}

const ATTR_NAMES: &[&str] = &["amount", "approved", "creditor", "größe", "a,b", "x \"y\"", "due date", "n"];

/// Random log with every attribute type and awkward strings.
pub fn random_rich_log(rng: &mut ChaCha8Rng, key: &str) -> EventLog {
    let mut pairs = Vec::new();
    let mut id = 0;
    for c in 0..rng.gen_range(0..=25) {
        let case = if rng.gen_bool(0.2) { format!("case {c} ü") } else { format!("c{c}") };
        for _ in 0..rng.gen_range(1..=12) {
            let start = random_ts(rng);
            let mut e = Event::instant(format!("ev-{id}"), text(rng), start);
            e.end = Timestamp(start.0 + rng.gen_range(0..86_400_000));
            e.activity_id = if rng.gen_bool(0.5) { format!("act_{}", rng.gen_range(0..9)) } else { text(rng) };
            e.activity_type = ["userTask", "serviceTask", "exclusiveGateway", "startEvent"].choose(rng).unwrap().to_string();
            e.resource = rng.gen_bool(0.7).then(|| text(rng));
            for _ in 0..rng.gen_range(0..4) {
                e.attributes.insert(ATTR_NAMES.choose(rng).unwrap().to_string(), value(rng));
            }
            id += 1;
            pairs.push((case.clone(), e));
        }
    }
    build_log(pairs, key).unwrap()
}

/// Directly-follows counts from walking each trace pairwise.
pub fn dfg_counts(log: &EventLog) -> (BTreeMap<String, u64>, BTreeMap<(String, String), u64>) {
    let mut acts = BTreeMap::new();
    let mut edges = BTreeMap::new();
    for t in &log.traces {
        for (i, e) in t.events.iter().enumerate() {
            *acts.entry(e.activity.clone()).or_insert(0) += 1;
            if let Some(next) = t.events.get(i + 1) {
                *edges.entry((e.activity.clone(), next.activity.clone())).or_insert(0) += 1;
            }
        }
    }
    (acts, edges)
}

/// Reads the counts back out of a DFG JSON document.
pub fn dfg_json_counts(doc: &Value) -> (BTreeMap<String, u64>, BTreeMap<(String, String), u64>) {
    let acts = doc["activities"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v.as_u64().unwrap()))
        .collect();
    let edges = doc["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                (e["from"].as_str().unwrap().to_string(), e["to"].as_str().unwrap().to_string()),
                e["count"].as_u64().unwrap(),
            )
        })
        .collect();
    (acts, edges)
}

/// Row counts of the fixture per process key, read with the csv crate alone.
pub fn fixture_completed_rows() -> HashMap<String, usize> {
    let mut r = csv::Reader::from_path(fixture_dir().join("ACT_HI_ACTINST.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let key = headers.iter().position(|h| h == "proc_def_key_").unwrap();
    let end = headers.iter().position(|h| h == "end_time_").unwrap();
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec.unwrap();
        if !rec[end].is_empty() {
            *out.entry(rec[key].to_string()).or_insert(0) += 1;
        }
    }
    out
}
