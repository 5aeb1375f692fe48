mod common;

use std::collections::BTreeSet;
use std::process::Command;

use common::*;
use pm_connector::cli::{EXIT_FAILURE, EXIT_OK, EXIT_UNKNOWN_PROCESS, EXIT_UNREACHABLE};
use pm_connector::csv_log::import_csv;
use pm_connector::xes::import_xes;
use serde_json::Value;

fn extracted() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    let (code, out) = pm(&config, &["extract"]);
    assert_eq!(code, EXIT_OK, "{out}");
    (dir, config)
}

#[test]
fn extract_is_idempotent_at_fixpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    let (code, first) = pm(&config, &["extract"]);
    assert_eq!(code, EXIT_OK);
    let rows = fixture_completed_rows();
    let total: usize = rows.values().sum();
    assert!(first.contains(&format!("invoice: {} new events", rows["invoice"])), "{first}");
    assert!(first.contains(&format!("{total} new events")), "{first}");

    let csv_before = std::fs::read(dir.path().join("out/logs/invoice.csv")).unwrap();
    let (code, second) = pm(&config, &["extract"]);
    assert_eq!(code, EXIT_OK);
    assert!(second.lines().any(|l| l == "0 new events"), "{second}");
    assert_eq!(std::fs::read(dir.path().join("out/logs/invoice.csv")).unwrap(), csv_before);
    assert!(!dir.path().join("out/watermark.lock").exists());
}

#[test]
fn extract_writes_matching_csv_and_xes() {
    let (dir, _) = extracted();
    let logs = dir.path().join("out/logs");
    let from_csv = import_csv(&std::fs::read(logs.join("invoice.csv")).unwrap(), "invoice").unwrap();
    let from_xes = import_xes(&std::fs::read_to_string(logs.join("invoice.xes")).unwrap()).unwrap();
    assert_eq!(from_csv, from_xes);
    assert_eq!(from_csv.traces.len(), 42);
    assert!(dir.path().join("out/models/invoice.bpmn").exists());
    // detail rows end up as attributes
    let first = &from_csv.traces[0].events[0];
    assert!(first.attributes.contains_key("amount"), "{first:?}");
}

/// Two snapshots of the history table: at time `cut`, then complete.
/// Rows not yet started are absent and rows still running have no end.
#[test]
fn extract_picks_up_later_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let mut r = csv::Reader::from_path(fixture_dir().join("ACT_HI_ACTINST.csv")).unwrap();
    let header = r.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    let (start, end) = (6, 7);
    assert_eq!((&header[start], &header[end]), ("start_time_", "end_time_"));
    let cut = rows[rows.len() / 2][start].to_string();
    let write = |rows: Vec<csv::StringRecord>| {
        let mut w = csv::Writer::from_path(data.join("ACT_HI_ACTINST.csv")).unwrap();
        w.write_record(&header).unwrap();
        rows.iter().for_each(|r| w.write_record(r).unwrap());
    };
    // the fixture's naive timestamps compare correctly as strings
    write(
        rows.iter()
            .filter(|r| r[start] <= *cut)
            .map(|r| {
                let mut f: Vec<&str> = r.iter().collect();
                if f[end] > cut.as_str() {
                    f[end] = "";
                }
                csv::StringRecord::from(f)
            })
            .collect(),
    );
    let config = dir.path().join("pm.json");
    std::fs::write(&config, r#"{"source":{"csv_dir":"data"},"output_dir":"out"}"#).unwrap();
    let (code, first) = pm(&config, &["extract"]);
    assert_eq!(code, EXIT_OK);
    assert!(!first.starts_with("0 new events"), "{first}");
    write(rows.clone());
    let (code, _) = pm(&config, &["extract"]);
    assert_eq!(code, EXIT_OK);

    let (full, _) = extracted();
    let read = |root: &std::path::Path| {
        let log = import_csv(&std::fs::read(root.join("out/logs/invoice.csv")).unwrap(), "invoice").unwrap();
        log.events().map(|e| e.event_id.clone()).collect::<Vec<_>>()
    };
    let mut a = read(dir.path());
    let mut b = read(full.path());
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn discover_dfg_matches_pair_counter() {
    let (dir, config) = extracted();
    let (code, out) = pm(&config, &["discover", "--process", "invoice", "--format", "dfg"]);
    assert_eq!(code, EXIT_OK);
    let doc: Value = serde_json::from_str(&out).unwrap();
    let log = import_csv(&std::fs::read(dir.path().join("out/logs/invoice.csv")).unwrap(), "invoice").unwrap();
    assert_eq!(dfg_json_counts(&doc), dfg_counts(&log));
    assert!(violations("dfg.json", &doc).is_empty());
}

#[test]
fn conform_against_discovered_net_fits() {
    let (dir, config) = extracted();
    for format in ["pnml-like-json", "tree"] {
        let (code, model) = pm(&config, &["discover", "--process", "invoice", "--format", format]);
        assert_eq!(code, EXIT_OK);
        let path = dir.path().join(if format == "tree" { "model.tree" } else { "model.json" });
        std::fs::write(&path, model).unwrap();
        let (code, out) = pm(&config, &["conform", "--process", "invoice", "--model", path.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{out}");
        let r: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(r["fitness"], 1.0, "{format}: {r}");
        let p = r["precision"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn conform_against_bpmn_model_fits() {
    let (_dir, config) = extracted();
    let model = fixture_dir().join("models/invoice.bpmn");
    let (code, out) = pm(&config, &["conform", "--process", "invoice", "--model", model.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{out}");
    let r: Value = serde_json::from_str(&out).unwrap();
    // the engine only logs what the diagram allows; each of the three
    // instances still running leaves a token behind and misses the final one
    assert_eq!(r["tokens"]["missing"], 3, "{r}");
    assert_eq!(r["tokens"]["remaining"], 3, "{r}");
}

#[test]
fn decisions_on_invoice() {
    let (_dir, config) = extracted();
    let model = fixture_dir().join("models/invoice.bpmn");
    let (code, out) = pm(&config, &["decisions", "--process", "invoice", "--model", model.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{out}");
    let r: Value = serde_json::from_str(&out).unwrap();
    let guards = r["guards"].as_array().unwrap();
    let approved = guards.iter().find(|g| g["gateway_id"] == "invoice_approved").expect("guard at invoice_approved");
    assert_eq!(approved["predicate"]["attribute"], "approved");
    assert_eq!(approved["accuracy"], 1.0);
    let review = guards.iter().find(|g| g["gateway_id"] == "reviewSuccessful_gw").expect("guard at review");
    assert_eq!(review["predicate"]["attribute"], "clarified");
}

#[test]
fn sna_and_cases() {
    let (_dir, config) = extracted();
    let (code, out) = pm(&config, &["sna", "--process", "invoice", "--metric", "working_together"]);
    assert_eq!(code, EXIT_OK);
    let m: Value = serde_json::from_str(&out).unwrap();
    assert!(violations("sna.json", &m).is_empty());
    assert_eq!(m["metric"], "working_together");

    let (code, out) = pm(&config, &["sna", "--process", "invoice", "--metric", "handover", "--normalize"]);
    assert_eq!(code, EXIT_OK);
    let m: Value = serde_json::from_str(&out).unwrap();
    for row in m["values"].as_array().unwrap() {
        let s: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
    }

    let (code, out) = pm(&config, &["cases", "--process", "invoice", "--top", "5"]);
    assert_eq!(code, EXIT_OK);
    let cases: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(cases.as_array().unwrap().len(), 5);
    assert!(violations("cases.json", &cases).is_empty());
}

#[test]
fn activity_type_filter_applies_to_analyses() {
    let (dir, _) = extracted();
    let config = dir.path().join("filtered.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"source":{{"csv_dir":{:?}}},"output_dir":"out","activity_type_filter":["userTask"]}}"#,
            fixture_dir()
        ),
    )
    .unwrap();
    let (code, out) = pm(&config, &["discover", "--process", "invoice"]);
    assert_eq!(code, EXIT_OK);
    let doc: Value = serde_json::from_str(&out).unwrap();
    let acts: BTreeSet<&str> = doc["activities"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(acts, BTreeSet::from(["Approve Invoice", "Prepare Bank Transfer", "Review Invoice"]));
}

#[test]
fn unknown_process_exit_code() {
    let (_dir, config) = extracted();
    let (code, _) = pm(&config, &["discover", "--process", "nope"]);
    assert_eq!(code, EXIT_UNKNOWN_PROCESS);

    let out = Command::new(env!("CARGO_BIN_EXE_pm"))
        .args(["--config", config.to_str().unwrap(), "cases", "--process", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_UNKNOWN_PROCESS));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("expense") && stderr.contains("invoice"), "{stderr}");
}

#[test]
fn unreachable_source_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pm.json");
    std::fs::write(&config, r#"{"source":{"csv_dir":"missing"},"output_dir":"out"}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pm"))
        .args(["--config", config.to_str().unwrap(), "extract"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_UNREACHABLE));

    std::fs::write(&config, r#"{"source":{"database":"sqlite:missing/dir/h.db"},"output_dir":"out"}"#).unwrap();
    assert_eq!(pm(&config, &["extract"]).0, EXIT_UNREACHABLE);
}

#[test]
fn db_url_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pm.json");
    std::fs::write(&config, format!(r#"{{"source":{{"csv_dir":{:?}}},"output_dir":"out"}}"#, fixture_dir())).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pm"))
        .args(["--config", config.to_str().unwrap(), "extract"])
        .env("PM_DB_URL", "sqlite:does/not/exist.db")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_UNREACHABLE));
}

#[test]
fn usage_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    assert_eq!(pm(&config, &["frobnicate"]).0, EXIT_FAILURE);
    assert_eq!(pm(&config, &["discover", "--process", "invoice", "--format", "png"]).0, EXIT_FAILURE);
    assert_eq!(pm(&config, &["sna", "--process", "invoice", "--metric", "gossip"]).0, EXIT_FAILURE);
    let (code, out) = pm(&config, &["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("extract") && out.contains("serve"));
    let missing = dir.path().join("nope.json");
    assert_eq!(pm(&missing, &["extract"]).0, EXIT_FAILURE);
}

#[test]
fn corrupt_state_is_reported_not_reset() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    std::fs::write(dir.path().join("out/watermark.json"), "{not json").unwrap();
    assert_eq!(pm(&config, &["extract"]).0, EXIT_FAILURE);
    assert!(!dir.path().join("out/logs").exists());
}

#[test]
fn concurrent_extraction_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    std::fs::write(dir.path().join("out/watermark.lock"), "1").unwrap();
    assert_eq!(pm(&config, &["extract"]).0, EXIT_FAILURE);
}
