mod common;

use std::collections::BTreeSet;

use axum::http::StatusCode;
use axum::Router;
use common::*;
use pm_connector::service::{router, ApiData};
use pm_connector::store::Store;
use serde_json::Value;

fn fixture_app() -> (tempfile::TempDir, Router, ApiData) {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    assert_eq!(pm(&config, &["extract"]).0, 0);
    let store = Store::new(dir.path().join("out"));
    let app = router(ApiData::load(&store, &BTreeSet::new()).unwrap(), None);
    (dir, app, ApiData::load(&store, &BTreeSet::new()).unwrap())
}

#[tokio::test]
async fn empty_output_dir_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(ApiData::load(&Store::new(dir.path()), &BTreeSet::new()).unwrap(), None);
    let r = get(&app, "/api/processes").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json(), serde_json::json!([]));
}

#[tokio::test]
async fn process_list() {
    let (_d, app, data) = fixture_app();
    let r = get(&app, "/api/processes").await;
    let v = r.json();
    assert!(violations("processes.json", &v).is_empty());
    let keys: Vec<&str> = v.as_array().unwrap().iter().map(|p| p["key"].as_str().unwrap()).collect();
    assert_eq!(keys, ["expense", "invoice"]);
    assert_eq!(v[1]["n_events"].as_u64().unwrap() as usize, data.logs["invoice"].n_events());
    assert_eq!(v[0]["n_cases"], 6);
}

#[tokio::test]
async fn dfg_task_filter_matches_filtered_log() {
    let (_d, app, data) = fixture_app();
    let log = &data.logs["invoice"];
    let task_types = pm_core::bpmn::TASK_TYPES.iter().map(|s| s.to_string()).collect();
    let want = dfg_counts(&log.filter_activity_types(&task_types));
    let v = get(&app, "/api/processes/invoice/dfg?types=task").await.json();
    assert!(violations("dfg.json", &v).is_empty());
    assert_eq!(dfg_json_counts(&v), want);
    assert!(!v["activities"].as_object().unwrap().contains_key("Invoice approved?"));

    let all = get(&app, "/api/processes/invoice/dfg").await.json();
    assert_eq!(dfg_json_counts(&all), dfg_counts(log));
}

#[tokio::test]
async fn dfg_date_range_is_trace_containment() {
    let (_d, app, data) = fixture_app();
    let log = &data.logs["invoice"];
    let from = log.traces[10].first().start;
    let to = log.traces[30].last().end;
    let kept: Vec<_> = log
        .traces
        .iter()
        .filter(|t| t.first().start >= from && t.last().end <= to)
        .cloned()
        .collect();
    let want = dfg_counts(&pm_core::EventLog {
        process_key: "invoice".into(),
        traces: kept,
    });
    let uri = format!(
        "/api/processes/invoice/dfg?from={}&to={}",
        pm_connector::timefmt::format_ts(from),
        to.0
    );
    let v = get(&app, &uri).await.json();
    assert_eq!(dfg_json_counts(&v), want);
}

#[tokio::test]
async fn cases_and_case_detail() {
    let (_d, app, data) = fixture_app();
    let v = get(&app, "/api/processes/invoice/cases?top=3").await.json();
    assert!(violations("cases.json", &v).is_empty(), "{:?}", violations("cases.json", &v));
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 3);
    let longest = data.logs["invoice"]
        .traces
        .iter()
        .map(|t| t.last().end.0 - t.first().start.0)
        .max()
        .unwrap();
    assert_eq!(list[0]["duration"].as_f64().unwrap(), longest as f64 / 1000.0);

    let id = list[0]["case_id"].as_str().unwrap();
    let detail = get(&app, &format!("/api/processes/invoice/cases/{id}")).await.json();
    assert!(violations("case.json", &detail).is_empty(), "{:?}", violations("case.json", &detail));
    assert_eq!(detail["events"].as_array().unwrap().len(), list[0]["n_events"].as_u64().unwrap() as usize);

    let missing = get(&app, "/api/processes/invoice/cases/no-such-case").await;
    assert_eq!(missing.status, StatusCode::NOT_FOUND);
    assert!(violations("error.json", &missing.json()).is_empty());
}

#[tokio::test]
async fn sna_metrics() {
    let (_d, app, _) = fixture_app();
    for metric in ["handover", "working_together", "similar_activities"] {
        let v = get(&app, &format!("/api/processes/invoice/sna?metric={metric}")).await.json();
        assert!(violations("sna.json", &v).is_empty());
        assert_eq!(v["metric"], metric);
    }
    let default = get(&app, "/api/processes/invoice/sna").await.json();
    assert_eq!(default["metric"], "handover");
}

#[tokio::test]
async fn model_and_decoration() {
    let (_d, app, data) = fixture_app();
    let r = get(&app, "/api/processes/invoice/model").await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.content_type.starts_with("application/xml"));
    assert!(String::from_utf8(r.body).unwrap().contains("Approve Invoice"));

    let v = get(&app, "/api/processes/invoice/decoration").await.json();
    assert!(violations("decoration.json", &v).is_empty());
    let approvals = data.logs["invoice"].events().filter(|e| e.activity_id == "approveInvoice").count();
    assert_eq!(v["nodes"]["approveInvoice"]["frequency"].as_u64().unwrap() as usize, approvals);
    assert_eq!(v["unmatched"], serde_json::json!({}));

    // the expense process has a log but no diagram
    let r = get(&app, "/api/processes/expense/model").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert!(violations("error.json", &r.json()).is_empty());
}

#[tokio::test]
async fn unknown_key_is_404_with_known_keys() {
    let (_d, app, _) = fixture_app();
    for path in ["dfg", "cases", "cases/x", "sna", "model", "decoration"] {
        let r = get(&app, &format!("/api/processes/nope/{path}")).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{path}");
        let v = r.json();
        assert!(violations("error.json", &v).is_empty());
        assert_eq!(v["known"], serde_json::json!(["expense", "invoice"]));
    }
    let r = get(&app, "/api/nothing-here").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert!(r.json()["error"].is_string());
}

#[tokio::test]
async fn bad_parameters_are_400_with_field() {
    let (_d, app, _) = fixture_app();
    let cases = [
        ("/api/processes/invoice/dfg?types=some", "types"),
        ("/api/processes/invoice/dfg?from=yesterday", "from"),
        ("/api/processes/invoice/dfg?to=2024-13-01", "to"),
        ("/api/processes/invoice/dfg?from=2024-03-10T00:00:00Z&to=2024-03-01T00:00:00Z", "from"),
        ("/api/processes/invoice/dfg?colour=red", "colour"),
        ("/api/processes/invoice/cases?top=0", "top"),
        ("/api/processes/invoice/cases?top=ten", "top"),
        ("/api/processes/invoice/sna?metric=gossip", "metric"),
        ("/api/processes/invoice/sna?normalize=maybe", "normalize"),
        ("/api/processes?page=2", "page"),
    ];
    for (uri, field) in cases {
        let r = get(&app, uri).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{uri}");
        let v: Value = r.json();
        assert!(violations("error.json", &v).is_empty());
        assert_eq!(v["field"], field, "{uri}");
    }
}

#[tokio::test]
async fn static_ui_served_next_to_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>ui</h1>").unwrap();
    let app = router(ApiData::default(), Some(dir.path().to_path_buf()));
    let r = get(&app, "/index.html").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, b"<h1>ui</h1>");
    assert_eq!(get(&app, "/").await.status, StatusCode::OK);
    assert_eq!(get(&app, "/api/processes").await.json(), serde_json::json!([]));
}
