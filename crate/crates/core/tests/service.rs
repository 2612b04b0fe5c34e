use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use probmission::hplp::InferenceParams;
use probmission::landscape::MissionLandscape;
use probmission::pipeline::{run_mission, MapInput, MissionConfig, OutputPaths};
use probmission::scenario::ScenarioFixture;
use probmission::service::{router, ServiceConfig};

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn app() -> Router {
    router(ServiceConfig::default()).unwrap()
}

fn park_payload(rows: usize, cols: usize, map_ref: bool) -> Value {
    let f = ScenarioFixture::builtin("park").unwrap();
    let read = |p| std::fs::read_to_string(p).unwrap();
    let parse = |p| serde_json::from_str::<Value>(&read(p)).unwrap();
    let grid = f.grid.with_resolution(rows, cols).unwrap();
    let mut v = json!({
        "mapping": parse(&f.mapping),
        "error_model": parse(&f.errors),
        "rules": read(&f.rules),
        "grid": grid,
        "params": {"sample_count": 400, "seed": 11, "n_ensemble": 30, "tiling": 1},
    });
    if map_ref {
        v["map_ref"] = json!("park");
    } else {
        v["geojson"] = parse(&f.geojson);
    }
    v
}

#[tokio::test]
async fn health() {
    let (s, v) = call(&app(), "GET", "/api/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"status": "ok"}));
}

#[tokio::test]
async fn parse_listing4_lists_the_landscape_query() {
    let rules = include_str!("../fixtures/listings/listing4.pl");
    let (s, v) = call(&app(), "POST", "/api/parse", Some(json!({"rules": rules}).to_string())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"ok": true, "queries": ["landscape(R,C)"]}));
}

#[tokio::test]
async fn parse_errors_carry_positions() {
    let rules = "a :- b.\nc :- d(.\n";
    let (s, v) = call(&app(), "POST", "/api/parse", Some(json!({"rules": rules}).to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let d = &v["diagnostics"][0];
    assert_eq!(d["line"], 2);
    assert!(d["column"].as_u64().unwrap() >= 6, "{d}");
    assert!(d["message"].as_str().is_some_and(|m| !m.is_empty()));
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let app = app();
    for (uri, body) in [
        ("/api/parse", "{not json"),
        ("/api/parse", r#"{"rule": "a."}"#),
        ("/api/pml", r#"{"rules": "a."}"#),
    ] {
        let (s, v) = call(&app, "POST", uri, Some(body.into())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{uri} {body}");
        assert_eq!(v["ok"], false);
    }
    let mut both = park_payload(4, 4, true);
    both["geojson"] = json!({"type": "FeatureCollection", "features": []});
    let (s, _) = call(&app, "POST", "/api/pml", Some(both.to_string())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let mut escape = park_payload(4, 4, true);
    escape["map_ref"] = json!("../park");
    let (s, v) = call(&app, "POST", "/api/pml", Some(escape.to_string())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("plain name"));
}

#[tokio::test]
async fn pml_rule_errors_are_unprocessable() {
    let app = app();
    let mut p = park_payload(4, 4, true);
    p["rules"] = json!("landscape(R, C) :- over(R, C, park)");
    let (s, v) = call(&app, "POST", "/api/pml", Some(p.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["diagnostics"][0]["line"], 1);

    p["rules"] = json!("landscape(R, C) :- over(R, C, lake). query(landscape(R, C)).");
    let (s, v) = call(&app, "POST", "/api/pml", Some(p.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert!(v["error"].as_str().unwrap().contains("lake"));
}

#[tokio::test]
async fn pml_matches_the_command_line_pipeline() {
    let (s, v) = call(&app(), "POST", "/api/pml", Some(park_payload(12, 12, false).to_string())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let served: MissionLandscape = serde_json::from_value(v).unwrap();

    let f = ScenarioFixture::builtin("park").unwrap();
    let local = run_mission(&MissionConfig {
        map: MapInput::Fixture(f.geojson.clone()),
        mapping: f.mapping.clone(),
        errors: f.errors.clone(),
        rules: f.rules.clone(),
        grid: f.grid.with_resolution(12, 12).unwrap(),
        n_ensemble: 30,
        params: InferenceParams::sampling(400, 11),
        tiling: 0,
        workers: Some(1),
        outputs: OutputPaths::default(),
        cache_dir: None,
    })
    .unwrap();
    assert_eq!(served.values, local.values);
    assert_eq!(served.metadata.program_hash, local.metadata.program_hash);
    assert_eq!(served.metadata.db_hash, local.metadata.db_hash);
    assert!(served.values.iter().any(|&p| p > 0.9));

    let (_, by_ref) = call(&app(), "POST", "/api/pml", Some(park_payload(12, 12, true).to_string())).await;
    assert_eq!(serde_json::from_value::<MissionLandscape>(by_ref).unwrap().values, local.values);
}

fn small_limit() -> Router {
    router(ServiceConfig {
        sync_cell_limit: 10,
        ..Default::default()
    })
    .unwrap()
}

#[tokio::test]
async fn large_grids_become_pollable_jobs() {
    let app = small_limit();
    let (s, v) = call(&app, "POST", "/api/pml", Some(park_payload(6, 6, true).to_string())).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(v["status"], "queued");
    let uri = format!("/api/pml/{}", v["job"]);
    let done = loop {
        let (s, v) = call(&app, "GET", &uri, None).await;
        assert_eq!(s, StatusCode::OK);
        match v["status"].as_str().unwrap() {
            "queued" | "running" => tokio::time::sleep(Duration::from_millis(20)).await,
            _ => break v,
        }
    };
    assert_eq!(done["status"], "done", "{done}");
    assert_eq!(done["progress"], 36);
    let l: MissionLandscape = serde_json::from_value(done["result"].clone()).unwrap();
    assert_eq!(l.values.len(), 36);

    let (s, _) = call(&app, "GET", "/api/pml/999", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn jobs_can_be_cancelled() {
    let app = small_limit();
    let mut p = park_payload(60, 60, true);
    p["params"]["sample_count"] = json!(5000);
    let (s, v) = call(&app, "POST", "/api/pml", Some(p.to_string())).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let uri = format!("/api/pml/{}", v["job"]);
    let (s, v) = call(&app, "DELETE", &uri, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "cancelled");
    tokio::time::sleep(Duration::from_millis(200)).await;
    let (_, v) = call(&app, "GET", &uri, None).await;
    assert_eq!(v["status"], "cancelled");
    assert!(v["progress"].as_u64().unwrap() < 3600);
    assert!(v.get("result").is_none());
}
