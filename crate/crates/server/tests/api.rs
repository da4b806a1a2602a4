mod common;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use gut_core::objective::{read_json, SweepArtifact};
use gut_server::{router, AppState, ServerOptions};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn app(f: &common::Fixture, options: &ServerOptions) -> Router {
    router(AppState::load(&f.artifact).unwrap(), options).unwrap()
}

async fn send(app: &Router, method: Method, uri: &str) -> (StatusCode, header::HeaderMap, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(Body::empty()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, headers, body) = send(app, Method::GET, uri).await;
    assert_eq!(headers[header::CONTENT_TYPE], "application/json", "{uri}");
    (status, serde_json::from_slice(&body).unwrap())
}

/// Base-2 binary entropy written out independently of the library.
fn entropy(pos: f64, neg: f64) -> f64 {
    let t = pos + neg;
    [pos, neg]
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / t) * (c / t).log2())
        .sum()
}

#[tokio::test]
async fn healthz() {
    let f = common::fixture();
    let (status, body) = get_json(&app(&f, &ServerOptions::default()), "/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, serde_json::json!({"status": "ok"}));
}

#[tokio::test]
async fn sweep_matches_artifact() {
    let f = common::fixture();
    let app = app(&f, &ServerOptions::default());
    let artifact: SweepArtifact = read_json(&f.artifact).unwrap();
    for kind in ["construct", "relation"] {
        let (status, body) = get_json(&app, &format!("/api/sweep?purity={kind}")).await;
        assert_eq!(status, StatusCode::OK);
        let points = body["points"].as_array().unwrap();
        assert_eq!(points.len(), 21);
        let sweep = artifact.sweep(kind.parse().unwrap()).unwrap();
        for (point, sel) in points.iter().zip(&sweep.selections) {
            let record = &artifact.candidates[sel.candidate];
            assert_eq!(point["alpha"].as_f64().unwrap(), sel.alpha);
            assert_eq!(point["candidate"].as_u64().unwrap() as usize, sel.candidate);
            assert_eq!(point["balanced_loss"].as_f64().unwrap(), sel.balanced_loss);
            assert_eq!(point["k"].as_u64().unwrap() as usize, record.k);
            assert_eq!(point["spec"].as_str().unwrap(), record.spec.summary());
            let losses = &point["losses"];
            assert_eq!(losses["parsimony"].as_f64().unwrap(), record.losses.parsimony);
            assert_eq!(losses["construct_purity"].as_f64().unwrap(), record.losses.construct_purity);
            assert_eq!(losses["relation_purity"].as_f64().unwrap(), record.losses.relation_purity);
        }
    }
    let (status, body) = get_json(&app, "/api/sweep").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["purity"], "construct");
    let (status, _) = get_json(&app, "/api/sweep?purity=items").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn head_mirrors_get() {
    let f = common::fixture();
    let app = app(&f, &ServerOptions::default());
    let (gs, gh, gb) = send(&app, Method::GET, "/api/sweep").await;
    let (hs, hh, hb) = send(&app, Method::HEAD, "/api/sweep").await;
    assert_eq!(gs, hs);
    assert_eq!(gh[header::CONTENT_TYPE], hh[header::CONTENT_TYPE]);
    assert!(!gb.is_empty());
    assert!(hb.is_empty());
}

#[tokio::test]
async fn partition_selection_and_snapping() {
    let f = common::fixture();
    let app = app(&f, &ServerOptions::default());

    let (status, body) = get_json(&app, "/api/partition?alpha=0&purity=construct").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["k"], 1);
    assert_eq!(body["clusters"].as_array().unwrap().len(), 1);
    assert_eq!(body["clusters"][0]["size"], 30);
    assert!(body["relations"].as_array().unwrap().is_empty());

    let (status, body) = get_json(&app, "/api/partition?alpha=0.61&purity=construct").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["snapped_alpha"].as_f64().unwrap(), 0.6);
    assert_eq!(body["alpha"].as_f64().unwrap(), 0.61);

    let (status, body) = get_json(&app, "/api/partition?alpha=1&purity=construct").await;
    assert_eq!(status, StatusCode::OK);
    let clusters = body["clusters"].as_array().unwrap();
    let sizes: Vec<u64> = clusters.iter().map(|c| c["size"].as_u64().unwrap()).collect();
    assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(sizes.iter().sum::<u64>(), 30);
    for c in clusters {
        let size = c["size"].as_u64().unwrap();
        assert_eq!(c["members"].as_array().unwrap().len() as u64, size);
        match c["mean_similarity"].as_f64() {
            None => assert_eq!(size, 1),
            Some(m) => assert!((0.0..=1.0).contains(&m)),
        }
    }

    for (alpha, purity) in [("2", "construct"), ("-0.1", "construct"), ("nan", "construct"), ("x", "relation")] {
        let (status, body) = get_json(&app, &format!("/api/partition?alpha={alpha}&purity={purity}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "alpha={alpha}");
        assert!(body["error"].is_string());
    }
    let (status, _) = get_json(&app, "/api/partition?alpha=0.5&purity=mixed").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get_json(&app, "/api/partition?purity=construct").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn relation_edges_carry_consistent_entropy() {
    let f = common::fixture();
    let app = app(&f, &ServerOptions::default());
    let mut seen = 0;
    for i in 0..=20 {
        let uri = format!("/api/partition?alpha={}&purity=relation", i as f64 / 20.0);
        let (status, body) = get_json(&app, &uri).await;
        assert_eq!(status, StatusCode::OK);
        for e in body["relations"].as_array().unwrap() {
            let (pos, neg) = (e["positive"].as_f64().unwrap(), e["negative"].as_f64().unwrap());
            assert!(pos + neg > 0.0);
            assert_ne!(e["source"], e["target"]);
            let h = e["entropy"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&h));
            assert!((h - entropy(pos, neg)).abs() <= 1e-12);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[tokio::test]
async fn cluster_detail() {
    let f = common::fixture();
    let app = app(&f, &ServerOptions::default());

    // alpha = 1 with construct purity selects the singletons.
    let (status, body) = get_json(&app, "/api/clusters/0?alpha=1&purity=construct").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["members"].as_array().unwrap().len(), 1);
    assert!(body["similarities"].as_array().unwrap().is_empty());
    assert!(body["mean_similarity"].is_null());

    let (_, partition) = get_json(&app, "/api/partition?alpha=0.5&purity=construct").await;
    let triple = partition["clusters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["size"] == 3)
        .expect("a cluster of three")
        .clone();
    let uri = format!("/api/clusters/{}?alpha=0.5&purity=construct", triple["id"]);
    let (status, body) = get_json(&app, &uri).await;
    assert_eq!(status, StatusCode::OK);
    let sims = body["similarities"].as_array().unwrap();
    assert_eq!(sims.len(), 3);
    let mean = sims.iter().map(|s| s["similarity"].as_f64().unwrap()).sum::<f64>() / 3.0;
    assert!((mean - body["mean_similarity"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(body["members"], triple["members"]);

    for uri in ["/api/clusters/999?alpha=0.5", "/api/clusters/abc?alpha=0.5"] {
        let (status, _) = get_json(&app, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
    let (status, _) = get_json(&app, "/api/clusters/0?alpha=3").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn identical_requests_identical_responses() {
    let f = common::fixture();
    let app = app(&f, &ServerOptions::default());
    for uri in ["/api/sweep?purity=relation", "/api/partition?alpha=0.35&purity=relation", "/api/clusters/1?alpha=0.7"] {
        let a = send(&app, Method::GET, uri).await;
        let b = send(&app, Method::GET, uri).await;
        assert_eq!(a.0, b.0);
        assert_eq!(a.2, b.2);
    }
}

#[tokio::test]
async fn unknown_api_route_is_json_404() {
    let f = common::fixture();
    let (status, body) = get_json(&app(&f, &ServerOptions::default()), "/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn cors_and_static_ui() {
    let f = common::fixture();
    let ui = common::path_in(&f, "ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<!doctype html><title>explorer</title>").unwrap();
    let options = ServerOptions {
        allow_origin: Some("http://localhost:5173".into()),
        ui_dir: Some(ui),
    };
    let app = app(&f, &options);
    let req = Request::builder()
        .uri("/healthz")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");

    let (status, headers, body) = send(&app, Method::GET, "/").await;
    assert_eq!(status, StatusCode::OK);
    assert!(headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/html"));
    assert!(String::from_utf8(body).unwrap().contains("explorer"));

    let (_, headers, _) = send(&app, Method::GET, "/healthz").await;
    assert_eq!(headers[header::CONTENT_TYPE], "application/json");
}

#[test]
fn load_failures_are_reported() {
    let f = common::fixture();
    std::fs::write(&f.artifact, "{\n  \"alpha_step\": 0.05,\n  oops\n}").unwrap();
    let err = AppState::load(&f.artifact).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");

    let g = common::fixture();
    std::fs::remove_file(common::path_in(&g, "partitions/0000.csv")).unwrap();
    let err = AppState::load(&g.artifact).unwrap_err().to_string();
    assert!(err.contains("0000.csv"), "{err}");
}
