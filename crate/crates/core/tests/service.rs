use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cfguide::dataset::write_csv;
use cfguide::guidance::{rank_variables, GuidanceMode};
use cfguide::server::router;
use cfguide::session::{
    replay_filters, FilterAction, ServiceConfig, SessionStore, LABEL_CF, LABEL_EX, LABEL_IN, LABEL_REM,
};
use cfguide::synth::{default_study_spec, generate, GroundTruth};
use cfguide::Dataset;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const BOUNDARY: &str = "cfguide-test-boundary";

fn study(n: usize) -> (Dataset, GroundTruth) {
    generate(&default_study_spec(), n).unwrap()
}

fn multipart(parts: &[(&str, Vec<u8>)]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, bytes) in parts {
        body.extend(format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n").as_bytes());
        body.extend(bytes);
        body.extend(b"\r\n");
    }
    body.extend(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let (status, bytes) = send(app, req.body(body).unwrap()).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn upload(app: &Router, d: &Dataset, truth: Option<&GroundTruth>) -> (StatusCode, Value) {
    let mut csv = Vec::new();
    write_csv(d, &mut csv).unwrap();
    let mut parts = vec![("csv", csv), ("config", serde_json::to_vec(&d.config()).unwrap())];
    if let Some(t) = truth {
        parts.push(("truth", serde_json::to_vec(t).unwrap()));
    }
    let req = Request::post("/datasets")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&parts)))
        .unwrap();
    let (status, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn setup(truth: bool) -> (Router, Arc<SessionStore>, String, GroundTruth) {
    let store = Arc::new(SessionStore::in_memory());
    let app = router(store.clone());
    let (d, t) = study(600);
    let (status, info) = upload(&app, &d, truth.then_some(&t)).await;
    assert_eq!(status, StatusCode::CREATED, "{info}");
    assert_eq!(info["rows"], 600);
    (app, store, info["id"].as_str().unwrap().to_string(), t)
}

async fn new_session(app: &Router, dataset: &str, mode: &str) -> String {
    let (status, s) = call(app, "POST", "/sessions", Some(json!({"dataset": dataset, "mode": mode}))).await;
    assert_eq!(status, StatusCode::CREATED, "{s}");
    s["id"].as_str().unwrap().to_string()
}

fn variables(ranking: &Value) -> Vec<String> {
    ranking["entries"].as_array().unwrap().iter().map(|e| e["variable"].as_str().unwrap().to_string()).collect()
}

fn labels(payload: &Value) -> Vec<String> {
    payload["subsets"].as_array().unwrap().iter().map(|s| s["label"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn health_is_ok() {
    let app = router(Arc::new(SessionStore::in_memory()));
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test]
async fn dataset_upload_and_columns() {
    let (app, _, id, _) = setup(true).await;
    let (status, cols) = call(&app, "GET", &format!("/datasets/{id}/columns"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cols.as_array().unwrap().len(), 15);
    assert_eq!(cols[14]["role"], "outcome");
    assert_eq!(cols[0]["stats"]["histogram"]["counts"].as_array().unwrap().len(), 20);

    let req = Request::post("/datasets")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&[("csv", b"a,y\n1,2\n".to_vec())])))
        .unwrap();
    let (status, body) = send(&app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["code"], "invalid_request");
    assert_eq!(call(&app, "GET", "/datasets/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn session_creation() {
    let (app, _, id, _) = setup(false).await;
    let a = new_session(&app, &id, "cf").await;
    let b = new_session(&app, &id, "cf").await;
    assert_ne!(a, b);
    let (_, s) = call(&app, "GET", &format!("/sessions/{a}"), None).await;
    assert_eq!(s["filters"], json!([]));
    assert_eq!(s["mode"], "cf");

    let (status, err) = call(&app, "POST", "/sessions", Some(json!({"dataset": id, "mode": "xyz"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "invalid_request");
    let (status, err) = call(&app, "POST", "/sessions", Some(json!({"dataset": "missing", "mode": "cf"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");
    assert_eq!(call(&app, "GET", "/sessions/missing/guidance", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn filter_mutations_refresh_guidance() {
    let (app, store, id, _) = setup(false).await;
    let sid = new_session(&app, &id, "cf").await;
    let base = format!("/sessions/{sid}");
    let (_, initial) = call(&app, "GET", &format!("{base}/guidance"), None).await;
    assert_eq!(variables(&initial).len(), 14);
    let (_, empty) = call(&app, "GET", &format!("{base}/distributions"), None).await;
    assert!(empty["subsets"].as_array().unwrap().is_empty());

    let (status, r) = call(&app, "POST", &format!("{base}/filters"), Some(json!({"action": "add", "variable": "smoking"}))).await;
    assert_eq!(status, StatusCode::OK, "{r}");
    assert!(!variables(&r["ranking"]).contains(&"smoking".to_string()));
    assert_eq!(variables(&r["ranking"]).len(), 13);
    assert_eq!(labels(&r["distributions"]), [LABEL_IN, LABEL_CF, LABEL_REM]);
    assert!(r["distributions"]["summary"]["guidance_cf"].is_number());
    let edges = r["distributions"]["edges"].as_array().unwrap().len();
    for s in r["distributions"]["subsets"].as_array().unwrap() {
        assert_eq!(s["counts"].as_array().unwrap().len() + 1, edges);
    }

    // the service answer is the library answer, byte for byte
    let d = store.dataset(&id).unwrap();
    let filters = store.session(&sid).unwrap().filters;
    let expected = serde_json::to_vec(&rank_variables(&d, &filters, GuidanceMode::Cf).unwrap()).unwrap();
    let (_, bytes) = send(&app, Request::get(format!("{base}/guidance")).body(Body::empty()).unwrap()).await;
    assert_eq!(bytes, expected);

    let (status, r) = call(&app, "POST", &format!("{base}/filters"), Some(json!({"action": "set_range", "variable": "smoking", "range": [1.0, 3.0]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["filters"][0]["range"], json!([1.0, 3.0]));

    let (status, err) = call(&app, "POST", &format!("{base}/filters"), Some(json!({"action": "set_range", "variable": "age", "range": [0.0, 1.0]}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "state_error");
    let (status, _) = call(&app, "DELETE", &format!("{base}/filters/age"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &format!("{base}/filters"), Some(json!({"action": "add", "variable": "mortality risk"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(store.session(&sid).unwrap().events.len(), 2);

    let (status, r) = call(&app, "DELETE", &format!("{base}/filters/smoking"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["ranking"], initial);
    assert_eq!(r["filters"], json!([]));

    let s = store.session(&sid).unwrap();
    assert_eq!(s.events.len(), 3);
    assert_eq!(replay_filters(&s.events, &d).unwrap(), s.filters);
}

#[tokio::test]
async fn corr_sessions_show_in_and_ex_only() {
    let (app, _, id, _) = setup(false).await;
    let sid = new_session(&app, &id, "corr").await;
    let (_, r) = call(&app, "POST", &format!("/sessions/{sid}/filters"), Some(json!({"action": "add", "variable": "age"}))).await;
    assert_eq!(labels(&r["distributions"]), [LABEL_IN, LABEL_EX]);
    assert_eq!(r["ranking"]["mode"], "corr");
    assert!(r["distributions"]["summary"]["guidance_corr"].is_number());
    assert!(r["distributions"]["summary"].get("guidance_cf").is_none());

    // a range that selects nothing still answers, with empty IN
    let (status, r) = call(&app, "POST", &format!("/sessions/{sid}/filters"), Some(json!({"action": "set_range", "variable": "age", "range": [100.0, 101.0]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["distributions"]["subsets"][0]["size"], 0);
    assert!(r["distributions"]["summary"].is_null());
}

#[tokio::test]
async fn answers_are_scored_against_truth() {
    let (app, _, id, truth) = setup(true).await;
    let sid = new_session(&app, &id, "cf").await;
    let top: Vec<&str> = truth.top(5);
    let (status, r) = call(&app, "POST", &format!("/sessions/{sid}/answers"), Some(json!({"t1": top, "t2": top, "t1_confidence": 4, "t2_confidence": 3}))).await;
    assert_eq!(status, StatusCode::OK, "{r}");
    assert_eq!(r["evaluation"]["t1_accuracy"], 1.0);
    assert_eq!(r["evaluation"]["t2_offset"], 0);

    let six = ["age", "bmi", "smoking", "cholesterol", "heart rate", "sleep hours"];
    let (status, err) = call(&app, "POST", &format!("/sessions/{sid}/answers"), Some(json!({"t1": six, "t2": [], "t1_confidence": 1, "t2_confidence": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "invalid_request");
    let (status, _) = call(&app, "POST", &format!("/sessions/{sid}/answers"), Some(json!({"t1": ["age", "age"], "t2": [], "t1_confidence": 1, "t2_confidence": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", &format!("/sessions/{sid}/answers"), Some(json!({"t1": [], "t2": [], "t1_confidence": 6, "t2_confidence": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, report) = call(&app, "GET", &format!("/sessions/{sid}/analysis"), None).await;
    assert_eq!(report["evaluation"]["t1_accuracy"], 1.0);
    assert_eq!(report["wrong_attempts"], 0);
}

#[tokio::test]
async fn answers_without_truth_skip_evaluation() {
    let (app, _, id, truth) = setup(false).await;
    let sid = new_session(&app, &id, "corr").await;
    let top = truth.top(5);
    let (status, r) = call(&app, "POST", &format!("/sessions/{sid}/answers"), Some(json!({"t1": top, "t2": top, "t1_confidence": 2, "t2_confidence": 2}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(r.get("evaluation").is_none());
    assert_eq!(r["answers"]["t1"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn analysis_export() {
    let (app, _, id, _) = setup(true).await;
    let sid = new_session(&app, &id, "cf").await;
    let url = format!("/sessions/{sid}/analysis");
    let (status, fresh) = call(&app, "GET", &url, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fresh["interactions"]["total"], 0);
    assert_eq!(fresh["behaviors"], json!({"goback_after_range": 0, "goback_without_range": 0, "gonext_after_range": 0, "gonext_without_range": 0}));
    assert_eq!(fresh["tree"]["depth"], 1);
    assert_eq!(fresh["tree"]["filter_variable_width"], 0);

    // add, adjust, give up, try another
    let f = format!("/sessions/{sid}/filters");
    call(&app, "POST", &f, Some(json!({"action": "add", "variable": "bmi"}))).await;
    call(&app, "POST", &f, Some(json!({"action": "set_range", "variable": "bmi", "range": [0.0, 2.0]}))).await;
    call(&app, "DELETE", &format!("{f}/bmi"), None).await;
    call(&app, "POST", &f, Some(json!({"action": "add", "variable": "smoking"}))).await;
    let (_, a) = call(&app, "GET", &url, None).await;
    let (_, b) = call(&app, "GET", &url, None).await;
    assert_eq!(a, b);
    assert_eq!(a["behaviors"]["goback_after_range"], 1);
    assert_eq!(a["interactions"]["total"], 4);
    assert_eq!(a["wrong_attempts"], 3);
}

#[test]
fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { data_dir: Some(dir.path().to_path_buf()), row_cap: None };
    let (d, truth) = study(400);
    let (ds, sid, filters) = {
        let store = SessionStore::open(config.clone()).unwrap();
        let ds = store.add_dataset(d.clone(), Some(truth.clone())).unwrap().id;
        let sid = store.create_session(&ds, GuidanceMode::Cf).unwrap().id;
        store.mutate_filter(&sid, FilterAction::Add { variable: "age".into(), range: None }).unwrap();
        store.mutate_filter(&sid, FilterAction::Add { variable: "bmi".into(), range: None }).unwrap();
        store.mutate_filter(&sid, FilterAction::Remove { variable: "age".into() }).unwrap();
        (ds, sid.clone(), store.session(&sid).unwrap())
    };

    let store = SessionStore::open(config.clone()).unwrap();
    let restored = store.session(&sid).unwrap();
    assert_eq!(restored, filters);
    assert_eq!(restored.events, filters.events);
    assert_eq!(store.dataset(&ds).unwrap(), d);
    assert!(store.dataset_info(&ds).unwrap().has_truth);
    drop(store);

    // a snapshot that disagrees with its log is not trusted
    let snap = dir.path().join("sessions").join(&sid).join("snapshot.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&snap).unwrap()).unwrap();
    v["filters"] = json!([]);
    std::fs::write(&snap, v.to_string()).unwrap();
    let store = SessionStore::open(config).unwrap();
    assert!(store.session(&sid).is_err());
    assert!(store.dataset(&ds).is_ok());
}

#[test]
fn row_cap_subsamples_reproducibly() {
    let (d, _) = study(900);
    let capped = |cap| {
        let store = SessionStore::open(ServiceConfig { data_dir: None, row_cap: Some(cap) }).unwrap();
        let info = store.add_dataset(d.clone(), None).unwrap();
        let data = store.dataset(&info.id).unwrap();
        (info, data)
    };
    let (info, a) = capped(300);
    assert_eq!((info.rows, info.guidance_rows), (900, 300));
    let (_, b) = capped(300);
    assert_eq!(a, b);
    let (info, c) = capped(5000);
    assert_eq!(info.guidance_rows, 900);
    assert_eq!(c, d);
}
