use axum::body::Body;
use axum::http::{header, HeaderMap, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mcdm_core::data;
use mcdm_service::{app, Config};
use serde_json::{json, Value};
use tower::ServiceExt;

const S3: [[f64; 3]; 3] = [[1.0, 1.0, 0.33], [1.0, 1.0, 2.0], [3.0, 0.5, 1.0]];

struct Reply {
    status: StatusCode,
    headers: HeaderMap,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }

    fn etag(&self) -> &str {
        self.headers.get(header::ETAG).expect("etag").to_str().unwrap()
    }
}

fn config(dir: &std::path::Path) -> Config {
    Config { data_dir: dir.to_path_buf(), ..Config::default() }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>, if_match: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    if let Some(v) = if_match {
        req = req.header(header::IF_MATCH, v);
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, bytes }
}

async fn create(app: &Router) -> String {
    let r = call(app, "POST", "/problems", Some(data::LOGISTICS_SCENARIO.into()), None).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
    assert_eq!(r.etag(), "\"1\"");
    let v = r.json();
    assert_eq!(v["version"], 1);
    v["id"].as_str().unwrap().to_owned()
}

fn s3_body() -> String {
    json!({ "criterion": "quality", "entries": S3 }).to_string()
}

#[tokio::test]
async fn bundled_scenario_ranks_411_first() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let r = call(&app, "GET", &format!("/problems/{id}/ranking"), None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    let b = v["breakdowns"].as_array().unwrap();
    assert_eq!(b.len(), 5);
    assert_eq!(b[0]["alternative_id"], "411");
    assert_eq!(b[0]["rank"], 1);
    assert!((b[0]["total"].as_f64().unwrap() - 0.818).abs() < 1e-3);
    assert_eq!(v["screening"]["retained"], json!(["411", "412", "413", "422", "532"]));
    assert_eq!(v["screening"]["eliminated"].as_array().unwrap().len(), 22);
}

#[tokio::test]
async fn get_problem_returns_document_and_derived_weights() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let r = call(&app, "GET", &format!("/problems/{id}"), None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["id"], id.as_str());
    assert_eq!(v["version"], 1);
    assert_eq!(v["document"]["alternatives"].as_array().unwrap().len(), 27);
    assert_eq!(v["derived"]["top_level_weights"], json!({"quality": 0.4, "throughput": 0.25, "risk": 0.35}));
    assert_eq!(v["derived"]["sub_weights"]["quality"]["fitness"], 0.57);
    let warnings = v["derived"]["warnings"].as_array().unwrap();
    assert_eq!(warnings, &vec![json!("quality: stakeholder-3 CR 0.32 > 0.10")]);
    let s3 = &v["derived"]["groups"]["quality"]["stakeholders"][2];
    assert_eq!(s3["consistency"]["acceptable"], false);
}

#[tokio::test]
async fn judgment_put_reports_consistency_and_rederives_weights() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let r = call(&app, "PUT", &format!("/problems/{id}/judgments/stakeholder-3"), Some(s3_body()), Some("\"1\"")).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
    assert_eq!(r.etag(), "\"2\"");
    let v = r.json();
    assert_eq!(v["version"], 2);
    let cr = v["consistency"]["cr"].as_f64().unwrap();
    assert!((cr - 0.32).abs() < 0.005, "cr {cr}");
    assert_eq!(v["consistency"]["acceptable"], false);
    assert_eq!(v["warnings"], json!(["quality: stakeholder-3 CR 0.32 > 0.10"]));
    // literal sub-weights were dropped, so the group vector now drives scoring
    let w = &v["weights"];
    assert!((w["fitness"].as_f64().unwrap() - 0.56712).abs() < 1e-4);
    let g = call(&app, "GET", &format!("/problems/{id}"), None, None).await.json();
    assert!(g["document"]["weights"].get("sub").is_none());
    assert!((g["derived"]["sub_weights"]["quality"]["precision"].as_f64().unwrap() - 0.22344).abs() < 1e-4);
}

#[tokio::test]
async fn new_stakeholder_is_appended() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let body = json!({ "entries": [[1.0, 3.0, 3.0], [1.0 / 3.0, 1.0, 1.0], [1.0 / 3.0, 1.0, 1.0]] }).to_string();
    let r = call(&app, "PUT", &format!("/problems/{id}/judgments/stakeholder-4"), Some(body), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
    let v = r.json();
    assert_eq!(v["criterion"], "quality");
    assert_eq!(v["group"]["stakeholders"].as_array().unwrap().len(), 4);
    assert!(v["consistency"]["cr"].as_f64().unwrap().abs() < 1e-9);
}

#[tokio::test]
async fn invalid_matrix_is_rejected_with_cell_location() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let body = json!({ "entries": [[1.0, 6.0, 7.0], [0.5, 1.0, 1.0], [0.14, 1.0, 1.0]] }).to_string();
    let r = call(&app, "PUT", &format!("/problems/{id}/judgments/stakeholder-1"), Some(body), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = r.json();
    assert_eq!(v["code"], "invalid_matrix");
    assert!(v["location"].as_str().unwrap().starts_with("judgments.quality.stakeholder-1.entries["));
    let g = call(&app, "GET", &format!("/problems/{id}"), None, None).await.json();
    assert_eq!(g["version"], 1);
}

#[tokio::test]
async fn stale_if_match_conflicts_and_leaves_state_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let before = call(&app, "GET", &format!("/problems/{id}"), None, None).await;
    let body = json!({ "top_level": {"quality": 0.5, "throughput": 0.2, "risk": 0.3} }).to_string();
    let r = call(&app, "PUT", &format!("/problems/{id}/weights"), Some(body), Some("\"7\"")).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    let v = r.json();
    assert_eq!(v["code"], "version_conflict");
    assert_eq!(v["location"], "If-Match");
    let after = call(&app, "GET", &format!("/problems/{id}"), None, None).await;
    assert_eq!(before.bytes, after.bytes);
}

#[tokio::test]
async fn concurrent_puts_on_one_version_admit_exactly_one() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let tasks: Vec<_> = (0..8)
        .map(|k| {
            let app = app.clone();
            let uri = format!("/problems/{id}/weights");
            let w2 = 0.1 + 0.01 * k as f64;
            let body = json!({ "top_level": {"quality": 0.4, "throughput": w2, "risk": 0.6 - w2} }).to_string();
            tokio::spawn(async move { call(&app, "PUT", &uri, Some(body), Some("1")).await.status })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1, "{statuses:?}");
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 7);
    let g = call(&app, "GET", &format!("/problems/{id}"), None, None).await.json();
    assert_eq!(g["version"], 2);
}

#[tokio::test]
async fn unconditional_puts_serialize_and_count_versions() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let tasks: Vec<_> = (0..10)
        .map(|_| {
            let app = app.clone();
            let uri = format!("/problems/{id}/knockouts");
            let body = json!([{ "criterion": "fitness", "predicate": "ge", "threshold": 0.999 }]).to_string();
            tokio::spawn(async move { call(&app, "PUT", &uri, Some(body), None).await.status })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let g = call(&app, "GET", &format!("/problems/{id}"), None, None).await;
    assert_eq!(g.json()["version"], 11);
    assert_eq!(g.etag(), "\"11\"");
}

#[tokio::test]
async fn reads_reflect_writes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let r1 = call(&app, "GET", &format!("/problems/{id}/ranking"), None, None).await;
    let body = json!({ "top_level": {"quality": 0.4, "throughput": 0.5, "risk": 0.1} }).to_string();
    let w = call(&app, "PUT", &format!("/problems/{id}/weights"), Some(body), Some("\"1\"")).await;
    assert_eq!(w.status, StatusCode::OK);
    assert_eq!(w.json()["top_level_weights"]["throughput"], 0.5);
    let r2 = call(&app, "GET", &format!("/problems/{id}/ranking"), None, None).await;
    assert_ne!(r1.bytes, r2.bytes);
    let v = r2.json();
    assert_eq!(v["version"], 2);
    assert_eq!(v["breakdowns"][0]["alternative_id"], "532");
    let g = call(&app, "GET", &format!("/problems/{id}"), None, None).await.json();
    assert_eq!(g["document"]["weights"]["top_level"]["throughput"], 0.5);
}

#[tokio::test]
async fn ranking_is_pure_per_version() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let a = call(&app, "GET", &format!("/problems/{id}/ranking"), None, None).await;
    let b = call(&app, "GET", &format!("/problems/{id}/ranking"), None, None).await;
    assert_eq!(a.bytes, b.bytes);
    // a fresh server reading the same file produces the same body
    let other = mcdm_service::app(&config(dir.path())).unwrap();
    let c = call(&other, "GET", &format!("/problems/{id}/ranking"), None, None).await;
    assert_eq!(a.bytes, c.bytes);
}

#[tokio::test]
async fn knockout_changes_are_validated_and_screened() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let stricter = json!({ "knockouts": [
        { "criterion": "fitness", "predicate": "ge", "threshold": 0.999 },
        { "criterion": "generalization", "predicate": "ge", "threshold": 0.95 }
    ]})
    .to_string();
    let r = call(&app, "PUT", &format!("/problems/{id}/knockouts"), Some(stricter), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["screening"]["retained"], json!(["411", "413", "422", "532"]));
    // dropping every rule would score alternatives without T and IR data
    let r = call(&app, "PUT", &format!("/problems/{id}/knockouts"), Some("[]".into()), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = r.json();
    assert_eq!(v["code"], "validation_failed");
    assert!(v["location"].as_str().unwrap().starts_with("alternatives"), "{v}");
    assert!(!v["violations"].as_array().unwrap().is_empty());
    let g = call(&app, "GET", &format!("/problems/{id}"), None, None).await.json();
    assert_eq!(g["version"], 2);
}

#[tokio::test]
async fn sensitivity_brackets_the_throughput_flip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let body = json!({ "criterion": "throughput", "grid": 101, "seed": 7, "samples": 2000 }).to_string();
    let r = call(&app, "POST", &format!("/problems/{id}/sensitivity"), Some(body.clone()), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
    let v = r.json();
    assert_eq!(v["sweep"].as_array().unwrap().len(), 101);
    let flip = v["reversals"]
        .as_array()
        .unwrap()
        .iter()
        .find(|x| x["displaced"] == "411" && x["displacing"] == "532")
        .expect("411 -> 532 reversal");
    assert_eq!(flip["bracket"], json!([0.26, 0.27]));
    let upper = v["stability_interval"]["upper"].as_f64().unwrap();
    assert!((upper - 0.2684).abs() < 1e-3);
    let total: f64 = v["sampling"]["frequencies"].as_object().unwrap().values().map(|f| f.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let again = call(&app, "POST", &format!("/problems/{id}/sensitivity"), Some(body), None).await;
    assert_eq!(r.bytes, again.bytes);
}

#[tokio::test]
async fn sensitivity_rejects_unknown_criterion_and_bad_grid() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    let uri = format!("/problems/{id}/sensitivity");
    let r = call(&app, "POST", &uri, Some(json!({"criterion": "cost"}).to_string()), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["location"], "criterion");
    let r = call(&app, "POST", &uri, Some(json!({"criterion": "risk", "grid": 1}).to_string()), None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["location"], "grid");
}

#[tokio::test]
async fn error_bodies_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();

    let r = call(&app, "GET", "/problems/does-not-exist", None, None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["code"], "not_found");

    let r = call(&app, "GET", "/problems/..%2Fetc", None, None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let truncated = &data::LOGISTICS_SCENARIO[..200];
    let r = call(&app, "POST", "/problems", Some(truncated.into()), None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let v = r.json();
    assert_eq!(v["code"], "parse_error");
    assert!(v["location"].as_str().unwrap().starts_with("line "));

    let broken = data::LOGISTICS_SCENARIO.replace("\"throughput\": 0.25", "\"throughput\": 0.45");
    let r = call(&app, "POST", "/problems", Some(broken), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = r.json();
    assert_eq!(v["code"], "validation_failed");
    assert_eq!(v["location"], "weights.top_level");
    assert!(v["message"].as_str().unwrap().contains("weights sum 1.20 ≠ 1"), "{v}");

    let id = create(&app).await;
    let r = call(&app, "PUT", &format!("/problems/{id}/weights"), Some("{}".into()), Some("abc")).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, "PUT", &format!("/problems/{id}/weights"), Some("{\"top\": 1}".into()), None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.json()["location"].is_string());
}

#[tokio::test]
async fn sessions_persist_atomically_to_disk() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&config(dir.path())).unwrap();
    let id = create(&app).await;
    call(&app, "PUT", &format!("/problems/{id}/judgments/stakeholder-3"), Some(s3_body()), None).await;
    let names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names, vec![format!("{id}.json")]);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{id}.json"))).unwrap()).unwrap();
    assert_eq!(file["id"], id.as_str());
    assert_eq!(file["version"], 2);
    assert_eq!(file["document"]["format_version"], 1);

    let restarted = mcdm_service::app(&config(dir.path())).unwrap();
    let g = call(&restarted, "GET", &format!("/problems/{id}"), None, None).await;
    assert_eq!(g.status, StatusCode::OK);
    assert_eq!(g.json()["version"], 2);
}

#[tokio::test]
async fn cors_origin_is_configurable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config { cors_origin: Some("http://localhost:5173".into()), ..config(dir.path()) };
    let app = app(&cfg).unwrap();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/problems")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).unwrap(), "http://localhost:5173");
}
