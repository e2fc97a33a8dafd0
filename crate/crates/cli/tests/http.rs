mod common;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use logrank_cli::http::{router, AppState, SearchResponse};
use logrank_core::state::load_state;

async fn get(app: &AppState, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = router(app.clone())
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json(app: &AppState, uri: &str) -> (StatusCode, Value) {
    let (status, body) = get(app, uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

fn ready(dir: &Path) -> (AppState, std::path::PathBuf) {
    let (_, st) = common::build_state(dir, 42).unwrap();
    (AppState::ready(load_state(&st).unwrap()), st)
}

#[tokio::test]
async fn bad_requests_are_400() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = ready(dir.path());
    for uri in [
        "/search",
        "/search?q=",
        "/search?q=%20%20",
        "/search?q=bass&k=0",
        "/search?q=bass&k=ten",
        "/search?q=bass&w=1,2",
        "/search?q=bass&w=-1,0,0",
        "/search?q=bass&w=0,0,0",
        "/search?q=bass&static=hits",
        "/page",
        "/page?id=",
    ] {
        let (status, body) = get_json(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(body["error"].is_string(), "{uri}: {body}");
    }
}

#[tokio::test]
async fn health_and_loading() {
    let app = AppState::loading();
    let (status, body) = get(&app, "/healthz").await;
    assert_eq!((status, body.as_slice()), (StatusCode::OK, b"ok".as_slice()));
    for uri in ["/search?q=bass", "/page?id=/", "/stats"] {
        let (status, body) = get_json(&app, uri).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
        assert!(body["error"].is_string());
    }
}

#[tokio::test]
async fn page_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = ready(dir.path());
    let (status, _) = get_json(&app, "/page?id=/no/such/page.html").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, p) = get_json(&app, "/page?id=/kawai/k1.html").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["page"], "/kawai/k1.html");
    assert_eq!(p["retrievable"], true);
    assert!(p["title"].as_str().is_some_and(|t| !t.is_empty()));
    assert!(p["length"].as_u64().unwrap() > 0);
    assert!(p["lpr"].as_f64().unwrap() > 0.0 && p["pr"].as_f64().unwrap() > 0.0);
    let terms: Vec<&str> = p["annotations"].as_array().unwrap().iter().map(|a| a["term"].as_str().unwrap()).collect();
    assert!(terms.contains(&"k1"), "{terms:?}");

    let (status, s) = get_json(&app, "/stats").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["corpus"]["documents"], 200);
    assert!(s["ranks"]["lpr"]["iterations_used"].as_u64().unwrap() > 0);
    assert!(s["ranks"]["pr"].is_object());
    assert!(s["graph"]["edges"].as_u64().unwrap() > 0);
    assert!(s["social"]["annotations"].as_u64().unwrap() > 0);
}

#[tokio::test]
async fn search_matches_cli() {
    let dir = tempfile::tempdir().unwrap();
    let (app, st) = ready(dir.path());
    for (stat, w) in [("lpr", "0.6,0.2,0.2"), ("pr", "0.2,0.3,0.5")] {
        let uri = format!("/search?q=bass%20drum&k=3&w={w}&static={stat}");
        let (status, body) = get(&app, &uri).await;
        assert_eq!(status, StatusCode::OK);
        let resp: SearchResponse = serde_json::from_slice(&body).unwrap();
        assert_eq!((resp.query.as_str(), resp.k), ("bass drum", 3));

        let out = common::ok(&[
            "query", "--state", st.to_str().unwrap(), "--q", "bass drum", "-k", "3", "--weights", w, "--static", stat,
        ])
        .unwrap();
        let rows = common::parse_query_tsv(&out);
        assert_eq!(rows.len(), 3);
        assert_eq!(resp.results.len(), rows.len());
        for (hit, (pos, page, c)) in resp.results.iter().zip(rows) {
            assert_eq!(hit.position, pos);
            assert_eq!(hit.page, page);
            assert_eq!(
                [hit.score, hit.components.text, hit.components.social, hit.components.static_],
                c
            );
        }
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[test]
fn serve_binary_answers() {
    let dir = tempfile::tempdir().unwrap();
    let (_, st) = common::build_state(dir.path(), 42).unwrap();
    let port = free_port();
    let mut child = Command::new(common::bin())
        .args(["serve", "--state", st.to_str().unwrap()])
        .env("LOGRANK_PORT", port.to_string())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    let mut search = None;
    while start.elapsed() < Duration::from_secs(20) {
        if let Some(r) = http_get(port, "/search?q=kawai&k=2").filter(|r| r.starts_with("HTTP/1.1 200")) {
            search = Some(r);
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    let health = http_get(port, "/healthz");
    child.kill().unwrap();
    child.wait().unwrap();

    let search = search.expect("server never answered a search");
    let body: Value = serde_json::from_str(search.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["results"].as_array().unwrap().len(), 2);
    let health = health.unwrap();
    assert!(health.starts_with("HTTP/1.1 200") && health.ends_with("ok"), "{health}");
}

#[test]
fn serve_fails_on_bad_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(common::bin())
        .args(["serve", "--state", dir.path().to_str().unwrap(), "--port", &free_port().to_string()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
