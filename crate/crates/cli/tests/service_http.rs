//! HTTP-level service behavior beyond the basic contract: overlay delivery,
//! multipart uploads, payload limits, and malformed-input responses.

use std::sync::Arc;

use base64::Engine as _;
use orchard_cli::config::ServiceSection;
use orchard_cli::service::{router, ServiceState};
use orchard_core::backends::Backends;
use orchard_core::pipeline::{report_from_json, PipelineConfig};
use orchard_core::synth::PlantedScene;

struct TestServer {
    addr: std::net::SocketAddr,
    runtime: tokio::runtime::Runtime,
}

impl TestServer {
    fn start(state: Arc<ServiceState>) -> Self {
        let runtime = tokio::runtime::Runtime::new().unwrap();
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .unwrap();
        let addr = listener.local_addr().unwrap();
        let app = router(state);
        runtime.spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Self { addr, runtime }
    }

    fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        let runtime = std::mem::replace(&mut self.runtime, tokio::runtime::Runtime::new().unwrap());
        runtime.shutdown_background();
    }
}

fn server_with(
    crops_dir: &std::path::Path,
    service: ServiceSection,
) -> TestServer {
    let config = PipelineConfig {
        crops_dir: crops_dir.to_path_buf(),
        emit_overlay: false,
        ..Default::default()
    };
    TestServer::start(Arc::new(ServiceState::new(Backends::procedural(), config, service)))
}

fn fixture_png() -> Vec<u8> {
    let img = PlantedScene::three_oranges().render();
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png).unwrap();
    png
}

fn json_upload(png: &[u8], image_id: &str) -> String {
    let b64 = base64::engine::general_purpose::STANDARD.encode(png);
    serde_json::json!({ "image_b64": b64, "image_id": image_id }).to_string()
}

#[test]
fn overlay_query_returns_png_with_report_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let server = server_with(&tmp.path().join("crops"), ServiceSection::default());
    let body = json_upload(&fixture_png(), "ov");

    let mut resp = ureq::post(&server.url("/analyze?overlay=1"))
        .header("content-type", "application/json")
        .send(body.as_bytes())
        .unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers().get("content-type").unwrap(), "image/png");
    let report_path = resp
        .headers()
        .get("x-report-path")
        .expect("sidecar header")
        .to_str()
        .unwrap()
        .to_string();

    let png = resp.body_mut().with_config().limit(64 * 1024 * 1024).read_to_vec().unwrap();
    let overlay = image::load_from_memory(&png).unwrap();
    assert_eq!(overlay.width(), 640);

    let report = report_from_json(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.count, 3);
}

#[test]
fn multipart_upload_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let server = server_with(&tmp.path().join("crops"), ServiceSection::default());
    let png = fixture_png();

    let boundary = "X-ORCHARD-TEST-BOUNDARY";
    let mut body = Vec::new();
    body.extend_from_slice(
        format!(
            "--{boundary}\r\ncontent-disposition: form-data; \
             name=\"image\"; filename=\"tree.png\"\r\n\
             content-type: image/png\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(&png);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());

    let mut resp = ureq::post(&server.url("/analyze"))
        .header("content-type", &format!("multipart/form-data; boundary={boundary}"))
        .send(&body[..])
        .unwrap();
    assert_eq!(resp.status(), 200);
    let report = report_from_json(&resp.body_mut().read_to_string().unwrap()).unwrap();
    assert_eq!(report.image_id, "tree");
    assert_eq!(report.count, 3);
}

#[test]
fn undecodable_and_empty_bodies_get_400() {
    let tmp = tempfile::tempdir().unwrap();
    let server = server_with(&tmp.path().join("crops"), ServiceSection::default());

    for body in ["", "{\"image_b64\": \"not base64 @@\"}"] {
        match ureq::post(&server.url("/analyze"))
            .header("content-type", "application/json")
            .send(body.as_bytes())
        {
            Err(ureq::Error::StatusCode(code)) => assert_eq!(code, 400),
            other => panic!("expected 400, got {other:?}"),
        }
    }

    // valid base64 of bytes that are not an image
    let body = json_upload(b"not a png", "junk");
    match ureq::post(&server.url("/analyze"))
        .header("content-type", "application/json")
        .send(body.as_bytes())
    {
        Err(ureq::Error::StatusCode(code)) => assert_eq!(code, 400),
        other => panic!("expected 400, got {other:?}"),
    }
}

#[test]
fn oversized_payload_gets_413() {
    let tmp = tempfile::tempdir().unwrap();
    let service = ServiceSection { max_payload_bytes: 10_000, ..Default::default() };
    let server = server_with(&tmp.path().join("crops"), service);
    let body = json_upload(&fixture_png(), "big"); // well over 10 kB

    match ureq::post(&server.url("/analyze"))
        .header("content-type", "application/json")
        .send(body.as_bytes())
    {
        Err(ureq::Error::StatusCode(code)) => assert_eq!(code, 413),
        other => panic!("expected 413, got {other:?}"),
    }
}

#[test]
fn health_reports_all_three_backends() {
    let tmp = tempfile::tempdir().unwrap();
    let server = server_with(&tmp.path().join("crops"), ServiceSection::default());

    let mut resp = ureq::get(&server.url("/health")).call().unwrap();
    assert_eq!(resp.status(), 200);
    let body: serde_json::Value =
        serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap();
    assert_eq!(body["status"], "ok");
    let roles: Vec<&str> = body["backends"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["role"].as_str().unwrap())
        .collect();
    assert_eq!(roles, ["detector", "classifier", "segmenter"]);
}

#[test]
fn stats_start_empty_and_ignore_non_analyze_traffic() {
    let tmp = tempfile::tempdir().unwrap();
    let server = server_with(&tmp.path().join("crops"), ServiceSection::default());

    let _ = ureq::get(&server.url("/health")).call().unwrap();
    let mut resp = ureq::get(&server.url("/stats")).call().unwrap();
    let stats: serde_json::Value =
        serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap();
    assert_eq!(stats["request_count"].as_u64(), Some(0));
    assert!(stats["latency_ms_p50"].is_null());
    assert!(stats["uptime_s"].as_f64().unwrap() >= 0.0);
}
