//! HTTP front end: POST /analyze, GET /health, GET /stats.
//!
//! Concurrency is bounded: `max_concurrent` analyses run at once, up to
//! `queue_bound` more wait FIFO, anything beyond that is rejected with 429.
//! Crop outputs are namespaced per request (image id + nonce) so concurrent
//! uploads never interleave their files.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use base64::Engine as _;
use orchard_core::backends::Backends;
use orchard_core::pipeline::{analyze, report_to_json, PipelineConfig};
use serde::Deserialize;
use serde_json::json;

use crate::config::ServiceSection;
use crate::stats::StatsCollector;

pub struct ServiceState {
    pub backends: Backends,
    pub pipeline: PipelineConfig,
    pub service: ServiceSection,
    pub stats: StatsCollector,
    semaphore: tokio::sync::Semaphore,
    waiting: AtomicUsize,
    nonce: AtomicU64,
}

impl ServiceState {
    pub fn new(backends: Backends, pipeline: PipelineConfig, service: ServiceSection) -> Self {
        let max = service.max_concurrent.max(1);
        Self {
            backends,
            pipeline,
            service,
            stats: StatsCollector::new(),
            semaphore: tokio::sync::Semaphore::new(max),
            waiting: AtomicUsize::new(0),
            nonce: AtomicU64::new(0),
        }
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let body_limit = state.service.max_payload_bytes;
    Router::new()
        .route("/analyze", post(analyze_handler))
        .route("/health", get(health_handler))
        .route("/stats", get(stats_handler))
        .layer(axum::extract::DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

fn error_response(status: StatusCode, kind: &str, message: String) -> Response {
    (status, axum::Json(json!({ "error": kind, "message": message }))).into_response()
}

#[derive(Deserialize)]
struct AnalyzeQuery {
    #[serde(default)]
    overlay: Option<String>,
}

#[derive(Deserialize)]
struct JsonUpload {
    image_b64: String,
    #[serde(default)]
    image_id: Option<String>,
}

async fn extract_upload(req: Request) -> Result<(Vec<u8>, String), Response> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|ct| ct.starts_with("multipart/form-data"));

    if is_multipart {
        let mut multipart = Multipart::from_request(req, &()).await.map_err(|e| {
            error_response(StatusCode::BAD_REQUEST, "UndecodableImage", e.to_string())
        })?;
        while let Some(field) = multipart.next_field().await.map_err(|e| {
            error_response(StatusCode::PAYLOAD_TOO_LARGE, "PayloadTooLarge", e.to_string())
        })? {
            let name = field.name().unwrap_or("").to_string();
            if name == "image" || name == "file" {
                let image_id = field.file_name().map(|f| {
                    std::path::Path::new(f)
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| f.to_string())
                });
                let bytes = field.bytes().await.map_err(|e| {
                    error_response(StatusCode::PAYLOAD_TOO_LARGE, "PayloadTooLarge", e.to_string())
                })?;
                return Ok((bytes.to_vec(), image_id.unwrap_or_else(|| "upload".into())));
            }
        }
        Err(error_response(
            StatusCode::BAD_REQUEST,
            "UndecodableImage",
            "multipart body has no image field".into(),
        ))
    } else {
        let bytes = Bytes::from_request(req, &()).await.map_err(|e| {
            error_response(StatusCode::PAYLOAD_TOO_LARGE, "PayloadTooLarge", e.to_string())
        })?;
        if bytes.is_empty() {
            return Err(error_response(
                StatusCode::BAD_REQUEST,
                "UndecodableImage",
                "empty body".into(),
            ));
        }
        let upload: JsonUpload = serde_json::from_slice(&bytes).map_err(|e| {
            error_response(StatusCode::BAD_REQUEST, "UndecodableImage", e.to_string())
        })?;
        let image = base64::engine::general_purpose::STANDARD
            .decode(&upload.image_b64)
            .map_err(|e| {
                error_response(StatusCode::BAD_REQUEST, "UndecodableImage", e.to_string())
            })?;
        Ok((image, upload.image_id.unwrap_or_else(|| "upload".into())))
    }
}

async fn analyze_handler(
    State(state): State<Arc<ServiceState>>,
    Query(query): Query<AnalyzeQuery>,
    req: Request,
) -> Response {
    let started = std::time::Instant::now();
    let (image_bytes, image_id) = match extract_upload(req).await {
        Ok(v) => v,
        Err(resp) => {
            state.stats.record(started.elapsed().as_secs_f64() * 1000.0, true);
            return resp;
        }
    };

    // admission control: bounded queue, 429 beyond it
    let permit = match state.semaphore.try_acquire() {
        Ok(p) => p,
        Err(_) => {
            if state.waiting.fetch_add(1, Ordering::SeqCst) >= state.service.queue_bound {
                state.waiting.fetch_sub(1, Ordering::SeqCst);
                state.stats.record(started.elapsed().as_secs_f64() * 1000.0, true);
                return error_response(
                    StatusCode::TOO_MANY_REQUESTS,
                    "QueueFull",
                    "too many queued analyses".into(),
                );
            }
            let permit = state.semaphore.acquire().await;
            state.waiting.fetch_sub(1, Ordering::SeqCst);
            match permit {
                Ok(p) => p,
                Err(_) => {
                    return error_response(
                        StatusCode::SERVICE_UNAVAILABLE,
                        "BackendUnavailable",
                        "service shutting down".into(),
                    )
                }
            }
        }
    };

    let want_overlay = query.overlay.as_deref() == Some("1");
    let nonce = state.nonce.fetch_add(1, Ordering::SeqCst);
    let worker_state = state.clone();
    let worker_id = image_id.clone();
    let result = tokio::task::spawn_blocking(move || {
        let image = image::load_from_memory(&image_bytes)
            .map_err(|e| format!("UndecodableImage: {e}"))?
            .into_rgb8();
        let mut config = worker_state.pipeline.clone();
        config.crops_dir = config.crops_dir.join(format!("{worker_id}_{nonce}"));
        config.emit_overlay = want_overlay || config.emit_overlay;
        analyze(&image, &worker_id, &config, &worker_state.backends)
            .map(|(report, overlay)| (report, overlay, config.crops_dir))
            .map_err(|e| format!("BackendUnavailable: {e}"))
    })
    .await;
    drop(permit);

    let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
    match result {
        Ok(Ok((report, overlay, crops_dir))) => {
            state.stats.record(latency_ms, false);
            let report_json = report_to_json(&report);
            if want_overlay {
                // PNG body with the report written as a sidecar, referenced by header
                let report_path = crops_dir.join("report.json");
                let _ = std::fs::write(&report_path, &report_json);
                let mut png = Vec::new();
                let overlay = overlay.expect("overlay requested");
                if let Err(e) = overlay.write_to(
                    &mut std::io::Cursor::new(&mut png),
                    image::ImageFormat::Png,
                ) {
                    return error_response(
                        StatusCode::INTERNAL_SERVER_ERROR,
                        "OverlayEncode",
                        e.to_string(),
                    );
                }
                (
                    StatusCode::OK,
                    [
                        (header::CONTENT_TYPE, "image/png".to_string()),
                        (
                            header::HeaderName::from_static("x-report-path"),
                            report_path.to_string_lossy().into_owned(),
                        ),
                    ],
                    png,
                )
                    .into_response()
            } else {
                (
                    StatusCode::OK,
                    [(header::CONTENT_TYPE, "application/json")],
                    report_json,
                )
                    .into_response()
            }
        }
        Ok(Err(message)) => {
            state.stats.record(latency_ms, true);
            if let Some(rest) = message.strip_prefix("UndecodableImage: ") {
                error_response(StatusCode::BAD_REQUEST, "UndecodableImage", rest.to_string())
            } else {
                error_response(StatusCode::SERVICE_UNAVAILABLE, "BackendUnavailable", message)
            }
        }
        Err(join_err) => {
            state.stats.record(latency_ms, true);
            error_response(
                StatusCode::INTERNAL_SERVER_ERROR,
                "Internal",
                join_err.to_string(),
            )
        }
    }
}

async fn health_handler(State(state): State<Arc<ServiceState>>) -> Response {
    let worker_state = state.clone();
    let checks = tokio::task::spawn_blocking(move || {
        let b = &worker_state.backends;
        [
            ("detector", b.detector.healthcheck()),
            ("classifier", b.classifier.healthcheck()),
            ("segmenter", b.segmenter.healthcheck()),
        ]
        .map(|(role, result)| match result {
            Ok(desc) => json!({ "role": role, "status": "ok", "backend": desc }),
            Err(e) => json!({ "role": role, "status": "unavailable", "error": e.to_string() }),
        })
    })
    .await
    .unwrap_or_else(|e| {
        let msg = e.to_string();
        [
            json!({ "role": "detector", "status": "unknown", "error": msg }),
            json!({ "role": "classifier", "status": "unknown" }),
            json!({ "role": "segmenter", "status": "unknown" }),
        ]
    });

    let all_ok = checks.iter().all(|c| c["status"] == "ok");
    let status = if all_ok { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    let body = json!({
        "status": if all_ok { "ok" } else { "degraded" },
        "backends": checks,
    });
    (status, axum::Json(body)).into_response()
}

async fn stats_handler(State(state): State<Arc<ServiceState>>) -> Response {
    axum::Json(state.stats.snapshot()).into_response()
}

/// Binds and serves until the future is dropped or ctrl-c.
pub async fn serve(state: Arc<ServiceState>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
