mod common;

use std::io::Cursor;
use std::sync::Arc;

use base64::Engine as _;
use common::{ping_response, StubServer};
use orchard_core::backends::{
    registry, BackendConfig, BackendError, Classifier, Detector, RegistryConfig, RemoteBackend,
    Segmenter, Task,
};

fn test_image() -> image::RgbImage {
    image::RgbImage::from_pixel(32, 24, image::Rgb([200, 120, 40]))
}

fn mask_b64(w: u32, h: u32) -> String {
    let mut mask = image::GrayImage::new(w, h);
    for y in 0..h.min(10) {
        for x in 0..w.min(10) {
            mask.put_pixel(x, y, image::Luma([2]));
        }
    }
    let mut bytes = Vec::new();
    mask.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png).unwrap();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

#[test]
fn detect_round_trips_two_boxes() {
    let server = StubServer::start(Arc::new(|path, _| match path {
        "/ping" => (200, ping_response("detect")),
        "/infer" => (
            200,
            r#"{"detections":[
                {"bbox_xyxy":[1.0,2.0,11.0,12.0],"confidence":0.9,"class_id":0},
                {"bbox_xyxy":[20.0,2.0,30.0,12.0],"confidence":0.7,"class_id":0}
            ]}"#
            .into(),
        ),
        _ => (404, "{}".into()),
    }));
    let backend = RemoteBackend::new(server.url.clone(), Task::Detect, 5.0);
    let dets = backend.detect(&test_image()).unwrap();
    assert_eq!(dets.len(), 2);
    assert_eq!(dets[0].bbox, orchard_core::BBox::new(1.0, 2.0, 11.0, 12.0));
    assert_eq!(dets[1].confidence, 0.7);
}

#[test]
fn classify_surfaces_distribution_verbatim() {
    let server = StubServer::start(Arc::new(|path, _| match path {
        "/ping" => (200, ping_response("classify")),
        "/infer" => (
            200,
            r#"{"labels":["Tangerine","Navel","Blood Oranges","Bergamout","Tangelo"],
                "probs":[0.7,0.1,0.1,0.05,0.05]}"#
                .into(),
        ),
        _ => (404, "{}".into()),
    }));
    let backend = RemoteBackend::new(server.url.clone(), Task::Classify, 5.0);
    let dist = backend.classify(&test_image()).unwrap();
    assert_eq!(dist.probs, vec![0.7, 0.1, 0.1, 0.05, 0.05]);
    assert_eq!(dist.argmax().0, 0);
}

#[test]
fn segment_decodes_index_raster() {
    let b64 = mask_b64(32, 24);
    let server = StubServer::start(Arc::new(move |path, _| match path {
        "/ping" => (200, ping_response("segment")),
        "/infer" => (
            200,
            format!(r#"{{"width":32,"height":24,"mask_b64":"{b64}"}}"#),
        ),
        _ => (404, "{}".into()),
    }));
    let backend = RemoteBackend::new(server.url.clone(), Task::Segment, 5.0);
    let mask = backend.segment(&test_image()).unwrap();
    assert_eq!((mask.width, mask.height), (32, 24));
    assert_eq!(mask.data.iter().filter(|&&c| c == 2).count(), 100);
}

#[test]
fn mismatched_mask_dims_is_malformed_response() {
    let b64 = mask_b64(16, 16);
    let server = StubServer::start(Arc::new(move |path, _| match path {
        "/ping" => (200, ping_response("segment")),
        "/infer" => (
            200,
            format!(r#"{{"width":16,"height":16,"mask_b64":"{b64}"}}"#),
        ),
        _ => (404, "{}".into()),
    }));
    let backend = RemoteBackend::new(server.url.clone(), Task::Segment, 5.0);
    let err = backend.segment(&test_image()).unwrap_err();
    assert!(matches!(err, BackendError::MalformedResponse(_)), "{err}");
}

#[test]
fn non_200_is_malformed_response() {
    let server = StubServer::start(Arc::new(|path, _| match path {
        "/ping" => (200, ping_response("detect")),
        _ => (500, r#"{"error":"boom"}"#.into()),
    }));
    let backend = RemoteBackend::new(server.url.clone(), Task::Detect, 5.0);
    let err = backend.detect(&test_image()).unwrap_err();
    assert!(matches!(err, BackendError::MalformedResponse(_)), "{err}");
}

#[test]
fn registry_fails_at_resolution_after_teardown() {
    let server = StubServer::start(Arc::new(|path, _| match path {
        "/ping" => (200, ping_response("detect")),
        _ => (404, "{}".into()),
    }));
    let url = server.url.clone();
    server.shutdown();
    let config = RegistryConfig {
        detector: BackendConfig::Remote { url, timeout_s: 1.0 },
        ..Default::default()
    };
    let err = match registry(&config) {
        Err(e) => e,
        Ok(_) => panic!("registry resolved against a torn-down endpoint"),
    };
    assert!(
        matches!(err, BackendError::BackendUnavailable(_) | BackendError::InferenceTimeout(_)),
        "{err}"
    );
}

#[test]
fn ping_task_mismatch_is_rejected() {
    let server = StubServer::start(Arc::new(|path, _| match path {
        "/ping" => (200, ping_response("classify")),
        _ => (404, "{}".into()),
    }));
    let backend = RemoteBackend::new(server.url.clone(), Task::Detect, 5.0);
    assert!(matches!(backend.ping(), Err(BackendError::MalformedResponse(_))));
}
