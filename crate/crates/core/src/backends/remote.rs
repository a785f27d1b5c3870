//! Remote inference client: minimal JSON-over-HTTP wire protocol.
//!
//! `POST {base}/infer` with `{ "task", "image_b64", "image_id" }` where
//! `image_b64` is a base64 PNG of the RGB crop; `GET {base}/ping` reports the
//! backend descriptor. Mask payloads come back as base64 PNG index rasters
//! (single channel, class id per pixel).

use std::io::Cursor;
use std::time::Duration;

use base64::Engine as _;
use image::RgbImage;
use serde::Deserialize;
use serde_json::json;

use super::{
    BackendDescriptor, BackendError, ClassDistribution, Classifier, Detector, MaskMap, Segmenter,
    Task,
};
use crate::dataset::LabelSet;
use crate::geometry::{BBox, Detection};

pub struct RemoteBackend {
    base_url: String,
    task: Task,
    timeout_s: f64,
    agent: ureq::Agent,
}

fn b64() -> base64::engine::GeneralPurpose {
    base64::engine::general_purpose::STANDARD
}

fn encode_png(image: &RgbImage) -> Vec<u8> {
    let mut bytes = Vec::new();
    image
        .write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
        .expect("in-memory png encode cannot fail");
    bytes
}

#[derive(Deserialize)]
struct WireDetection {
    bbox_xyxy: [f64; 4],
    confidence: f64,
    class_id: usize,
}

#[derive(Deserialize)]
struct DetectResponse {
    detections: Vec<WireDetection>,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    labels: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct SegmentResponse {
    width: u32,
    height: u32,
    mask_b64: String,
}

#[derive(Deserialize)]
struct PingResponse {
    task: Task,
    version: String,
    #[serde(default)]
    model_size_bytes: Option<u64>,
}

impl RemoteBackend {
    pub fn new(base_url: String, task: Task, timeout_s: f64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(timeout_s)))
            .build()
            .into();
        Self { base_url: base_url.trim_end_matches('/').to_string(), task, timeout_s, agent }
    }

    fn map_err(&self, err: ureq::Error, context: &str) -> BackendError {
        match err {
            ureq::Error::Timeout(_) => BackendError::InferenceTimeout(self.timeout_s),
            ureq::Error::StatusCode(code) => {
                BackendError::MalformedResponse(format!("{context}: HTTP {code}"))
            }
            other => BackendError::BackendUnavailable(format!("{context}: {other}")),
        }
    }

    /// One /ping round trip; resolution-time health check.
    pub fn ping(&self) -> Result<BackendDescriptor, BackendError> {
        let url = format!("{}/ping", self.base_url);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| self.map_err(e, "ping"))?;
        let ping: PingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::MalformedResponse(format!("ping body: {e}")))?;
        if ping.task != self.task {
            return Err(BackendError::MalformedResponse(format!(
                "ping reports task {:?}, expected {:?}",
                ping.task, self.task
            )));
        }
        Ok(BackendDescriptor {
            id: self.base_url.clone(),
            task: ping.task,
            model_size_bytes: ping.model_size_bytes,
            version: ping.version,
        })
    }

    fn infer<T: serde::de::DeserializeOwned>(
        &self,
        image: &RgbImage,
    ) -> Result<T, BackendError> {
        let url = format!("{}/infer", self.base_url);
        let body = json!({
            "task": self.task,
            "image_b64": b64().encode(encode_png(image)),
            "image_id": "",
        });
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| self.map_err(e, "infer"))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::MalformedResponse(format!("infer body: {e}")))?;
        serde_json::from_str(&text).map_err(|e| {
            let excerpt: String = text.chars().take(200).collect();
            BackendError::MalformedResponse(format!("infer schema: {e}; payload: {excerpt}"))
        })
    }
}

impl Detector for RemoteBackend {
    fn healthcheck(&self) -> Result<BackendDescriptor, BackendError> {
        self.ping()
    }

    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>, BackendError> {
        let resp: DetectResponse = self.infer(image)?;
        resp.detections
            .into_iter()
            .map(|d| {
                let [x0, y0, x1, y1] = d.bbox_xyxy;
                if x1 < x0 || y1 < y0 || !(0.0..=1.0).contains(&d.confidence) {
                    return Err(BackendError::MalformedResponse(format!(
                        "invalid detection {:?} conf {}",
                        d.bbox_xyxy, d.confidence
                    )));
                }
                Ok(Detection {
                    bbox: BBox::new(x0, y0, x1, y1),
                    confidence: d.confidence,
                    class_id: d.class_id,
                })
            })
            .collect()
    }

    fn descriptor(&self) -> BackendDescriptor {
        self.ping().unwrap_or(BackendDescriptor {
            id: self.base_url.clone(),
            task: self.task,
            model_size_bytes: None,
            version: "unknown".into(),
        })
    }
}

impl Classifier for RemoteBackend {
    fn healthcheck(&self) -> Result<BackendDescriptor, BackendError> {
        self.ping()
    }

    fn classify(&self, image: &RgbImage) -> Result<ClassDistribution, BackendError> {
        let resp: ClassifyResponse = self.infer(image)?;
        let dist = ClassDistribution {
            labels: LabelSet::new(resp.labels),
            probs: resp.probs,
        };
        if !dist.is_valid() {
            return Err(BackendError::MalformedResponse(format!(
                "probs do not form a distribution over {} labels",
                dist.labels.len()
            )));
        }
        Ok(dist)
    }

    fn descriptor(&self) -> BackendDescriptor {
        Detector::descriptor(self)
    }
}

impl Segmenter for RemoteBackend {
    fn healthcheck(&self) -> Result<BackendDescriptor, BackendError> {
        self.ping()
    }

    fn segment(&self, image: &RgbImage) -> Result<MaskMap, BackendError> {
        let resp: SegmentResponse = self.infer(image)?;
        let bytes = b64()
            .decode(&resp.mask_b64)
            .map_err(|e| BackendError::MalformedResponse(format!("mask_b64: {e}")))?;
        let mask_img = image::load_from_memory(&bytes)
            .map_err(|e| BackendError::MalformedResponse(format!("mask decode: {e}")))?
            .into_luma8();
        if mask_img.dimensions() != (resp.width, resp.height)
            || (resp.width, resp.height) != image.dimensions()
        {
            return Err(BackendError::MalformedResponse(format!(
                "mask dims {:?} do not match crop {:?}",
                mask_img.dimensions(),
                image.dimensions()
            )));
        }
        Ok(MaskMap {
            width: resp.width,
            height: resp.height,
            data: mask_img.into_raw(),
            labels: crate::dataset::disease_labels(),
        })
    }

    fn descriptor(&self) -> BackendDescriptor {
        Detector::descriptor(self)
    }
}
