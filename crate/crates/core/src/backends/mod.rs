//! Model-backend contract for the three tasks, plus two implementations:
//! a deterministic hue-based procedural backend and a remote JSON/HTTP client.

mod procedural;
mod remote;

pub use procedural::{
    color_for_hue, rgb_to_hsv, ProceduralClassifier, ProceduralDetector, ProceduralSegmenter,
    DISEASE_HUE_BANDS, ORANGE_HUE_RANGE, SPECIES_HUE_CENTERS,
};
pub use remote::RemoteBackend;

use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabelSet;
use crate::geometry::Detection;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("BackendUnavailable: {0}")]
    BackendUnavailable(String),
    #[error("InferenceTimeout after {0} s")]
    InferenceTimeout(f64),
    #[error("MalformedResponse: {0}")]
    MalformedResponse(String),
    #[error("UnknownBackendId: {0}")]
    UnknownBackendId(String),
}

/// Per-class probability vector over a label set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub labels: LabelSet,
    pub probs: Vec<f64>,
}

impl ClassDistribution {
    /// Index and probability of the most likely class.
    pub fn argmax(&self) -> (usize, f64) {
        self.probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, &p)| (i, p))
            .unwrap_or((0, 0.0))
    }

    pub fn is_valid(&self) -> bool {
        self.probs.len() == self.labels.len()
            && self.probs.iter().all(|p| (0.0..=1.0).contains(p))
            && (self.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-6
    }
}

/// Dense per-pixel class-id raster, row-major, 0 = background.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
    pub labels: LabelSet,
}

impl MaskMap {
    pub fn class_at(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    /// Fraction of pixels per class, including background at index 0.
    pub fn pixel_fractions(&self) -> Vec<f64> {
        let mut counts = vec![0u64; self.labels.len()];
        for &c in &self.data {
            counts[c as usize] += 1;
        }
        let total = self.data.len() as f64;
        counts.iter().map(|&c| c as f64 / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detect,
    Classify,
    Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub id: String,
    pub task: Task,
    pub model_size_bytes: Option<u64>,
    pub version: String,
}

pub trait Detector: Send + Sync {
    /// Raw detections, confidences in [0,1], boxes inside image bounds.
    /// Not NMS-filtered; the pipeline owns post-processing.
    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>, BackendError>;
    fn descriptor(&self) -> BackendDescriptor;
    /// Liveness probe; remote backends answer with a /ping round trip.
    fn healthcheck(&self) -> Result<BackendDescriptor, BackendError> {
        Ok(self.descriptor())
    }
}

pub trait Classifier: Send + Sync {
    fn classify(&self, image: &RgbImage) -> Result<ClassDistribution, BackendError>;
    fn descriptor(&self) -> BackendDescriptor;
    fn healthcheck(&self) -> Result<BackendDescriptor, BackendError> {
        Ok(self.descriptor())
    }
}

pub trait Segmenter: Send + Sync {
    /// Mask dimensions equal the input image dimensions.
    fn segment(&self, image: &RgbImage) -> Result<MaskMap, BackendError>;
    fn descriptor(&self) -> BackendDescriptor;
    fn healthcheck(&self) -> Result<BackendDescriptor, BackendError> {
        Ok(self.descriptor())
    }
}

/// How to construct the backend for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Procedural,
    Remote {
        url: String,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
    },
}

fn default_timeout_s() -> f64 {
    10.0
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Procedural
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegistryConfig {
    #[serde(default)]
    pub detector: BackendConfig,
    #[serde(default)]
    pub classifier: BackendConfig,
    #[serde(default)]
    pub segmenter: BackendConfig,
}

/// The resolved backend triple the pipeline runs against.
#[derive(Clone)]
pub struct Backends {
    pub detector: Arc<dyn Detector>,
    pub classifier: Arc<dyn Classifier>,
    pub segmenter: Arc<dyn Segmenter>,
}

impl Backends {
    pub fn procedural() -> Self {
        Self {
            detector: Arc::new(ProceduralDetector::default()),
            classifier: Arc::new(ProceduralClassifier::default()),
            segmenter: Arc::new(ProceduralSegmenter::default()),
        }
    }

    pub fn descriptors(&self) -> Vec<BackendDescriptor> {
        vec![
            self.detector.descriptor(),
            self.classifier.descriptor(),
            self.segmenter.descriptor(),
        ]
    }
}

/// Resolves a registry config into live backends. Remote backends are
/// health-checked with one /ping round trip, so an unreachable endpoint
/// fails here rather than on the first inference call.
pub fn registry(config: &RegistryConfig) -> Result<Backends, BackendError> {
    let make_remote = |cfg: &BackendConfig, task: Task| -> Result<RemoteBackend, BackendError> {
        match cfg {
            BackendConfig::Remote { url, timeout_s } => {
                let backend = RemoteBackend::new(url.clone(), task, *timeout_s);
                backend.ping()?;
                Ok(backend)
            }
            BackendConfig::Procedural => unreachable!(),
        }
    };
    let detector: Arc<dyn Detector> = match &config.detector {
        BackendConfig::Procedural => Arc::new(ProceduralDetector::default()),
        remote => Arc::new(make_remote(remote, Task::Detect)?),
    };
    let classifier: Arc<dyn Classifier> = match &config.classifier {
        BackendConfig::Procedural => Arc::new(ProceduralClassifier::default()),
        remote => Arc::new(make_remote(remote, Task::Classify)?),
    };
    let segmenter: Arc<dyn Segmenter> = match &config.segmenter {
        BackendConfig::Procedural => Arc::new(ProceduralSegmenter::default()),
        remote => Arc::new(make_remote(remote, Task::Segment)?),
    };
    Ok(Backends { detector, classifier, segmenter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_registry_resolves_without_network() {
        let backends = registry(&RegistryConfig::default()).unwrap();
        assert_eq!(backends.descriptors().len(), 3);
        assert_eq!(backends.detector.descriptor().task, Task::Detect);
    }

    #[test]
    fn unreachable_remote_fails_at_resolution() {
        let config = RegistryConfig {
            detector: BackendConfig::Remote {
                // reserved port, nothing listens here
                url: "http://127.0.0.1:1".into(),
                timeout_s: 1.0,
            },
            ..Default::default()
        };
        assert!(matches!(registry(&config), Err(BackendError::BackendUnavailable(_))));
    }

    #[test]
    fn argmax_picks_highest() {
        let d = ClassDistribution {
            labels: crate::dataset::species_labels(),
            probs: vec![0.1, 0.6, 0.1, 0.1, 0.1],
        };
        assert_eq!(d.argmax(), (1, 0.6));
        assert!(d.is_valid());
    }
}
