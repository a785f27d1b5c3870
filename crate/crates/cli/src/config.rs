//! Flat TOML config mirroring the pipeline options plus the backend
//! registry. Every field has a default so an empty file is valid.

use std::path::{Path, PathBuf};

use orchard_core::backends::RegistryConfig;
use orchard_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub backends: RegistryConfig,
    #[serde(default)]
    pub service: ServiceSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    pub confidence_threshold: f64,
    pub nms_iou_threshold: f64,
    pub crop_padding: u32,
    pub crops_dir: PathBuf,
    pub emit_overlay: bool,
    pub parallel_fanout: bool,
    pub max_in_flight: usize,
    pub presence_epsilon: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        Self {
            confidence_threshold: d.confidence_threshold,
            nms_iou_threshold: d.nms_iou_threshold,
            crop_padding: d.crop_padding,
            crops_dir: d.crops_dir,
            emit_overlay: d.emit_overlay,
            parallel_fanout: d.parallel_fanout,
            max_in_flight: d.max_in_flight,
            presence_epsilon: d.presence_epsilon,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceSection {
    /// Concurrent analyses admitted at once.
    pub max_concurrent: usize,
    /// Requests allowed to queue beyond that; excess gets 429.
    pub queue_bound: usize,
    /// Upload size cap in bytes.
    pub max_payload_bytes: usize,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self { max_concurrent: 4, queue_bound: 16, max_payload_bytes: 20 * 1024 * 1024 }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("ConfigRead: {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("ConfigParse: {e}"))
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let p = &self.pipeline;
        PipelineConfig {
            confidence_threshold: p.confidence_threshold,
            nms_iou_threshold: p.nms_iou_threshold,
            crop_padding: p.crop_padding,
            crops_dir: p.crops_dir.clone(),
            emit_overlay: p.emit_overlay,
            parallel_fanout: p.parallel_fanout,
            max_in_flight: p.max_in_flight,
            presence_epsilon: p.presence_epsilon,
        }
    }
}
