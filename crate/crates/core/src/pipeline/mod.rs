//! The deployed analysis flow: detect, filter + NMS, count, crop, fan out to
//! classification and segmentation, compose the annotated overlay, and
//! assemble a timed JSON report.

mod overlay;
mod report;

pub use overlay::{compose_overlay, OverlayStyle};
pub use report::{report_from_json, report_to_json};

use std::path::PathBuf;
use std::time::Instant;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendDescriptor, Backends, ClassDistribution, MaskMap};
use crate::geometry::{crop_region, nms, BBox, Detection};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("detection backend failed: {0}")]
    DetectFailed(#[from] crate::backends::BackendError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Detections below this confidence are dropped before NMS. The default
    /// is the F1-optimal operating point of the reference detector; it is
    /// model-specific config, not a constant.
    pub confidence_threshold: f64,
    pub nms_iou_threshold: f64,
    /// Context padding around each crop, pixels.
    pub crop_padding: u32,
    pub crops_dir: PathBuf,
    pub emit_overlay: bool,
    /// Run classify and segment concurrently per crop.
    pub parallel_fanout: bool,
    /// Maximum crops processed at once during fan-out.
    pub max_in_flight: usize,
    /// A disease class is "present" when its pixel fraction exceeds this.
    pub presence_epsilon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.402,
            nms_iou_threshold: 0.5,
            crop_padding: 8,
            crops_dir: PathBuf::from("crops"),
            emit_overlay: true,
            parallel_fanout: true,
            max_in_flight: 8,
            presence_epsilon: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesFinding {
    pub label: String,
    pub confidence: f64,
    /// Probability per species label, keyed by name (sorted).
    pub distribution: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseFinding {
    /// Non-background classes whose pixel fraction exceeds presence_epsilon.
    pub present: Vec<String>,
    /// Fraction per class including background, keyed by name (sorted).
    pub pixel_fractions: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTimings {
    pub classify: f64,
    pub segment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrangeFinding {
    pub index: usize,
    pub bbox_xyxy: [f64; 4],
    pub det_confidence: f64,
    pub species: Option<SpeciesFinding>,
    pub disease: DiseaseFinding,
    pub crop_path: String,
    pub branch_ms: BranchTimings,
    pub error: Option<FindingError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: String,
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub count: usize,
    pub stages: Vec<StageTiming>,
    pub total_ms: f64,
    pub backends: Vec<BackendDescriptor>,
    pub findings: Vec<OrangeFinding>,
}

/// Findings carry only values rounded to 6 decimals so the JSON form is
/// canonical: parse then serialize reproduces the bytes.
fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn ms_since(start: Instant) -> f64 {
    round6(start.elapsed().as_secs_f64() * 1000.0)
}

struct CropOutcome {
    species: Option<SpeciesFinding>,
    disease: DiseaseFinding,
    mask: Option<MaskMap>,
    branch_ms: BranchTimings,
    error: Option<FindingError>,
}

fn species_finding(dist: &ClassDistribution) -> SpeciesFinding {
    let (idx, conf) = dist.argmax();
    SpeciesFinding {
        label: dist.labels.name(idx).to_string(),
        confidence: round6(conf),
        distribution: dist
            .labels
            .names()
            .iter()
            .zip(&dist.probs)
            .map(|(name, &p)| (name.clone(), round6(p)))
            .collect(),
    }
}

fn disease_finding(mask: &MaskMap, presence_epsilon: f64) -> DiseaseFinding {
    let fractions = mask.pixel_fractions();
    let present = mask
        .labels
        .names()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(i, _)| fractions[*i] > presence_epsilon)
        .map(|(_, name)| name.clone())
        .collect();
    DiseaseFinding {
        present,
        pixel_fractions: mask
            .labels
            .names()
            .iter()
            .zip(&fractions)
            .map(|(name, &f)| (name.clone(), round6(f)))
            .collect(),
    }
}

fn run_crop(crop: &RgbImage, backends: &Backends, config: &PipelineConfig, parallel: bool) -> CropOutcome {
    let classify = || {
        let start = Instant::now();
        let result = backends.classifier.classify(crop);
        (result, ms_since(start))
    };
    let segment = || {
        let start = Instant::now();
        let result = backends.segmenter.segment(crop);
        (result, ms_since(start))
    };
    let ((class_result, classify_ms), (seg_result, segment_ms)) = if parallel {
        std::thread::scope(|scope| {
            let seg_handle = scope.spawn(segment);
            let class_out = classify();
            (class_out, seg_handle.join().expect("segment task panicked"))
        })
    } else {
        (classify(), segment())
    };

    let mut error = None;
    let species = match class_result {
        Ok(dist) => Some(species_finding(&dist)),
        Err(e) => {
            error = Some(FindingError { stage: "classify".into(), message: e.to_string() });
            None
        }
    };
    let (disease, mask) = match seg_result {
        Ok(mask) => (disease_finding(&mask, config.presence_epsilon), Some(mask)),
        Err(e) => {
            error = Some(FindingError { stage: "segment".into(), message: e.to_string() });
            (
                DiseaseFinding {
                    present: vec![],
                    pixel_fractions: std::collections::BTreeMap::new(),
                },
                None,
            )
        }
    };
    CropOutcome {
        species,
        disease,
        mask,
        branch_ms: BranchTimings { classify: classify_ms, segment: segment_ms },
        error,
    }
}

/// Integer pixel rectangle of a crop region.
fn pixel_rect(bbox: &BBox, dims: (u32, u32)) -> (u32, u32, u32, u32) {
    let x0 = bbox.x_min.floor().max(0.0) as u32;
    let y0 = bbox.y_min.floor().max(0.0) as u32;
    let x1 = (bbox.x_max.ceil() as u32).min(dims.0);
    let y1 = (bbox.y_max.ceil() as u32).min(dims.1);
    (x0, y0, x1.max(x0 + 1), y1.max(y0 + 1))
}

/// Runs the full analysis over one image. Per-crop inference failures are
/// recorded on their finding and do not abort the other findings; only a
/// detection backend failure aborts.
pub fn analyze(
    image: &RgbImage,
    image_id: &str,
    config: &PipelineConfig,
    backends: &Backends,
) -> Result<(PipelineReport, Option<RgbImage>), PipelineError> {
    let total_start = Instant::now();
    let mut stages = Vec::new();
    let dims = image.dimensions();

    // 1. detect
    let stage_start = Instant::now();
    let raw = backends.detector.detect(image)?;
    stages.push(StageTiming { name: "detect".into(), wall_ms: ms_since(stage_start) });

    // 2. confidence filter then NMS
    let stage_start = Instant::now();
    let confident: Vec<Detection> = raw
        .into_iter()
        .filter(|d| d.confidence >= config.confidence_threshold)
        .collect();
    let mut survivors = nms(&confident, config.nms_iou_threshold);
    // finding order: confidence descending, ties by leftmost box
    survivors.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.bbox.x_min.partial_cmp(&b.bbox.x_min).unwrap())
    });
    stages.push(StageTiming { name: "filter_nms".into(), wall_ms: ms_since(stage_start) });

    // 3 + 4. count and crop
    let stage_start = Instant::now();
    std::fs::create_dir_all(&config.crops_dir)
        .map_err(|e| PipelineError::Io { path: config.crops_dir.clone(), source: e })?;
    let mut crops: Vec<(RgbImage, PathBuf, (u32, u32))> = Vec::with_capacity(survivors.len());
    for (index, det) in survivors.iter().enumerate() {
        let region = crop_region(&det.bbox, dims, config.crop_padding)
            .expect("survivor boxes intersect the image");
        let (x0, y0, x1, y1) = pixel_rect(&region.bbox, dims);
        let crop = image::imageops::crop_imm(image, x0, y0, x1 - x0, y1 - y0).to_image();
        let path = config.crops_dir.join(format!("{image_id}_{index}.png"));
        crop.save(&path)
            .map_err(|e| PipelineError::Io {
                path: path.clone(),
                source: std::io::Error::other(e),
            })?;
        crops.push((crop, path, (x0, y0)));
    }
    stages.push(StageTiming { name: "crop".into(), wall_ms: ms_since(stage_start) });

    // 5. classify + segment fan-out
    let stage_start = Instant::now();
    let mut outcomes: Vec<Option<CropOutcome>> = (0..crops.len()).map(|_| None).collect();
    if config.parallel_fanout {
        let chunk = config.max_in_flight.max(1);
        for (chunk_idx, outcome_chunk) in outcomes.chunks_mut(chunk).enumerate() {
            std::thread::scope(|scope| {
                for (offset, slot) in outcome_chunk.iter_mut().enumerate() {
                    let (crop, _, _) = &crops[chunk_idx * chunk + offset];
                    scope.spawn(move || {
                        *slot = Some(run_crop(crop, backends, config, true));
                    });
                }
            });
        }
    } else {
        for (slot, (crop, _, _)) in outcomes.iter_mut().zip(&crops) {
            *slot = Some(run_crop(crop, backends, config, false));
        }
    }
    stages.push(StageTiming { name: "classify_segment".into(), wall_ms: ms_since(stage_start) });

    let mut findings = Vec::with_capacity(survivors.len());
    let mut masks = Vec::with_capacity(survivors.len());
    for (index, ((det, (_, path, origin)), outcome)) in
        survivors.iter().zip(&crops).zip(outcomes).enumerate()
    {
        let outcome = outcome.expect("every crop ran");
        masks.push(outcome.mask.map(|m| (m, *origin)));
        findings.push(OrangeFinding {
            index,
            bbox_xyxy: [
                round6(det.bbox.x_min),
                round6(det.bbox.y_min),
                round6(det.bbox.x_max),
                round6(det.bbox.y_max),
            ],
            det_confidence: round6(det.confidence),
            species: outcome.species,
            disease: outcome.disease,
            crop_path: path.to_string_lossy().into_owned(),
            branch_ms: outcome.branch_ms,
            error: outcome.error,
        });
    }

    // 6. overlay
    let stage_start = Instant::now();
    let overlay_img = if config.emit_overlay {
        Some(compose_overlay(image, &findings, &masks, &OverlayStyle::default()))
    } else {
        None
    };
    stages.push(StageTiming { name: "overlay".into(), wall_ms: ms_since(stage_start) });

    // 7. assemble
    let stage_start = Instant::now();
    let count = findings.len();
    let mut report = PipelineReport {
        schema_version: "1".into(),
        image_id: image_id.to_string(),
        image_width: dims.0,
        image_height: dims.1,
        count,
        stages,
        total_ms: 0.0,
        backends: backends.descriptors(),
        findings,
    };
    report.stages.push(StageTiming { name: "assemble".into(), wall_ms: ms_since(stage_start) });
    report.total_ms = ms_since(total_start);
    Ok((report, overlay_img))
}
