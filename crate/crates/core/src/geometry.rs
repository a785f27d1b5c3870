//! Bounding-box arithmetic shared by every other module.
//!
//! The canonical internal convention is corner form `(x_min, y_min, x_max, y_max)`
//! in absolute pixels. Boxes are continuous-coordinate rectangles with
//! `area = width * height` (COCO area convention, no +1 adjustment).
//! Other conventions (COCO xywh, YOLO normalized center form) exist only at
//! I/O boundaries and go through [`convert`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("ZeroAreaCrop: box ({0:?}) has no area inside the image")]
    ZeroAreaCrop(BBox),
    #[error("InvalidNormalizedCoord: {0} outside [0,1]")]
    InvalidNormalizedCoord(f64),
}

/// Axis-aligned rectangle in absolute pixels, corner form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        debug_assert!(x_max >= x_min && y_max >= y_min);
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Intersection rectangle, or `None` when the boxes do not overlap
    /// with positive area in both axes.
    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        if x_max >= x_min && y_max >= y_min {
            Some(BBox { x_min, y_min, x_max, y_max })
        } else {
            None
        }
    }
}

/// A detector output: box, score, class index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    pub class_id: usize,
}

/// A crop rectangle clamped to its source image, plus provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRegion {
    pub bbox: BBox,
    pub padding: u32,
    pub source_dims: (u32, u32),
}

/// Intersection over union. Zero-union pairs (two zero-area boxes) yield 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersect(b).map_or(0.0, |r| r.area());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Greedy class-wise non-maximum suppression.
///
/// Repeatedly keeps the highest-confidence remaining detection and discards
/// all same-class detections with IoU strictly above `iou_threshold` against
/// it. Output sorted by descending confidence; confidence ties break by lower
/// class_id, then input order, so the result is deterministic.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(dets[a].class_id.cmp(&dets[b].class_id))
            .then(a.cmp(&b))
    });

    let mut suppressed = vec![false; dets.len()];
    let mut kept = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(dets[i]);
        for &j in &order[rank + 1..] {
            if !suppressed[j]
                && dets[j].class_id == dets[i].class_id
                && iou(&dets[j].bbox, &dets[i].bbox) > iou_threshold
            {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Expands `bbox` by `padding` on every side, then clamps to the image.
///
/// Fails with `ZeroAreaCrop` when the clamped region has no area (the box
/// lies entirely outside the image).
pub fn crop_region(
    bbox: &BBox,
    image_dims: (u32, u32),
    padding: u32,
) -> Result<CropRegion, GeometryError> {
    let (w, h) = (image_dims.0 as f64, image_dims.1 as f64);
    let p = padding as f64;
    let clamped = BBox {
        x_min: (bbox.x_min - p).max(0.0).min(w),
        y_min: (bbox.y_min - p).max(0.0).min(h),
        x_max: (bbox.x_max + p).max(0.0).min(w),
        y_max: (bbox.y_max + p).max(0.0).min(h),
    };
    if clamped.area() <= 0.0 {
        return Err(GeometryError::ZeroAreaCrop(*bbox));
    }
    Ok(CropRegion { bbox: clamped, padding, source_dims: image_dims })
}

/// Box coordinate conventions that appear at I/O boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxFormat {
    /// `(x_min, y_min, x_max, y_max)` absolute pixels.
    CornerXyxy,
    /// `(x, y, width, height)` absolute pixels, COCO style.
    CocoXywh,
    /// `(cx, cy, w, h)` normalized to `[0,1]`, YOLO label style.
    YoloNormCxcywh,
}

/// Converts a 4-tuple between box conventions.
///
/// `image_dims` participates only when a normalized convention is involved.
pub fn convert(
    values: [f64; 4],
    from: BoxFormat,
    to: BoxFormat,
    image_dims: (u32, u32),
) -> Result<[f64; 4], GeometryError> {
    let corner = to_corner(values, from, image_dims)?;
    from_corner(corner, to, image_dims)
}

fn to_corner(v: [f64; 4], from: BoxFormat, dims: (u32, u32)) -> Result<[f64; 4], GeometryError> {
    match from {
        BoxFormat::CornerXyxy => Ok(v),
        BoxFormat::CocoXywh => Ok([v[0], v[1], v[0] + v[2], v[1] + v[3]]),
        BoxFormat::YoloNormCxcywh => {
            for &x in &v {
                if !(0.0..=1.0).contains(&x) {
                    return Err(GeometryError::InvalidNormalizedCoord(x));
                }
            }
            let (w, h) = (dims.0 as f64, dims.1 as f64);
            let (cx, cy, bw, bh) = (v[0] * w, v[1] * h, v[2] * w, v[3] * h);
            Ok([cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0])
        }
    }
}

fn from_corner(c: [f64; 4], to: BoxFormat, dims: (u32, u32)) -> Result<[f64; 4], GeometryError> {
    match to {
        BoxFormat::CornerXyxy => Ok(c),
        BoxFormat::CocoXywh => Ok([c[0], c[1], c[2] - c[0], c[3] - c[1]]),
        BoxFormat::YoloNormCxcywh => {
            let (w, h) = (dims.0 as f64, dims.1 as f64);
            Ok([
                (c[0] + c[2]) / 2.0 / w,
                (c[1] + c[3]) / 2.0 / h,
                (c[2] - c[0]) / w,
                (c[3] - c[1]) / h,
            ])
        }
    }
}
