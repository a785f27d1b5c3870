//! Deterministic procedural backends driven by pixel hue.
//!
//! The detector is hue-threshold connected-component labeling
//! (4-connectivity) with a minimum-area filter; its confidence is the filled
//! fraction of the component's bounding box. The classifier maps the mean
//! orange-range hue of a crop onto five species bands; the segmenter marks
//! pixels falling in disease hue bands. All three are pure functions of
//! pixel content, which makes them checkable by trivial pixel-counting
//! oracles and usable as ground-truth-capable test doubles.

use image::RgbImage;

use super::{
    BackendDescriptor, BackendError, ClassDistribution, Classifier, Detector, MaskMap, Segmenter,
    Task,
};
use crate::dataset::{disease_labels, species_labels, LabelSet};
use crate::geometry::{BBox, Detection};

/// Hue range (degrees) the detector treats as "orange".
pub const ORANGE_HUE_RANGE: (f32, f32) = (10.0, 50.0);
/// Band centers inside the orange range, one per species label.
pub const SPECIES_HUE_CENTERS: [f32; 5] = [15.0, 22.0, 29.0, 36.0, 43.0];
/// Disease hue bands (center, half-width), class ids 1..=5. All outside the
/// orange range so disease patches never read as fruit.
pub const DISEASE_HUE_BANDS: [(f32, f32); 5] =
    [(100.0, 15.0), (140.0, 15.0), (180.0, 15.0), (220.0, 15.0), (280.0, 15.0)];

const MIN_SATURATION: f32 = 0.3;
const MIN_VALUE: f32 = 0.2;

/// Hue in [0, 360), saturation and value in [0, 1].
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f32, f32, f32) {
    let (r, g, b) = (r as f32 / 255.0, g as f32 / 255.0, b as f32 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let saturation = if max == 0.0 { 0.0 } else { delta / max };
    (hue, saturation, max)
}

fn is_orange(px: &image::Rgb<u8>) -> bool {
    let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
    (ORANGE_HUE_RANGE.0..=ORANGE_HUE_RANGE.1).contains(&h) && s >= MIN_SATURATION && v >= MIN_VALUE
}

/// Hue-threshold connected-component detector.
#[derive(Debug, Clone)]
pub struct ProceduralDetector {
    pub min_area: u32,
}

impl Default for ProceduralDetector {
    fn default() -> Self {
        Self { min_area: 100 }
    }
}

impl Detector for ProceduralDetector {
    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>, BackendError> {
        let (w, h) = image.dimensions();
        let mut mask = vec![false; (w * h) as usize];
        for (x, y, px) in image.enumerate_pixels() {
            mask[(y * w + x) as usize] = is_orange(px);
        }

        // 4-connectivity flood fill over the hue mask
        let mut visited = vec![false; mask.len()];
        let mut detections = Vec::new();
        let mut stack = Vec::new();
        for start in 0..mask.len() {
            if !mask[start] || visited[start] {
                continue;
            }
            let (mut x_min, mut y_min, mut x_max, mut y_max) = (w, h, 0u32, 0u32);
            let mut area = 0u32;
            visited[start] = true;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                let (x, y) = (idx as u32 % w, idx as u32 / w);
                area += 1;
                x_min = x_min.min(x);
                y_min = y_min.min(y);
                x_max = x_max.max(x);
                y_max = y_max.max(y);
                let neighbors = [
                    (x > 0).then(|| idx - 1),
                    (x + 1 < w).then(|| idx + 1),
                    (y > 0).then(|| idx - w as usize),
                    (y + 1 < h).then(|| idx + w as usize),
                ];
                for n in neighbors.into_iter().flatten() {
                    if mask[n] && !visited[n] {
                        visited[n] = true;
                        stack.push(n);
                    }
                }
            }
            if area < self.min_area {
                continue;
            }
            let bbox = BBox::new(
                x_min as f64,
                y_min as f64,
                (x_max + 1) as f64,
                (y_max + 1) as f64,
            );
            let confidence = (area as f64 / bbox.area()).min(1.0);
            detections.push(Detection { bbox, confidence, class_id: 0 });
        }
        // stable output order: confidence descending, then position
        detections.sort_by(|a, b| {
            b.confidence
                .partial_cmp(&a.confidence)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.bbox.x_min.partial_cmp(&b.bbox.x_min).unwrap())
                .then(a.bbox.y_min.partial_cmp(&b.bbox.y_min).unwrap())
        });
        Ok(detections)
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            id: "procedural-detector".into(),
            task: Task::Detect,
            model_size_bytes: None,
            version: "1".into(),
        }
    }
}

/// Maps the mean orange-range hue of a crop onto the species bands.
#[derive(Debug, Clone)]
pub struct ProceduralClassifier {
    labels: LabelSet,
}

impl Default for ProceduralClassifier {
    fn default() -> Self {
        Self { labels: species_labels() }
    }
}

impl Classifier for ProceduralClassifier {
    fn classify(&self, image: &RgbImage) -> Result<ClassDistribution, BackendError> {
        let mut hue_sum = 0.0f64;
        let mut count = 0u64;
        for px in image.pixels() {
            if is_orange(px) {
                hue_sum += rgb_to_hsv(px[0], px[1], px[2]).0 as f64;
                count += 1;
            }
        }
        let probs = if count == 0 {
            // nothing orange in the crop: no evidence, uniform distribution
            vec![1.0 / self.labels.len() as f64; self.labels.len()]
        } else {
            let mean_hue = hue_sum / count as f64;
            // sharp Gaussian kernel around each band center; band spacing is 7
            // degrees so the nearest band dominates with prob > 0.9
            let weights: Vec<f64> = SPECIES_HUE_CENTERS
                .iter()
                .map(|&c| {
                    let d = (mean_hue - c as f64) / 2.0;
                    (-d * d).exp()
                })
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter().map(|w| w / total).collect()
        };
        Ok(ClassDistribution { labels: self.labels.clone(), probs })
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            id: "procedural-classifier".into(),
            task: Task::Classify,
            model_size_bytes: None,
            version: "1".into(),
        }
    }
}

/// Marks pixels inside disease hue bands with the band's class id.
#[derive(Debug, Clone)]
pub struct ProceduralSegmenter {
    labels: LabelSet,
}

impl Default for ProceduralSegmenter {
    fn default() -> Self {
        Self { labels: disease_labels() }
    }
}

impl Segmenter for ProceduralSegmenter {
    fn segment(&self, image: &RgbImage) -> Result<MaskMap, BackendError> {
        let (w, h) = image.dimensions();
        let mut data = vec![0u8; (w * h) as usize];
        for (x, y, px) in image.enumerate_pixels() {
            let (hue, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
            if s < MIN_SATURATION || v < MIN_VALUE {
                continue;
            }
            for (i, &(center, half_width)) in DISEASE_HUE_BANDS.iter().enumerate() {
                if (hue - center).abs() <= half_width {
                    data[(y * w + x) as usize] = (i + 1) as u8;
                    break;
                }
            }
        }
        Ok(MaskMap { width: w, height: h, data, labels: self.labels.clone() })
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            id: "procedural-segmenter".into(),
            task: Task::Segment,
            model_size_bytes: None,
            version: "1".into(),
        }
    }
}

/// Solid RGB color whose hue lands exactly on a given angle, full
/// saturation/value. Used by fixtures and the planted-scene generator.
pub fn color_for_hue(hue_deg: f32) -> image::Rgb<u8> {
    let h = hue_deg.rem_euclid(360.0) / 60.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    image::Rgb([(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8])
}
