//! Segmentation metrics over per-pixel class-id rasters: per-class IoU,
//! mean IoU (background and absent classes excluded), pixel accuracy, and
//! per-class precision/recall/F1, with micro/macro dataset aggregation.

use serde::Serialize;

use super::MetricsError;
use crate::backends::MaskMap;
use crate::dataset::LabelSet;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PixelCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegReport {
    pub labels: Vec<String>,
    /// Raw pixel counts per class; aggregation pools these.
    pub counts: Vec<PixelCounts>,
    /// Per-class IoU = TP / (TP + FP + FN); 0 when the class is absent everywhere.
    pub iou: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// Mean IoU over non-background classes present in ground truth.
    pub mean_iou: f64,
    pub pixel_accuracy: f64,
    pub total_pixels: u64,
    pub matching_pixels: u64,
}

fn safe_div(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn from_counts(
    labels: &LabelSet,
    counts: Vec<PixelCounts>,
    matching_pixels: u64,
    total_pixels: u64,
) -> SegReport {
    let iou: Vec<f64> =
        counts.iter().map(|c| safe_div(c.tp, c.tp + c.fp + c.fn_)).collect();
    let precision: Vec<f64> = counts.iter().map(|c| safe_div(c.tp, c.tp + c.fp)).collect();
    let recall: Vec<f64> = counts.iter().map(|c| safe_div(c.tp, c.tp + c.fn_)).collect();
    let f1: Vec<f64> = precision
        .iter()
        .zip(&recall)
        .map(|(p, r)| if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })
        .collect();
    // mean IoU over non-background classes with ground-truth pixels
    let present: Vec<usize> = (1..labels.len())
        .filter(|&c| counts[c].tp + counts[c].fn_ > 0)
        .collect();
    let mean_iou = if present.is_empty() {
        0.0
    } else {
        present.iter().map(|&c| iou[c]).sum::<f64>() / present.len() as f64
    };
    SegReport {
        labels: labels.names().to_vec(),
        counts,
        iou,
        precision,
        recall,
        f1,
        mean_iou,
        pixel_accuracy: safe_div(matching_pixels, total_pixels),
        total_pixels,
        matching_pixels,
    }
}

/// Compares a predicted mask against ground truth pixel by pixel.
pub fn seg_report(
    pred: &MaskMap,
    truth: &MaskMap,
    labels: &LabelSet,
) -> Result<SegReport, MetricsError> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(MetricsError::ShapeMismatch {
            pred: (pred.width, pred.height),
            truth: (truth.width, truth.height),
        });
    }
    let n = labels.len();
    let mut counts = vec![PixelCounts::default(); n];
    let mut matching = 0u64;
    for (&p, &t) in pred.data.iter().zip(&truth.data) {
        let (p, t) = (p as usize, t as usize);
        if p >= n {
            return Err(MetricsError::UnknownLabel(p));
        }
        if t >= n {
            return Err(MetricsError::UnknownLabel(t));
        }
        if p == t {
            counts[p].tp += 1;
            matching += 1;
        } else {
            counts[p].fp += 1;
            counts[t].fn_ += 1;
        }
    }
    let total = pred.data.len() as u64;
    Ok(from_counts(labels, counts, matching, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateMode {
    /// Pool pixel counts across images before taking ratios.
    Micro,
    /// Average per-image ratios.
    Macro,
}

/// Dataset-level aggregation of per-image segmentation reports.
pub fn aggregate_seg(reports: &[SegReport], mode: AggregateMode) -> Result<SegReport, MetricsError> {
    let first = reports.first().ok_or(MetricsError::EmptyList)?;
    let labels = LabelSet::new(first.labels.clone());
    match mode {
        AggregateMode::Micro => {
            let n = labels.len();
            let mut counts = vec![PixelCounts::default(); n];
            let (mut matching, mut total) = (0u64, 0u64);
            for r in reports {
                for (pooled, c) in counts.iter_mut().zip(&r.counts) {
                    pooled.tp += c.tp;
                    pooled.fp += c.fp;
                    pooled.fn_ += c.fn_;
                }
                matching += r.matching_pixels;
                total += r.total_pixels;
            }
            Ok(from_counts(&labels, counts, matching, total))
        }
        AggregateMode::Macro => {
            let n = reports.len() as f64;
            let k = labels.len();
            let mean_vec = |f: fn(&SegReport) -> &Vec<f64>| -> Vec<f64> {
                (0..k)
                    .map(|c| reports.iter().map(|r| f(r)[c]).sum::<f64>() / n)
                    .collect()
            };
            let iou = mean_vec(|r| &r.iou);
            let precision = mean_vec(|r| &r.precision);
            let recall = mean_vec(|r| &r.recall);
            let f1 = mean_vec(|r| &r.f1);
            // pooled counts retained for reference
            let mut counts = vec![PixelCounts::default(); k];
            let (mut matching, mut total) = (0u64, 0u64);
            for r in reports {
                for (pooled, c) in counts.iter_mut().zip(&r.counts) {
                    pooled.tp += c.tp;
                    pooled.fp += c.fp;
                    pooled.fn_ += c.fn_;
                }
                matching += r.matching_pixels;
                total += r.total_pixels;
            }
            Ok(SegReport {
                labels: labels.names().to_vec(),
                counts,
                mean_iou: reports.iter().map(|r| r.mean_iou).sum::<f64>() / n,
                pixel_accuracy: reports.iter().map(|r| r.pixel_accuracy).sum::<f64>() / n,
                iou,
                precision,
                recall,
                f1,
                matching_pixels: matching,
                total_pixels: total,
            })
        }
    }
}
