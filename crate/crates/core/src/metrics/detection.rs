//! Detection metrics: greedy matching, PR curves, average precision with
//! all-points or 101-point interpolation, mAP over IoU thresholds, and
//! confidence-threshold curves with the F1-optimal operating point.

use serde::Serialize;

use super::MetricsError;
use crate::geometry::{iou, BBox, Detection};

/// COCO mAP50-95 thresholds: 0.50 to 0.95 step 0.05.
pub const COCO_IOU_THRESHOLDS: [f64; 10] =
    [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatchFlag {
    TruePositive,
    FalsePositive,
}

/// A detection with its TP/FP verdict from matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaggedDetection {
    pub detection: Detection,
    pub flag: MatchFlag,
}

/// Greedy matching: detections in descending-confidence order (ties by input
/// order) each claim the unclaimed same-class ground truth of highest IoU,
/// provided IoU >= threshold; otherwise they are false positives. Returns the
/// flagged detections in that confidence order plus the unmatched-GT count.
pub fn match_detections(
    dets: &[Detection],
    gts: &[(BBox, usize)],
    iou_threshold: f64,
) -> (Vec<FlaggedDetection>, usize) {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; gts.len()];
    let mut flagged = Vec::with_capacity(dets.len());
    for &i in &order {
        let det = dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, (gt_box, gt_class)) in gts.iter().enumerate() {
            if claimed[g] || *gt_class != det.class_id {
                continue;
            }
            let overlap = iou(&det.bbox, gt_box);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        let flag = match best {
            Some((g, _)) => {
                claimed[g] = true;
                MatchFlag::TruePositive
            }
            None => MatchFlag::FalsePositive,
        };
        flagged.push(FlaggedDetection { detection: det, flag });
    }
    let unmatched = claimed.iter().filter(|c| !**c).count();
    (flagged, unmatched)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Exact area under the right-max precision envelope.
    AllPoints,
    /// COCO-style mean of envelope precision at 101 evenly spaced recalls.
    Point101,
}

/// Recall/precision pairs swept over the ranked detections.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PRCurve {
    /// (recall, precision), recall non-decreasing.
    pub points: Vec<(f64, f64)>,
    pub iou_threshold: f64,
    pub class_id: usize,
}

/// Cumulative (recall, precision) operating points over a ranked TP/FP
/// sequence. `flagged` must already be in descending-confidence order, as
/// produced by [`match_detections`].
fn operating_points(flagged: &[FlaggedDetection], total_gt: usize) -> Vec<(f64, f64)> {
    let mut points = Vec::with_capacity(flagged.len());
    let (mut tp, mut fp) = (0u64, 0u64);
    for f in flagged {
        match f.flag {
            MatchFlag::TruePositive => tp += 1,
            MatchFlag::FalsePositive => fp += 1,
        }
        points.push((tp as f64 / total_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    points
}

/// Precision envelope: for each point, the max precision at equal-or-greater
/// recall.
fn right_max_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut env: Vec<(f64, f64)> = points.to_vec();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i].1 = env[i].1.max(env[i + 1].1);
    }
    env
}

/// Average precision over a dataset-wide ranked TP/FP sequence.
pub fn average_precision(
    flagged: &[FlaggedDetection],
    total_gt: usize,
    interpolation: Interpolation,
) -> Result<f64, MetricsError> {
    if total_gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let env = right_max_envelope(&operating_points(flagged, total_gt));
    Ok(match interpolation {
        Interpolation::AllPoints => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for &(recall, precision) in &env {
                ap += (recall - prev_recall) * precision;
                prev_recall = recall;
            }
            ap
        }
        Interpolation::Point101 => {
            let mut sum = 0.0;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                // envelope precision at the first operating point with recall >= r
                let p = env
                    .iter()
                    .find(|(recall, _)| *recall >= r - 1e-12)
                    .map_or(0.0, |(_, precision)| *precision);
                sum += p;
            }
            sum / 101.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSummary {
    /// IoU threshold paired with its mAP (mean AP over classes with GT).
    pub per_threshold: Vec<(f64, f64)>,
    /// Mean over the thresholds above.
    pub aggregate: f64,
    /// Classes excluded for having no ground truth.
    pub skipped_classes: Vec<usize>,
}

/// mAP at each IoU threshold plus the aggregate mean, matching and ranking
/// per image then pooling the ranked sequence dataset-wide per class.
pub fn map_at(
    dets_per_image: &[Vec<Detection>],
    gts_per_image: &[Vec<(BBox, usize)>],
    thresholds: &[f64],
    interpolation: Interpolation,
) -> Result<DetectionSummary, MetricsError> {
    let n_classes = gts_per_image
        .iter()
        .flatten()
        .map(|(_, c)| c + 1)
        .chain(dets_per_image.iter().flatten().map(|d| d.class_id + 1))
        .max()
        .ok_or(MetricsError::NoGroundTruth)?;

    let mut skipped_classes = Vec::new();
    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut ap_sum = 0.0;
        let mut classes_with_gt = 0usize;
        for class in 0..n_classes {
            let total_gt: usize = gts_per_image
                .iter()
                .map(|gts| gts.iter().filter(|(_, c)| *c == class).count())
                .sum();
            if total_gt == 0 {
                if !skipped_classes.contains(&class) {
                    skipped_classes.push(class);
                }
                continue;
            }
            classes_with_gt += 1;
            // match per image, then pool ranked by confidence across images
            let mut pooled: Vec<(f64, FlaggedDetection)> = Vec::new();
            for (dets, gts) in dets_per_image.iter().zip(gts_per_image) {
                let class_dets: Vec<Detection> =
                    dets.iter().filter(|d| d.class_id == class).copied().collect();
                let class_gts: Vec<(BBox, usize)> =
                    gts.iter().filter(|(_, c)| *c == class).copied().collect();
                let (flagged, _) = match_detections(&class_dets, &class_gts, t);
                pooled.extend(flagged.into_iter().map(|f| (f.detection.confidence, f)));
            }
            pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
            let ranked: Vec<FlaggedDetection> = pooled.into_iter().map(|(_, f)| f).collect();
            ap_sum += average_precision(&ranked, total_gt, interpolation)?;
        }
        if classes_with_gt == 0 {
            return Err(MetricsError::NoGroundTruth);
        }
        per_threshold.push((t, ap_sum / classes_with_gt as f64));
    }
    let aggregate =
        per_threshold.iter().map(|(_, m)| m).sum::<f64>() / per_threshold.len() as f64;
    Ok(DetectionSummary { per_threshold, aggregate, skipped_classes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveKind {
    Precision,
    F1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceCurve {
    /// (confidence threshold, metric value), thresholds strictly increasing.
    pub points: Vec<(f64, f64)>,
    pub kind: CurveKind,
    /// F1-optimal operating point over every distinct detection confidence,
    /// ties broken toward the lowest threshold. Present for `kind == F1`.
    pub optimal: Option<(f64, f64)>,
}

fn prf_at(flagged: &[FlaggedDetection], total_gt: usize, threshold: f64) -> (f64, f64, f64) {
    let (mut tp, mut fp) = (0u64, 0u64);
    for f in flagged {
        if f.detection.confidence >= threshold {
            match f.flag {
                MatchFlag::TruePositive => tp += 1,
                MatchFlag::FalsePositive => fp += 1,
            }
        }
    }
    // empty selection: precision 1.0 by convention so the curve stays total
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = tp as f64 / total_gt as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Precision- or F1-vs-confidence curve over `grid`, plus the exact
/// F1-optimal threshold computed by sweeping every distinct confidence.
pub fn confidence_curves(
    flagged: &[FlaggedDetection],
    total_gt: usize,
    kind: CurveKind,
    grid: &[f64],
) -> Result<ConfidenceCurve, MetricsError> {
    if grid.is_empty() {
        return Err(MetricsError::EmptyGrid);
    }
    debug_assert!(grid.windows(2).all(|w| w[0] < w[1]));
    let points: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| {
            let (p, _, f1) = prf_at(flagged, total_gt, t);
            (t, match kind {
                CurveKind::Precision => p,
                CurveKind::F1 => f1,
            })
        })
        .collect();

    let optimal = match kind {
        CurveKind::Precision => None,
        CurveKind::F1 => {
            let mut candidates: Vec<f64> =
                flagged.iter().map(|f| f.detection.confidence).collect();
            candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
            candidates.dedup();
            let mut best: Option<(f64, f64)> = None;
            for &t in &candidates {
                let (_, _, f1) = prf_at(flagged, total_gt, t);
                if best.is_none_or(|(_, bf)| f1 > bf) {
                    best = Some((t, f1));
                }
            }
            best
        }
    };
    Ok(ConfidenceCurve { points, kind, optimal })
}

/// PR curve for one class over a ranked dataset-wide sequence.
pub fn pr_curve(
    flagged: &[FlaggedDetection],
    total_gt: usize,
    iou_threshold: f64,
    class_id: usize,
) -> PRCurve {
    PRCurve { points: operating_points(flagged, total_gt), iou_threshold, class_id }
}
