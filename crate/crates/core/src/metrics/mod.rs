//! The evaluation metric suite: classification (confusion matrix, P/R/F1,
//! ROC AUC), detection (greedy matching, AP, mAP, confidence curves), and
//! segmentation (IoU, pixel accuracy). Everything here is deterministic pure
//! computation over immutable inputs.

mod classification;
mod detection;
mod segmentation;

pub use classification::{
    classification_report, confusion_matrix, roc_auc_ovr, AucWeighting, ClassificationReport,
    ConfusionMatrix, PerClassMetrics,
};
pub use detection::{
    average_precision, confidence_curves, map_at, match_detections, pr_curve, ConfidenceCurve,
    CurveKind, DetectionSummary, FlaggedDetection, Interpolation, MatchFlag, PRCurve,
    COCO_IOU_THRESHOLDS,
};
pub use segmentation::{aggregate_seg, seg_report, AggregateMode, SegReport};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("LengthMismatch: truth has {truth} samples, predictions have {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("UnknownLabel: index {0} outside the label set")]
    UnknownLabel(usize),
    #[error("DegenerateClass: class {0} has no positives or no negatives")]
    DegenerateClass(usize),
    #[error("NoGroundTruth: no ground-truth instances")]
    NoGroundTruth,
    #[error("EmptyGrid")]
    EmptyGrid,
    #[error("EmptyList")]
    EmptyList,
    #[error("ShapeMismatch: prediction {pred:?} vs truth {truth:?}")]
    ShapeMismatch { pred: (u32, u32), truth: (u32, u32) },
    #[error("InvalidDistribution: probabilities sum to {0}")]
    InvalidDistribution(f64),
}
