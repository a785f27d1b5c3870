//! `evaluate` subcommand: metric reports for the three tasks from files on
//! disk.
//!
//! Input shapes:
//! - classification: truth JSON `{ "labels": [..], "truth": [..] }`, pred
//!   JSON `{ "pred": [..], "scores": [{label: prob, ..}, ..]? }` (names).
//! - detection: truth is COCO JSON (`--format coco`), a YOLO dataset root
//!   with `labels/`, `images/`, `names.txt` (`--format yolo`); predictions
//!   are a detections JSON array, or with `--format report` a directory of
//!   pipeline report JSON files.
//! - segmentation: pred and truth are directories of same-named PNG index
//!   masks.

use std::collections::BTreeMap;
use std::path::Path;

use orchard_core::backends::ClassDistribution;
use orchard_core::dataset::{disease_labels, parse_coco, parse_yolo, AnnotatedImage, LabelSet};
use orchard_core::geometry::{BBox, Detection};
use orchard_core::metrics::{
    aggregate_seg, classification_report, confidence_curves, confusion_matrix, map_at,
    match_detections, seg_report, AggregateMode, CurveKind, Interpolation, COCO_IOU_THRESHOLDS,
};
use serde::Deserialize;
use serde_json::json;

pub fn read_to_string(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("FileRead: {}: {e}", path.display()))
}

#[derive(Deserialize)]
struct ClassificationTruth {
    labels: Vec<String>,
    truth: Vec<String>,
}

#[derive(Deserialize)]
struct ClassificationPred {
    pred: Vec<String>,
    #[serde(default)]
    scores: Option<Vec<BTreeMap<String, f64>>>,
}

pub fn evaluate_classification(truth_path: &Path, pred_path: &Path) -> Result<String, String> {
    let truth: ClassificationTruth =
        serde_json::from_str(&read_to_string(truth_path)?).map_err(|e| format!("TruthParse: {e}"))?;
    let pred: ClassificationPred =
        serde_json::from_str(&read_to_string(pred_path)?).map_err(|e| format!("PredParse: {e}"))?;

    let labels = LabelSet::new(truth.labels.clone());
    let to_idx = |name: &str| {
        labels
            .index_of(name)
            .ok_or_else(|| format!("UnknownLabel: {name}"))
    };
    let truth_idx: Vec<usize> = truth.truth.iter().map(|n| to_idx(n)).collect::<Result<_, _>>()?;
    let pred_idx: Vec<usize> = pred.pred.iter().map(|n| to_idx(n)).collect::<Result<_, _>>()?;

    let cm = confusion_matrix(&truth_idx, &pred_idx, &labels).map_err(|e| e.to_string())?;

    let score_dists: Option<Vec<ClassDistribution>> = pred.scores.map(|rows| {
        rows.iter()
            .map(|row| ClassDistribution {
                labels: labels.clone(),
                probs: labels.names().iter().map(|n| *row.get(n).unwrap_or(&0.0)).collect(),
            })
            .collect()
    });
    let report = classification_report(
        &cm,
        score_dists.as_ref().map(|d| (d.as_slice(), truth_idx.as_slice())),
    )
    .map_err(|e| e.to_string())?;

    let matrix: Vec<Vec<u64>> = cm.counts().to_vec();
    serde_json::to_string_pretty(&json!({
        "task": "classification",
        "confusion_matrix": { "labels": labels.names(), "counts": matrix },
        "report": report,
    }))
    .map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct WirePrediction {
    image_id: String,
    bbox_xyxy: [f64; 4],
    confidence: f64,
    class_id: usize,
}

fn load_truth_detection(truth_path: &Path, format: &str) -> Result<Vec<AnnotatedImage>, String> {
    match format {
        "coco" | "report" => {
            let (images, _) = parse_coco(&read_to_string(truth_path)?).map_err(|e| e.to_string())?;
            Ok(images)
        }
        "yolo" => {
            let names_text = read_to_string(&truth_path.join("names.txt"))?;
            let names =
                LabelSet::new(names_text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect());
            parse_yolo(&truth_path.join("labels"), &truth_path.join("images"), &names)
                .map_err(|e| e.to_string())
        }
        other => Err(format!("UnknownFormat: {other}")),
    }
}

fn load_predictions(pred_path: &Path, format: &str) -> Result<Vec<WirePrediction>, String> {
    if format == "report" {
        // a directory of pipeline report JSON files
        let mut out = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(pred_path)
            .map_err(|e| format!("PredRead: {}: {e}", pred_path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let report = orchard_core::pipeline::report_from_json(&read_to_string(&path)?)
                .map_err(|e| format!("ReportParse: {}: {e}", path.display()))?;
            for finding in &report.findings {
                out.push(WirePrediction {
                    image_id: report.image_id.clone(),
                    bbox_xyxy: finding.bbox_xyxy,
                    confidence: finding.det_confidence,
                    class_id: 0,
                });
            }
        }
        Ok(out)
    } else {
        serde_json::from_str(&read_to_string(pred_path)?).map_err(|e| format!("PredParse: {e}"))
    }
}

pub fn evaluate_detection(
    truth_path: &Path,
    pred_path: &Path,
    format: &str,
    curves_dir: Option<&Path>,
) -> Result<String, String> {
    let truth = load_truth_detection(truth_path, format)?;
    let predictions = load_predictions(pred_path, format)?;

    let mut dets_per_image: Vec<Vec<Detection>> = vec![Vec::new(); truth.len()];
    let gts_per_image: Vec<Vec<(BBox, usize)>> = truth.iter().map(|t| t.boxes.clone()).collect();
    for p in &predictions {
        let Some(idx) = truth.iter().position(|t| t.image_id == p.image_id) else {
            return Err(format!("UnknownImageRef: prediction for absent image {}", p.image_id));
        };
        let [x0, y0, x1, y1] = p.bbox_xyxy;
        dets_per_image[idx].push(Detection {
            bbox: BBox::new(x0, y0, x1, y1),
            confidence: p.confidence,
            class_id: p.class_id,
        });
    }

    let map50 = map_at(&dets_per_image, &gts_per_image, &[0.5], Interpolation::Point101)
        .map_err(|e| e.to_string())?;
    let map5095 = map_at(
        &dets_per_image,
        &gts_per_image,
        &COCO_IOU_THRESHOLDS,
        Interpolation::Point101,
    )
    .map_err(|e| e.to_string())?;

    // dataset-wide ranked TP/FP sequence at IoU 0.5 for curves
    let mut flagged = Vec::new();
    let mut total_gt = 0usize;
    for (dets, gts) in dets_per_image.iter().zip(&gts_per_image) {
        let (f, _) = match_detections(dets, gts, 0.5);
        flagged.extend(f);
        total_gt += gts.len();
    }
    flagged.sort_by(|a, b| {
        b.detection
            .confidence
            .partial_cmp(&a.detection.confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if total_gt == 0 {
        return Err("NoGroundTruth".into());
    }
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let f1_curve = confidence_curves(&flagged, total_gt, CurveKind::F1, &grid)
        .map_err(|e| e.to_string())?;
    let p_curve = confidence_curves(&flagged, total_gt, CurveKind::Precision, &grid)
        .map_err(|e| e.to_string())?;

    if let Some(dir) = curves_dir {
        std::fs::create_dir_all(dir).map_err(|e| format!("CurvesDir: {e}"))?;
        let csv = |points: &[(f64, f64)], header: &str| {
            let mut text = String::from(header);
            for (x, y) in points {
                text.push_str(&format!("{x},{y}\n"));
            }
            text
        };
        std::fs::write(dir.join("f1_confidence.csv"), csv(&f1_curve.points, "confidence,f1\n"))
            .map_err(|e| e.to_string())?;
        std::fs::write(
            dir.join("precision_confidence.csv"),
            csv(&p_curve.points, "confidence,precision\n"),
        )
        .map_err(|e| e.to_string())?;
        let pr = orchard_core::metrics::pr_curve(&flagged, total_gt, 0.5, 0);
        std::fs::write(dir.join("pr_curve.csv"), csv(&pr.points, "recall,precision\n"))
            .map_err(|e| e.to_string())?;
    }

    let (optimal_threshold, optimal_f1) = f1_curve.optimal.unwrap_or((0.0, 0.0));
    serde_json::to_string_pretty(&json!({
        "task": "detection",
        "map50": map50.aggregate,
        "map50_95": map5095.aggregate,
        "per_threshold": map5095.per_threshold,
        "optimal_confidence_threshold": optimal_threshold,
        "f1_at_optimum": optimal_f1,
        "total_ground_truth": total_gt,
    }))
    .map_err(|e| e.to_string())
}

pub fn evaluate_segmentation(truth_dir: &Path, pred_dir: &Path) -> Result<String, String> {
    let labels = disease_labels();
    let mut names: Vec<_> = std::fs::read_dir(truth_dir)
        .map_err(|e| format!("TruthRead: {}: {e}", truth_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err("EmptyList: no truth masks".into());
    }
    let mut reports = Vec::new();
    for truth_path in &names {
        let file_name = truth_path.file_name().unwrap();
        let pred_path = pred_dir.join(file_name);
        let load = |p: &Path| -> Result<orchard_core::backends::MaskMap, String> {
            let img = image::open(p)
                .map_err(|e| format!("MaskRead: {}: {e}", p.display()))?
                .into_luma8();
            Ok(orchard_core::backends::MaskMap {
                width: img.width(),
                height: img.height(),
                data: img.into_raw(),
                labels: labels.clone(),
            })
        };
        let truth = load(truth_path)?;
        let pred = load(&pred_path)?;
        reports.push(seg_report(&pred, &truth, &labels).map_err(|e| e.to_string())?);
    }
    let micro = aggregate_seg(&reports, AggregateMode::Micro).map_err(|e| e.to_string())?;
    let macro_ = aggregate_seg(&reports, AggregateMode::Macro).map_err(|e| e.to_string())?;
    serde_json::to_string_pretty(&json!({
        "task": "segmentation",
        "images": reports.len(),
        "micro": micro,
        "macro": macro_,
    }))
    .map_err(|e| e.to_string())
}
