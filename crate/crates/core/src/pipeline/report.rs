//! Canonical JSON form of the pipeline report (schema_version "1").
//!
//! All floats in a report are pre-rounded to 6 decimals at assembly, so
//! serialize -> parse -> serialize reproduces identical bytes and key order
//! is fixed by struct field order (maps are sorted by key).

use super::PipelineReport;

pub fn report_to_json(report: &PipelineReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail")
}

pub fn report_from_json(text: &str) -> Result<PipelineReport, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{PipelineReport, StageTiming};

    fn empty_report() -> PipelineReport {
        PipelineReport {
            schema_version: "1".into(),
            image_id: "img".into(),
            image_width: 640,
            image_height: 480,
            count: 0,
            stages: vec![StageTiming { name: "detect".into(), wall_ms: 1.25 }],
            total_ms: 2.5,
            backends: vec![],
            findings: vec![],
        }
    }

    #[test]
    fn empty_findings_serialization() {
        let text = report_to_json(&empty_report());
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["count"], 0);
        assert_eq!(value["findings"], serde_json::json!([]));
        assert_eq!(value["schema_version"], "1");
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = report_to_json(&empty_report());
        let parsed = report_from_json(&text).unwrap();
        assert_eq!(report_to_json(&parsed), text);
    }
}
