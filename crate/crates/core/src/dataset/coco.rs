//! Minimal COCO JSON subset: images (id/file_name/width/height),
//! annotations (id/image_id/category_id/bbox), categories (id/name).
//! Unknown fields are ignored on parse and never round-tripped.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnnotatedImage, DatasetError, LabelSet};
use crate::geometry::BBox;

#[derive(Debug, Deserialize)]
struct CocoDoc {
    images: Vec<CocoImage>,
    annotations: Vec<Value>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: i64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoCategory {
    id: i64,
    name: String,
}

#[derive(Debug, Serialize)]
struct CocoAnnotation {
    id: i64,
    image_id: i64,
    category_id: i64,
    bbox: [f64; 4],
}

fn ann_field<'a>(ann: &'a Value, key: &str) -> Result<&'a Value, DatasetError> {
    ann.get(key)
        .ok_or_else(|| DatasetError::MalformedAnnotation(format!("annotation missing \"{key}\"")))
}

fn ann_i64(ann: &Value, key: &str) -> Result<i64, DatasetError> {
    ann_field(ann, key)?
        .as_i64()
        .ok_or_else(|| DatasetError::MalformedAnnotation(format!("\"{key}\" is not an integer")))
}

/// Parses a COCO document into annotated images plus the label set.
///
/// Category ids are remapped to a dense 0-based index ordered by the original
/// id. Images without annotations come back with empty box lists. Boxes are
/// converted from COCO xywh to canonical corner form.
pub fn parse_coco(document: &str) -> Result<(Vec<AnnotatedImage>, LabelSet), DatasetError> {
    let doc: CocoDoc = serde_json::from_str(document)
        .map_err(|e| DatasetError::MalformedAnnotation(e.to_string()))?;

    let mut categories = doc.categories;
    categories.sort_by_key(|c| c.id);
    let cat_index: HashMap<i64, usize> =
        categories.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let labels = LabelSet::new(categories.iter().map(|c| c.name.clone()).collect());

    let mut images: Vec<AnnotatedImage> = doc
        .images
        .iter()
        .map(|im| AnnotatedImage {
            image_id: im.id.to_string(),
            file_path: PathBuf::from(&im.file_name),
            width: im.width,
            height: im.height,
            boxes: vec![],
            class_label: None,
            mask_path: None,
        })
        .collect();
    let image_index: HashMap<i64, usize> =
        doc.images.iter().enumerate().map(|(i, im)| (im.id, i)).collect();

    for ann in &doc.annotations {
        let image_id = ann_i64(ann, "image_id")?;
        let category_id = ann_i64(ann, "category_id")?;
        let bbox_val = ann_field(ann, "bbox")?;
        let bbox_arr = bbox_val
            .as_array()
            .filter(|a| a.len() == 4)
            .ok_or_else(|| {
                DatasetError::MalformedAnnotation("\"bbox\" is not a 4-element array".into())
            })?;
        let mut xywh = [0.0f64; 4];
        for (slot, v) in xywh.iter_mut().zip(bbox_arr) {
            *slot = v.as_f64().ok_or_else(|| {
                DatasetError::MalformedAnnotation("\"bbox\" element is not a number".into())
            })?;
        }
        if xywh[2] < 0.0 || xywh[3] < 0.0 {
            return Err(DatasetError::MalformedAnnotation(format!(
                "negative bbox size {:?}",
                &xywh[2..]
            )));
        }
        let class_id = *cat_index.get(&category_id).ok_or_else(|| {
            DatasetError::MalformedAnnotation(format!("unknown category id {category_id}"))
        })?;
        let img_slot = *image_index
            .get(&image_id)
            .ok_or_else(|| DatasetError::UnknownImageRef(image_id.to_string()))?;
        let bbox = BBox::new(xywh[0], xywh[1], xywh[0] + xywh[2], xywh[1] + xywh[3]);
        images[img_slot].boxes.push((bbox, class_id));
    }

    Ok((images, labels))
}

/// Serializes back to the same minimal COCO subset; `parse_coco` of the
/// output reproduces the input dataset field by field.
pub fn serialize_coco(images: &[AnnotatedImage], labels: &LabelSet) -> String {
    let coco_images: Vec<CocoImage> = images
        .iter()
        .map(|im| CocoImage {
            id: im.image_id.parse().unwrap_or_else(|_| stable_id(&im.image_id)),
            file_name: im.file_path.to_string_lossy().into_owned(),
            width: im.width,
            height: im.height,
        })
        .collect();
    let mut annotations = Vec::new();
    let mut next_ann_id = 1i64;
    for (im, coco_im) in images.iter().zip(&coco_images) {
        for (bbox, class_id) in &im.boxes {
            annotations.push(CocoAnnotation {
                id: next_ann_id,
                image_id: coco_im.id,
                category_id: *class_id as i64,
                bbox: [bbox.x_min, bbox.y_min, bbox.width(), bbox.height()],
            });
            next_ann_id += 1;
        }
    }
    let categories: Vec<CocoCategory> = labels
        .names()
        .iter()
        .enumerate()
        .map(|(i, name)| CocoCategory { id: i as i64, name: name.clone() })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "images": coco_images,
        "annotations": annotations,
        "categories": categories,
    }))
    .expect("coco serialization cannot fail")
}

fn stable_id(image_id: &str) -> i64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in image_id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (h & 0x7fff_ffff_ffff_ffff) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{
        "images": [{"id": 1, "file_name": "a.png", "width": 640, "height": 480}],
        "annotations": [{"id": 1, "image_id": 1, "category_id": 3, "bbox": [10, 20, 30, 40]}],
        "categories": [{"id": 3, "name": "orange"}]
    }"#;

    #[test]
    fn parse_single_annotation() {
        let (images, labels) = parse_coco(FIXTURE).unwrap();
        assert_eq!(images.len(), 1);
        assert_eq!(labels.names(), ["orange".to_string()]);
        let (bbox, class_id) = images[0].boxes[0];
        assert_eq!(bbox, BBox::new(10.0, 20.0, 40.0, 60.0));
        assert_eq!(class_id, 0);
    }

    #[test]
    fn image_without_annotations_keeps_empty_boxes() {
        let doc = r#"{
            "images": [{"id": 7, "file_name": "b.png", "width": 100, "height": 100}],
            "annotations": [],
            "categories": [{"id": 1, "name": "orange"}]
        }"#;
        let (images, _) = parse_coco(doc).unwrap();
        assert_eq!(images.len(), 1);
        assert!(images[0].boxes.is_empty());
    }

    #[test]
    fn short_bbox_is_malformed() {
        let doc = FIXTURE.replace("[10, 20, 30, 40]", "[10, 20, 30]");
        assert!(matches!(parse_coco(&doc), Err(DatasetError::MalformedAnnotation(_))));
    }

    #[test]
    fn negative_bbox_size_is_malformed() {
        let doc = FIXTURE.replace("[10, 20, 30, 40]", "[10, 20, -30, 40]");
        assert!(matches!(parse_coco(&doc), Err(DatasetError::MalformedAnnotation(_))));
    }

    #[test]
    fn annotation_for_absent_image_is_rejected() {
        let doc = FIXTURE.replace("\"image_id\": 1", "\"image_id\": 99");
        assert!(matches!(parse_coco(&doc), Err(DatasetError::UnknownImageRef(_))));
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let doc = FIXTURE.replace(
            "\"id\": 1, \"image_id\": 1",
            "\"id\": 1, \"image_id\": 1, \"iscrowd\": 0, \"area\": 1200",
        );
        assert!(parse_coco(&doc).is_ok());
    }

    #[test]
    fn parse_serialize_parse_is_fixed_point() {
        let (images, labels) = parse_coco(FIXTURE).unwrap();
        let text = serialize_coco(&images, &labels);
        let (images2, labels2) = parse_coco(&text).unwrap();
        assert_eq!(images, images2);
        assert_eq!(labels, labels2);
        // and the serialized form itself is stable
        assert_eq!(text, serialize_coco(&images2, &labels2));
    }
}
