//! YOLO label directory parser: one `.txt` per image with lines
//! `class cx cy w h`, coordinates normalized to [0,1]. Image dimensions come
//! from the paired image file in `images_dir`.

use std::path::{Path, PathBuf};

use super::{AnnotatedImage, DatasetError, LabelSet};
use crate::geometry::{convert, BoxFormat};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

fn paired_image(images_dir: &Path, stem: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| images_dir.join(format!("{stem}.{ext}")))
        .find(|p| p.exists())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Parses every `.txt` label file under `labels_dir`, resolving each against
/// its same-stem image in `images_dir`. Output is sorted by image id (the
/// file stem) so the result does not depend on directory enumeration order.
pub fn parse_yolo(
    labels_dir: &Path,
    images_dir: &Path,
    names: &LabelSet,
) -> Result<Vec<AnnotatedImage>, DatasetError> {
    let mut label_files: Vec<PathBuf> = std::fs::read_dir(labels_dir)
        .map_err(io_err(labels_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    label_files.sort();

    let mut out = Vec::with_capacity(label_files.len());
    for label_path in &label_files {
        let stem = label_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| DatasetError::OrphanLabelFile(label_path.clone()))?;
        let image_path = paired_image(images_dir, stem)
            .ok_or_else(|| DatasetError::OrphanLabelFile(label_path.clone()))?;
        let (width, height) = image::image_dimensions(&image_path)
            .map_err(|e| DatasetError::MalformedAnnotation(format!("{}: {e}", image_path.display())))?;

        let text = std::fs::read_to_string(label_path).map_err(io_err(label_path.as_path()))?;
        let mut boxes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let context = format!("{}:{}", label_path.display(), lineno + 1);
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(DatasetError::MalformedAnnotation(format!(
                    "{context}: expected 5 fields, got {}",
                    fields.len()
                )));
            }
            let class_id: usize = fields[0].parse().map_err(|_| {
                DatasetError::MalformedAnnotation(format!("{context}: bad class id"))
            })?;
            if class_id >= names.len() {
                return Err(DatasetError::ClassOutOfRange {
                    class_id,
                    label_count: names.len(),
                    context,
                });
            }
            let mut coords = [0.0f64; 4];
            for (slot, f) in coords.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| {
                    DatasetError::MalformedAnnotation(format!("{context}: bad coordinate"))
                })?;
                if !(0.0..=1.0).contains(slot) {
                    return Err(DatasetError::InvalidNormalizedCoord { value: *slot, context });
                }
            }
            let corner = convert(coords, BoxFormat::YoloNormCxcywh, BoxFormat::CornerXyxy, (width, height))
                .map_err(|e| DatasetError::MalformedAnnotation(format!("{context}: {e}")))?;
            boxes.push((
                crate::geometry::BBox::new(corner[0], corner[1], corner[2], corner[3]),
                class_id,
            ));
        }
        out.push(AnnotatedImage {
            image_id: stem.to_string(),
            file_path: image_path,
            width,
            height,
            boxes,
            class_label: None,
            mask_path: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::species_labels;
    use crate::geometry::BBox;

    fn write_blank_image(path: &Path, w: u32, h: u32) {
        image::RgbImage::new(w, h).save(path).unwrap();
    }

    fn setup(label_text: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let labels = dir.path().join("labels");
        let images = dir.path().join("images");
        std::fs::create_dir_all(&labels).unwrap();
        std::fs::create_dir_all(&images).unwrap();
        std::fs::write(labels.join("a.txt"), label_text).unwrap();
        write_blank_image(&images.join("a.png"), 640, 480);
        (dir, labels, images)
    }

    #[test]
    fn parses_center_form_line() {
        let (_d, labels, images) = setup("0 0.5 0.5 0.2 0.2\n");
        let ds = parse_yolo(&labels, &images, &species_labels()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].boxes, vec![(BBox::new(256.0, 192.0, 384.0, 288.0), 0)]);
    }

    #[test]
    fn empty_label_file_yields_zero_boxes() {
        let (_d, labels, images) = setup("");
        let ds = parse_yolo(&labels, &images, &species_labels()).unwrap();
        assert_eq!(ds.len(), 1);
        assert!(ds[0].boxes.is_empty());
    }

    #[test]
    fn class_out_of_range_is_rejected() {
        let (_d, labels, images) = setup("7 0.5 0.5 0.2 0.2\n");
        let err = parse_yolo(&labels, &images, &species_labels());
        assert!(matches!(err, Err(DatasetError::ClassOutOfRange { class_id: 7, .. })));
    }

    #[test]
    fn out_of_range_coordinate_is_rejected() {
        let (_d, labels, images) = setup("0 1.5 0.5 0.2 0.2\n");
        let err = parse_yolo(&labels, &images, &species_labels());
        assert!(matches!(err, Err(DatasetError::InvalidNormalizedCoord { .. })));
    }

    #[test]
    fn orphan_label_file_is_rejected() {
        let (_d, labels, images) = setup("0 0.5 0.5 0.2 0.2\n");
        std::fs::write(labels.join("orphan.txt"), "0 0.5 0.5 0.2 0.2\n").unwrap();
        let err = parse_yolo(&labels, &images, &species_labels());
        assert!(matches!(err, Err(DatasetError::OrphanLabelFile(_))));
    }
}
