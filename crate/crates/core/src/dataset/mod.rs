//! Annotation ingestion (COCO JSON, YOLO label dirs) and deterministic
//! dataset splitting / k-fold partitioning.
//!
//! Shuffling keys on a stable hash of `image_id` mixed with the seed, not on
//! list position, so a split is reproducible no matter what order the
//! filesystem enumerated the images in.

mod coco;
mod yolo;

pub use coco::{parse_coco, serialize_coco};
pub use yolo::parse_yolo;

use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("MalformedAnnotation: {0}")]
    MalformedAnnotation(String),
    #[error("UnknownImageRef: annotation references absent image id {0}")]
    UnknownImageRef(String),
    #[error("ClassOutOfRange: class {class_id} with {label_count} labels ({context})")]
    ClassOutOfRange { class_id: usize, label_count: usize, context: String },
    #[error("InvalidNormalizedCoord: {value} outside [0,1] in {context}")]
    InvalidNormalizedCoord { value: f64, context: String },
    #[error("OrphanLabelFile: no paired image for {0}")]
    OrphanLabelFile(PathBuf),
    #[error("EmptyDataset")]
    EmptyDataset,
    #[error("InvalidK: k = {k} with {n} images")]
    InvalidK { k: usize, n: usize },
    #[error("InvalidSplitSpec: percentages {0}:{1}:{2} do not sum to 100")]
    InvalidSplitSpec(u32, u32, u32),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// One labeled image, for any of the three tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image_id: String,
    pub file_path: PathBuf,
    pub width: u32,
    pub height: u32,
    /// Detection ground truth, canonical corner form.
    pub boxes: Vec<(BBox, usize)>,
    /// Classification ground truth.
    pub class_label: Option<usize>,
    /// Segmentation ground truth: a single-channel index raster.
    pub mask_path: Option<PathBuf>,
}

/// Ordered class names. Index 0 is background for segmentation label sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Self {
        debug_assert!(names.iter().all(|n| !n.is_empty()));
        Self { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// The five species labels used throughout the demos and fixtures.
pub fn species_labels() -> LabelSet {
    LabelSet::new(
        ["Tangerine", "Navel", "Blood Oranges", "Bergamout", "Tangelo"]
            .map(String::from)
            .to_vec(),
    )
}

/// Disease labels with background at index 0, for segmentation masks.
pub fn disease_labels() -> LabelSet {
    LabelSet::new(
        [
            "background",
            "Citrus cranker",
            "Black spots",
            "Sooty mould",
            "Blue-green mould",
            "Citrus greening",
        ]
        .map(String::from)
        .to_vec(),
    )
}

/// Train/test/validation ratio plus shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_pct: u32,
    pub test_pct: u32,
    pub val_pct: u32,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_pct: u32, test_pct: u32, val_pct: u32, seed: u64) -> Result<Self, DatasetError> {
        if train_pct + test_pct + val_pct != 100 {
            return Err(DatasetError::InvalidSplitSpec(train_pct, test_pct, val_pct));
        }
        Ok(Self { train_pct, test_pct, val_pct, seed })
    }
}

// FNV-1a over the image id, then splitmix64 finalization with the seed.
// Stable across platforms and rust versions, unlike DefaultHasher.
fn shuffle_key(image_id: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in image_id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn shuffled(dataset: &[AnnotatedImage], seed: u64) -> Vec<AnnotatedImage> {
    let mut items: Vec<&AnnotatedImage> = dataset.iter().collect();
    items.sort_by(|a, b| {
        shuffle_key(&a.image_id, seed)
            .cmp(&shuffle_key(&b.image_id, seed))
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
    items.into_iter().cloned().collect()
}

fn round_half_up(n: usize, pct: u32) -> usize {
    (n * pct as usize * 2 + 100) / 200
}

/// Seeded shuffle then partition: |train| and |test| by round-half-up,
/// the remainder to validation.
pub fn split(
    dataset: &[AnnotatedImage],
    spec: &SplitSpec,
) -> Result<(Vec<AnnotatedImage>, Vec<AnnotatedImage>, Vec<AnnotatedImage>), DatasetError> {
    if dataset.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let n = dataset.len();
    let n_train = round_half_up(n, spec.train_pct);
    let n_test = round_half_up(n, spec.test_pct);
    let mut items = shuffled(dataset, spec.seed);
    let rest = items.split_off(n_train);
    let (test, val) = {
        let mut rest = rest;
        let val = rest.split_off(n_test.min(rest.len()));
        (rest, val)
    };
    Ok((items, test, val))
}

/// Seeded shuffle then k contiguous folds with sizes differing by at most 1.
/// Pair `i` holds (all folds but `i`, fold `i`).
pub fn kfold(
    dataset: &[AnnotatedImage],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<AnnotatedImage>, Vec<AnnotatedImage>)>, DatasetError> {
    let n = dataset.len();
    if k < 2 || k > n {
        return Err(DatasetError::InvalidK { k, n });
    }
    let items = shuffled(dataset, seed);
    let base = n / k;
    let extra = n % k;
    let mut folds: Vec<Vec<AnnotatedImage>> = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(items[at..at + size].to_vec());
        at += size;
    }
    Ok((0..k)
        .map(|i| {
            let train = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, f)| f.iter().cloned())
                .collect();
            (train, folds[i].clone())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn synthetic_dataset(n: usize) -> Vec<AnnotatedImage> {
        (0..n)
            .map(|i| AnnotatedImage {
                image_id: format!("img_{i:04}"),
                file_path: PathBuf::from(format!("images/img_{i:04}.png")),
                width: 640,
                height: 480,
                boxes: vec![],
                class_label: Some(i % 5),
                mask_path: None,
            })
            .collect()
    }

    #[test]
    fn split_100_gives_80_15_5() {
        let ds = synthetic_dataset(100);
        let spec = SplitSpec::new(80, 15, 5, 42).unwrap();
        let (train, test, val) = split(&ds, &spec).unwrap();
        assert_eq!((train.len(), test.len(), val.len()), (80, 15, 5));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = synthetic_dataset(37);
        let spec = SplitSpec::new(80, 15, 5, 7).unwrap();
        let a = split(&ds, &spec).unwrap();
        let b = split(&ds, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_three_images_rounding() {
        let ds = synthetic_dataset(3);
        let spec = SplitSpec::new(80, 15, 5, 0).unwrap();
        let (train, test, val) = split(&ds, &spec).unwrap();
        assert_eq!((train.len(), test.len(), val.len()), (2, 0, 1));
        let mut all: Vec<_> = train.iter().chain(&test).chain(&val).map(|i| &i.image_id).collect();
        all.sort();
        assert_eq!(all.len(), 3);
        all.dedup();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn split_invariant_to_input_order() {
        let mut ds = synthetic_dataset(20);
        let spec = SplitSpec::new(80, 15, 5, 3).unwrap();
        let a = split(&ds, &spec).unwrap();
        ds.reverse();
        let b = split(&ds, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_empty_dataset_errors() {
        let spec = SplitSpec::new(80, 15, 5, 0).unwrap();
        assert!(matches!(split(&[], &spec), Err(DatasetError::EmptyDataset)));
    }

    #[test]
    fn split_spec_must_sum_to_100() {
        assert!(SplitSpec::new(80, 15, 10, 0).is_err());
    }

    #[test]
    fn kfold_10_by_5() {
        let ds = synthetic_dataset(10);
        let folds = kfold(&ds, 5, 11).unwrap();
        assert_eq!(folds.len(), 5);
        for (train, val) in &folds {
            assert_eq!(val.len(), 2);
            assert_eq!(train.len(), 8);
        }
    }

    #[test]
    fn kfold_rejects_k_of_one() {
        let ds = synthetic_dataset(10);
        assert!(matches!(kfold(&ds, 1, 0), Err(DatasetError::InvalidK { .. })));
    }

    #[test]
    fn kfold_validation_parts_partition_dataset() {
        for n in [10usize, 47, 245] {
            let ds = synthetic_dataset(n);
            let folds = kfold(&ds, 5, 99).unwrap();
            let mut seen: Vec<&str> = folds
                .iter()
                .flat_map(|(_, val)| val.iter().map(|i| i.image_id.as_str()))
                .collect();
            seen.sort();
            assert_eq!(seen.len(), n);
            seen.dedup();
            assert_eq!(seen.len(), n, "n = {n}");
            for (train, val) in &folds {
                assert_eq!(train.len(), n - val.len());
                assert!((val.len() as i64 - (n / 5) as i64).abs() <= 1);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_partitions_exactly(n in 1usize..120, seed in any::<u64>()) {
                let ds = synthetic_dataset(n);
                let spec = SplitSpec::new(80, 15, 5, seed).unwrap();
                let (train, test, val) = split(&ds, &spec).unwrap();
                prop_assert_eq!(train.len(), round_half_up(n, 80));
                prop_assert_eq!(train.len() + test.len() + val.len(), n);
                let mut ids: Vec<_> = train.iter().chain(&test).chain(&val)
                    .map(|i| i.image_id.clone()).collect();
                ids.sort();
                ids.dedup();
                prop_assert_eq!(ids.len(), n);
            }
        }
    }
}
