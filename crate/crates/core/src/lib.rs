//! Orange-analysis engine: detection post-processing, annotation ingestion,
//! deterministic dataset splitting, the full evaluation metric suite, model
//! backend contracts, and the detect/classify/segment pipeline with timed
//! JSON reporting.

pub mod backends;
pub mod dataset;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use geometry::{BBox, Detection};
