//! Service and CLI layer over the analysis engine.

pub mod config;
pub mod evaluate;
pub mod service;
pub mod stats;
