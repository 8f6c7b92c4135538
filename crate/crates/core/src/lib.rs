//! Calibrated recommendation with structure analysis of genre distributions.
//!
//! The pipeline turns ratings into three per-user genre distributions
//! (preferences, candidate items, calibrated lists), groups users in each of
//! them with clustering and outlier-detection models, and measures how much
//! the groups hold together (silhouette) and shift between stages (Jaccard),
//! next to the usual ranking metrics.

pub mod calibrate;
pub mod distribution;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod orchestrator;
pub mod recommender;
pub mod seed;
pub mod structure;
pub mod synthetic;

pub use error::{Error, Result};
