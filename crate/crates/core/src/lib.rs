//! Time-series parameter exploration: build a uniform frame from raw sensor
//! readings, search horizon/interval/input-length configurations, and estimate
//! configurations for horizons that were never explored.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod explorer;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod windowing;

pub use error::{Error, Result};
