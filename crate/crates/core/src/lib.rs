//! Rupture detection and under-reporting estimation for weekly surveillance
//! series.
//!
//! The crate compares recent weekly counts against a seasonal-inertia
//! baseline (an exponential moving average over the same week of previous
//! seasons), treats the excess as novelty, and relates it to the counts that
//! were actually attributed to the new phenomenon.

pub mod detect;
pub mod error;
pub mod ingest;
pub mod novelty;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod timeseries;

pub use error::{Error, Result};
