//! Tracking, label aggregation and evaluation for catch composition from
//! conveyor-belt video.
//!
//! Detections come in per frame (see [`io::detections`]); [`tracker`] turns
//! them into one track per fish, [`aggregate`] assigns each track a species
//! and [`compose`] turns labelled tracks into percentages. [`stats`] holds the
//! evaluation metrics and [`sim`] a seeded belt simulator used for testing.

pub mod aggregate;
pub mod compose;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod io;
pub mod motion;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod taxonomy;
pub mod tracker;

pub use error::{Error, Result};
