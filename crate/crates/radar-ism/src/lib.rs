//! File formats, dataset generation and batch commands around
//! [`radar_ism_core`].

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod detections;
pub mod error;
pub mod gridfile;
pub mod parallel;
pub mod pipeline;
pub mod render;

pub use config::RunConfig;
pub use error::{Error, Result};
