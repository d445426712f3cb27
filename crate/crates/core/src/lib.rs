//! F-formation detection from 2-D pose keypoints.

pub mod crf;
pub mod error;
pub mod eval;
pub mod features;
pub mod labels;
pub mod pipeline;
pub mod pose;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
