//! Pipeline pieces for view-invariant action recognition from paired RGB and
//! depth video: key-frame selection by structural similarity, rank pooling
//! into dynamic images, lightweight per-stream classifiers and late score
//! fusion with cross-view evaluation.

pub mod error;
pub mod fusion_eval;
pub mod imgproc;
pub mod keyframe;
pub mod learn;
pub mod pipeline;
pub mod rankpool;
pub mod synthgen;
pub mod tensorio;

pub use error::{Error, Result};
