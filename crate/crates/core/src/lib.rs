//! Temporal activity detection in untrimmed videos.
//!
//! Video-level class scores come from linear SVMs over pooled descriptors,
//! stacked into a meta SVM and top-k normalized. Per-frame activity scores
//! from a random forest are segmented by a two-state dynamic program into
//! proposals, which are labeled with the top video classes and evaluated
//! by TIoU-thresholded mean average precision.

pub mod classify;
pub mod detect;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod segment;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    Annotation, Detection, FeatureMatrix, FrameScoreTrack, GroundTruth, LabelTable, Labeling,
    Proposal, ScoreKind, ScoreVector, Segment, VideoAnnotations,
};
