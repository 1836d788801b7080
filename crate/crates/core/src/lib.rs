//! Keyframe/residual dense video captioning.
//!
//! A video is split into scene-aligned segments. Each segment gets one
//! exhaustive anchor caption for its first sampled frame plus per-second
//! residual captions that describe only what changed between adjacent
//! frames. Residual evidence is validated by a small rule engine and folded
//! into scene-level and whole-video narratives.
//!
//! The crate also contains the caption-then-predict QA benchmark toolkit
//! (label voting, quality filters, stratified sampling, evaluation metrics)
//! and a checkpointed batch engine for building captioned corpora.
//!
//! Every model call goes through [`backend::Backend`]; the record/replay
//! client makes all stages deterministic and runnable offline.

pub mod aggregate;
pub mod backend;
pub mod cuts;
pub mod document;
pub mod error;
pub mod forge;
pub mod frames;
pub mod qa;
pub mod residual;
pub mod segment;
pub mod text;

pub use document::{
    AnchorCaption, BoundaryKind, CaptionDocument, FramePair, ResidualRecord, SceneNarrative,
    Segment, SpatialRef, VideoRef, Zone,
};
pub use error::{Error, ErrorCategory, Result};
