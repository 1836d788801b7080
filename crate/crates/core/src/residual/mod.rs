//! Anchor and residual captioning: frame sampling, sliding windows,
//! structured delta parsing and spatial normalization.

mod captioner;
mod payload;
pub mod prompts;
pub mod sampling;
mod spatial;

use thiserror::Error;

use crate::backend::BackendError;
use crate::frames::FrameError;

pub use captioner::{
    caption_anchor, caption_segment, caption_window, CaptionConfig, SegmentCaptions, WindowFailure,
    WindowOutcome,
};
pub use payload::{parse_residual_payload, ParsedPayload, RejectedRecord};
pub use sampling::{plan_samples, plan_windows, SamplePlan, Window, WindowPlan};
pub use spatial::{extract_spatial_refs, zone_of, SpatialScan};

#[derive(Debug, Error)]
pub enum CaptionError {
    #[error("caption config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unparseable residual payload: {0}")]
    Parse(String),
    #[error("anchor generation failed for segment {segment}: {reason}")]
    Anchor { segment: usize, reason: String },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl CaptionError {
    pub fn is_backend(&self) -> bool {
        matches!(self, CaptionError::Backend(_))
    }
}
