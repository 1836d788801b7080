use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::payload::parse_residual_payload;
use super::prompts::{anchor_prompt, repair_prompt, residual_prompt};
use super::sampling::{plan_samples, plan_windows, Window, WindowPlan};
use super::spatial::extract_spatial_refs;
use super::CaptionError;
use crate::backend::{Backend, DecodeParams, ImageInput, ModelRequest};
use crate::document::{AnchorCaption, FramePair, ResidualRecord, Segment, SpatialRef};
use crate::frames::FrameSource;
use crate::text::NO_VISIBLE_CHANGE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionConfig {
    pub rate_hz: f64,
    pub window_size: usize,
    pub overlap: usize,
    /// Ask the model to emit the no-change literal for unchanged pairs.
    /// When false, the model omits them and the gaps are filled here.
    pub emit_no_change: bool,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for CaptionConfig {
    fn default() -> Self {
        CaptionConfig {
            rate_hz: 1.0,
            window_size: 8,
            overlap: 1,
            emit_no_change: true,
            max_tokens: 2048,
            temperature: 0.0,
        }
    }
}

impl CaptionConfig {
    pub fn validate(&self) -> Result<(), CaptionError> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(CaptionError::Config(format!("rate_hz must be > 0, got {}", self.rate_hz)));
        }
        plan_windows(0, self.window_size, self.overlap)?;
        Ok(())
    }

    pub fn params(&self) -> DecodeParams {
        DecodeParams {
            max_tokens: self.max_tokens,
            temperature: self.temperature,
        }
    }
}

/// A window whose reply stayed malformed after the repair prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub window: Window,
    pub reason: String,
    /// Original and repair replies, verbatim.
    pub raw_outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub window: Window,
    /// Segment-local pairs; empty when the window failed.
    pub records: Vec<ResidualRecord>,
    pub repaired: bool,
    pub failure: Option<WindowFailure>,
    /// Out-of-range coordinates mentioned in captions.
    pub spatial_flags: Vec<(FramePair, SpatialRef)>,
}

/// Everything the captioning stage produced for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCaptions {
    pub segment: Segment,
    pub rate_hz: f64,
    pub sample_times: Vec<f64>,
    pub windows: WindowPlan,
    pub anchor: Option<AnchorCaption>,
    pub anchor_failure: Option<String>,
    /// Deduplicated records ordered by frame pair.
    pub residuals: Vec<ResidualRecord>,
    pub window_failures: Vec<WindowFailure>,
    pub repaired_windows: Vec<Window>,
    pub spatial_flags: Vec<(FramePair, SpatialRef)>,
}

impl SegmentCaptions {
    pub fn is_complete(&self) -> bool {
        self.anchor.is_some()
            && self.window_failures.is_empty()
            && self.residuals.len() == self.sample_times.len().saturating_sub(1)
    }
}

/// Exhaustive stable-state caption for the segment's first sampled frame.
pub fn caption_anchor(
    segment: &Segment,
    frame: ImageInput,
    backend: &dyn Backend,
    cfg: &CaptionConfig,
) -> Result<AnchorCaption, CaptionError> {
    if (frame.time_s - segment.start_s).abs() > 1e-6 {
        return Err(CaptionError::Input(format!(
            "anchor frame at {} s is not the first sample of segment {} ({} s)",
            frame.time_s, segment.index, segment.start_s
        )));
    }
    let req = ModelRequest::vision(anchor_prompt(), vec![frame], cfg.params());
    let resp = backend.invoke(&req)?;
    if resp.refusal || resp.text.trim().is_empty() {
        return Err(CaptionError::Anchor {
            segment: segment.index,
            reason: if resp.refusal { "model refused".into() } else { "empty caption".into() },
        });
    }
    Ok(AnchorCaption::new(segment.index, segment.start_s, resp.text))
}

/// Checks a reply against the window; returns sorted window-local records
/// or a description of what is wrong with it.
fn assess(text: &str, frame_count: usize, emit_no_change: bool) -> Result<Vec<(FramePair, String)>, String> {
    let parsed = parse_residual_payload(text, frame_count).map_err(|e| e.to_string())?;
    if !parsed.rejected.is_empty() {
        let reasons: Vec<String> = parsed.rejected.iter().map(|r| r.reason.clone()).collect();
        return Err(reasons.join("; "));
    }
    let mut by_pair: BTreeMap<FramePair, String> = parsed.records.into_iter().collect();
    let missing: Vec<FramePair> = (1..frame_count)
        .map(|j| FramePair(j - 1, j))
        .filter(|p| !by_pair.contains_key(p))
        .collect();
    if !missing.is_empty() {
        if emit_no_change {
            let list: Vec<String> = missing.iter().map(|p| p.to_string()).collect();
            return Err(format!("missing frame pairs {}", list.join(", ")));
        }
        for p in missing {
            by_pair.insert(p, NO_VISIBLE_CHANGE.to_string());
        }
    }
    Ok(by_pair.into_iter().collect())
}

/// Residual records for one window. `images` are the window's frames in
/// order; `window` places them within the segment.
pub fn caption_window(
    segment_index: usize,
    window: Window,
    images: &[ImageInput],
    backend: &dyn Backend,
    cfg: &CaptionConfig,
) -> Result<WindowOutcome, CaptionError> {
    if images.len() < 2 || images.len() != window.len() {
        return Err(CaptionError::Input(format!(
            "window {}..{} needs {} >= 2 frames, got {}",
            window.start,
            window.end,
            window.len(),
            images.len()
        )));
    }
    let times: Vec<f64> = images.iter().map(|i| i.time_s).collect();
    let prompt = residual_prompt(&times, cfg.emit_no_change);
    let first = backend.invoke(&ModelRequest::vision(prompt.clone(), images.to_vec(), cfg.params()))?;
    let (local, repaired, failure) = match assess(&first.text, images.len(), cfg.emit_no_change) {
        Ok(records) => (records, false, None),
        Err(problem) => {
            log::info!("segment {segment_index} window {}..{}: {problem}; re-prompting", window.start, window.end);
            let fix = repair_prompt(&prompt, &first.text, &problem);
            let second = backend.invoke(&ModelRequest::vision(fix, images.to_vec(), cfg.params()))?;
            match assess(&second.text, images.len(), cfg.emit_no_change) {
                Ok(records) => (records, true, None),
                Err(problem) => (
                    Vec::new(),
                    true,
                    Some(WindowFailure {
                        window,
                        reason: problem,
                        raw_outputs: vec![first.text, second.text],
                    }),
                ),
            }
        }
    };
    let mut spatial_flags = Vec::new();
    let records = local
        .into_iter()
        .map(|(pair, caption)| {
            let pair = FramePair(pair.0 + window.start, pair.1 + window.start);
            let scan = extract_spatial_refs(&caption);
            spatial_flags.extend(scan.out_of_range.into_iter().map(|r| (pair, r)));
            ResidualRecord {
                segment_index,
                frame_pair: pair,
                delta_caption: caption,
                spatial_tags: scan.refs,
            }
        })
        .collect();
    Ok(WindowOutcome {
        window,
        records,
        repaired,
        failure,
        spatial_flags,
    })
}

/// Anchor plus deduplicated residuals for one segment. Anchor refusals and
/// malformed windows are recorded in the result; backend and frame errors
/// abort.
pub fn caption_segment(
    segment: &Segment,
    frames: &dyn FrameSource,
    backend: &dyn Backend,
    cfg: &CaptionConfig,
) -> Result<SegmentCaptions, CaptionError> {
    cfg.validate()?;
    let plan = plan_samples(segment, cfg.rate_hz);
    let windows = plan_windows(plan.len(), cfg.window_size, cfg.overlap)?;
    let images: Vec<ImageInput> = plan
        .sample_times
        .iter()
        .map(|&t| frames.frame_bytes(t).map(ImageInput::from))
        .collect::<Result<_, _>>()?;

    let (anchor, anchor_failure) = match caption_anchor(segment, images[0].clone(), backend, cfg) {
        Ok(a) => (Some(a), None),
        Err(CaptionError::Anchor { reason, .. }) => (None, Some(reason)),
        Err(e) => return Err(e),
    };

    let outcomes: Vec<WindowOutcome> = windows
        .windows
        .par_iter()
        .map(|w| caption_window(segment.index, *w, &images[w.start..=w.end], backend, cfg))
        .collect::<Result<_, _>>()?;

    let mut merged: BTreeMap<FramePair, ResidualRecord> = BTreeMap::new();
    let mut window_failures = Vec::new();
    let mut repaired_windows = Vec::new();
    let mut spatial_flags = Vec::new();
    for o in outcomes {
        if o.repaired {
            repaired_windows.push(o.window);
        }
        window_failures.extend(o.failure);
        for r in o.records {
            merged.entry(r.frame_pair).or_insert(r);
        }
        for flag in o.spatial_flags {
            if !spatial_flags.contains(&flag) {
                spatial_flags.push(flag);
            }
        }
    }
    Ok(SegmentCaptions {
        segment: segment.clone(),
        rate_hz: cfg.rate_hz,
        sample_times: plan.sample_times,
        windows,
        anchor,
        anchor_failure,
        residuals: merged.into_values().collect(),
        window_failures,
        repaired_windows,
        spatial_flags,
    })
}
