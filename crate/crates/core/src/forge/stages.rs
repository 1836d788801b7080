//! The per-video pipeline as plain functions, shared by the batch engine
//! and the single-video CLI commands.
//!
//! A video is described by a bundle directory:
//!
//! ```text
//! <bundle>/probe.json    probe-tool JSON with key frames and format.duration
//! <bundle>/iframes.txt   or: key-frame times, one per line
//! <bundle>/cuts.txt      optional cut list (plain seconds or delimited)
//! <bundle>/cuts.csv
//! <bundle>/frames/       sampled frames named by timestamp
//! ```
//!
//! Without a cut list, cuts are detected from the frames.

use std::path::{Path, PathBuf};

use crate::aggregate::{aggregate_document, AggregateConfig, AuditLog};
use crate::backend::Backend;
use crate::cuts::{detect_cuts, import_cuts, CutDetectConfig, CutFormat, CutList};
use crate::document::{CaptionDocument, VideoRef};
use crate::frames::{source_features, FrameDir};
use crate::residual::{caption_segment, CaptionConfig, SegmentCaptions};
use crate::segment::{parse_iframe_timeline, plan_segments, probe_duration, SegmentPlan, SegmentationConfig, TimelineFormat};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoBundle {
    pub root: PathBuf,
    pub timeline: PathBuf,
    pub cuts: Option<PathBuf>,
    pub frames: PathBuf,
}

impl VideoBundle {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let first = |names: &[&str]| names.iter().map(|n| root.join(n)).find(|p| p.is_file());
        let timeline = first(&["probe.json", "iframes.txt"]).ok_or_else(|| {
            Error::io(
                root.join("probe.json"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "bundle has no probe.json or iframes.txt"),
            )
        })?;
        Ok(VideoBundle {
            cuts: first(&["cuts.txt", "cuts.csv"]),
            frames: root.join("frames"),
            timeline,
            root,
        })
    }

    /// Resolves a manifest path relative to the manifest's directory.
    pub fn for_video(video: &VideoRef, base: &Path) -> Result<Self> {
        let p = Path::new(&video.path);
        Self::open(if p.is_absolute() { p.to_path_buf() } else { base.join(p) })
    }

    pub fn frame_dir(&self) -> Result<FrameDir> {
        Ok(FrameDir::open(&self.frames)?)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Cut list from the bundle's file, or detected from its frames.
pub fn bundle_cuts(bundle: &VideoBundle, cfg: &CutDetectConfig) -> Result<CutList> {
    match &bundle.cuts {
        Some(p) => Ok(import_cuts(&read(p)?, CutFormat::Auto)?),
        None => {
            cfg.validate()?;
            let frames = bundle.frame_dir()?;
            let features = source_features(&frames, cfg.bins_per_channel)?;
            Ok(detect_cuts(&features, cfg)?)
        }
    }
}

/// Segment plan for one video. The duration comes from the manifest, else
/// from the probe output.
pub fn segment_video(
    video: &VideoRef,
    bundle: &VideoBundle,
    seg: &SegmentationConfig,
    cut_cfg: &CutDetectConfig,
) -> Result<SegmentPlan> {
    let bytes = read(&bundle.timeline)?;
    let timeline = parse_iframe_timeline(&bytes, TimelineFormat::Auto)?;
    let mut video = video.clone();
    if video.duration_s.is_none() {
        video.duration_s = probe_duration(&bytes);
    }
    let cuts = bundle_cuts(bundle, cut_cfg)?;
    Ok(plan_segments(&video, &timeline, &cuts, seg)?)
}

/// Anchor and residual captions for every segment, in order.
pub fn caption_video(
    plan: &SegmentPlan,
    bundle: &VideoBundle,
    backend: &dyn Backend,
    cfg: &CaptionConfig,
) -> Result<Vec<SegmentCaptions>> {
    let frames = bundle.frame_dir()?;
    plan.segments
        .iter()
        .map(|s| caption_segment(s, &frames, backend, cfg).map_err(Error::from))
        .collect()
}

pub fn aggregate_video(
    plan: &SegmentPlan,
    captions: &[SegmentCaptions],
    text_backend: Option<&dyn Backend>,
    cfg: &AggregateConfig,
) -> Result<(CaptionDocument, AuditLog)> {
    Ok(aggregate_document(plan.video.clone(), captions, text_backend, cfg)?)
}
