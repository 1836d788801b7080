//! Scene-aligned segmentation from codec metadata and content cuts.
//!
//! The regularity of inter-I-frame gaps (their coefficient of variation)
//! tells fixed-GOP encodes, whose I-frames are periodic refreshes, apart
//! from edited or variable encodes where I-frames tend to sit on real
//! scene changes. In the first case content cuts are used directly; in the
//! second, I-frames become boundaries only when a cut lies close by.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::cuts::CutList;
use crate::document::{BoundaryKind, Segment, VideoRef};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("timeline record {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("no I-frames found in probe output")]
    EmptyTimeline,
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
    #[error("segmentation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimelineSource {
    ProbeToolJson,
    PlainList,
}

/// Input format hint for [`parse_iframe_timeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimelineFormat {
    /// Probe JSON when the first non-space byte is `{`, plain list otherwise.
    Auto,
    ProbeJson,
    PlainList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IFrameTimeline {
    timestamps: Vec<f64>,
    pub source: TimelineSource,
}

impl IFrameTimeline {
    /// Sorts and deduplicates; rejects negative or non-finite times.
    pub fn new(mut timestamps: Vec<f64>, source: TimelineSource) -> Result<Self, SegmentError> {
        if let Some(bad) = timestamps.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(SegmentError::InvalidTimeline(format!("timestamp {bad} out of range")));
        }
        timestamps.sort_by(f64::total_cmp);
        timestamps.dedup();
        Ok(IFrameTimeline { timestamps, source })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

pub fn parse_iframe_timeline(
    bytes: &[u8],
    format: TimelineFormat,
) -> Result<IFrameTimeline, SegmentError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SegmentError::Parse {
        index: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let format = match format {
        TimelineFormat::Auto if text.trim_start().starts_with('{') => TimelineFormat::ProbeJson,
        TimelineFormat::Auto => TimelineFormat::PlainList,
        f => f,
    };
    let (times, source) = match format {
        TimelineFormat::ProbeJson => (parse_probe_json(text)?, TimelineSource::ProbeToolJson),
        _ => (parse_plain_list(text)?, TimelineSource::PlainList),
    };
    if times.is_empty() {
        return Err(SegmentError::EmptyTimeline);
    }
    IFrameTimeline::new(times, source)
}

fn parse_plain_list(text: &str) -> Result<Vec<f64>, SegmentError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t: f64 = line.parse().map_err(|_| SegmentError::Parse {
            index: i + 1,
            message: format!("`{line}` is not a number of seconds"),
        })?;
        if !t.is_finite() || t < 0.0 {
            return Err(SegmentError::Parse {
                index: i + 1,
                message: format!("timestamp {t} out of range"),
            });
        }
        out.push(t);
    }
    Ok(out)
}

const TIME_KEYS: [&str; 3] = ["pts_time", "best_effort_timestamp_time", "pkt_pts_time"];

/// Frame records from `ffprobe -show_frames -of json`: keeps frames whose
/// `pict_type` is `I`.
fn parse_probe_json(text: &str) -> Result<Vec<f64>, SegmentError> {
    let root: Value = serde_json::from_str(text).map_err(|e| SegmentError::Parse {
        index: 0,
        message: e.to_string(),
    })?;
    let frames = root
        .get("frames")
        .or_else(|| root.get("packets"))
        .and_then(Value::as_array)
        .ok_or_else(|| SegmentError::Parse {
            index: 0,
            message: "missing `frames` array".into(),
        })?;
    let mut out = Vec::new();
    for (index, rec) in frames.iter().enumerate() {
        let obj = rec.as_object().ok_or_else(|| SegmentError::Parse {
            index,
            message: "record is not an object".into(),
        })?;
        if let Some(media) = obj.get("media_type").and_then(Value::as_str) {
            if media != "video" {
                continue;
            }
        }
        let pict = obj
            .get("pict_type")
            .and_then(Value::as_str)
            .ok_or_else(|| SegmentError::Parse {
                index,
                message: "missing `pict_type`".into(),
            })?;
        if pict != "I" {
            continue;
        }
        let t = TIME_KEYS
            .iter()
            .find_map(|k| obj.get(*k).and_then(json_seconds))
            .ok_or_else(|| SegmentError::Parse {
                index,
                message: "intra frame without a usable presentation time".into(),
            })?;
        out.push(t);
    }
    Ok(out)
}

fn json_seconds(v: &Value) -> Option<f64> {
    let t = match v {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().parse().ok()?,
        _ => return None,
    };
    (t.is_finite() && t >= 0.0).then_some(t)
}

/// Container duration from probe JSON (`format.duration`), when present.
pub fn probe_duration(bytes: &[u8]) -> Option<f64> {
    let root: Value = serde_json::from_slice(bytes).ok()?;
    root.get("format")?.get("duration").and_then(json_seconds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    /// CV threshold at or above which I-frames drive segmentation.
    pub tau_gop: f64,
    pub proximity_window_s: f64,
    pub max_segment_s: f64,
    pub min_segment_s: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            tau_gop: 0.5,
            proximity_window_s: 0.5,
            max_segment_s: 60.0,
            min_segment_s: 1.0,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        let finite = [
            self.tau_gop,
            self.proximity_window_s,
            self.max_segment_s,
            self.min_segment_s,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(SegmentError::Config("values must be finite".into()));
        }
        if self.tau_gop < 0.0 {
            return Err(SegmentError::Config("tau_gop must be >= 0".into()));
        }
        if !(self.proximity_window_s > 0.0) {
            return Err(SegmentError::Config("proximity_window_s must be > 0".into()));
        }
        if !(self.max_segment_s > 0.0) || self.min_segment_s < 0.0 {
            return Err(SegmentError::Config("segment bounds must be positive".into()));
        }
        // Equal-part splitting yields pieces longer than max/2, so this is
        // what keeps split pieces above the minimum.
        if self.min_segment_s > self.max_segment_s / 2.0 {
            return Err(SegmentError::Config(format!(
                "min_segment_s ({}) must be at most half of max_segment_s ({})",
                self.min_segment_s, self.max_segment_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub gaps: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub cv: f64,
}

/// Successive-difference statistics with population standard deviation.
/// `cv` is zero for fewer than two gaps.
pub fn gap_statistics(timeline: &IFrameTimeline) -> GapStats {
    let gaps: Vec<f64> = timeline.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return GapStats {
            gaps,
            mean: 0.0,
            stddev: 0.0,
            cv: 0.0,
        };
    }
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    let stddev = var.sqrt();
    let cv = if gaps.len() >= 2 && mean > 0.0 { stddev / mean } else { 0.0 };
    GapStats {
        gaps,
        mean,
        stddev,
        cv,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentationMode {
    IframePrimary,
    ContentPrimary,
}

pub fn select_mode(stats: &GapStats, cfg: &SegmentationConfig) -> SegmentationMode {
    if stats.cv >= cfg.tau_gop {
        SegmentationMode::IframePrimary
    } else {
        SegmentationMode::ContentPrimary
    }
}

/// I-frame times with at least one cut within `proximity_window_s`. Each
/// I-frame is reported once no matter how many cuts fall in its window.
pub fn match_boundaries(
    timeline: &IFrameTimeline,
    cuts: &CutList,
    cfg: &SegmentationConfig,
) -> Vec<f64> {
    let cut_times = cuts.times();
    let window = cfg.proximity_window_s;
    timeline
        .timestamps
        .iter()
        .copied()
        .filter(|&t| {
            // Nearest cuts on either side of t in the sorted list.
            let idx = cut_times.partition_point(|&c| c < t);
            let after = cut_times.get(idx).map(|&c| (t - c).abs() <= window);
            let before = idx
                .checked_sub(1)
                .map(|i| (t - cut_times[i]).abs() <= window);
            after.unwrap_or(false) || before.unwrap_or(false)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub time_s: f64,
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub video: VideoRef,
    pub mode: SegmentationMode,
    pub gap_stats: GapStats,
    pub config: SegmentationConfig,
    /// Final boundaries including video start and end.
    pub boundaries: Vec<Boundary>,
    pub segments: Vec<Segment>,
}

const EPS: f64 = 1e-9;

pub fn plan_segments(
    video: &VideoRef,
    timeline: &IFrameTimeline,
    cuts: &CutList,
    cfg: &SegmentationConfig,
) -> Result<SegmentPlan, SegmentError> {
    cfg.validate()?;
    let duration = match video.duration_s {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(SegmentError::Config(format!("video duration {d} must be > 0"))),
        None => {
            return Err(SegmentError::Config(format!(
                "duration of `{}` is unknown",
                video.video_id
            )))
        }
    };
    let gap_stats = gap_statistics(timeline);
    let mode = select_mode(&gap_stats, cfg);
    let (interior, kind) = match mode {
        SegmentationMode::IframePrimary => (
            match_boundaries(timeline, cuts, cfg),
            BoundaryKind::IframeMatched,
        ),
        SegmentationMode::ContentPrimary => (cuts.times().to_vec(), BoundaryKind::ContentCut),
    };
    let mut starts: Vec<Boundary> = vec![Boundary {
        time_s: 0.0,
        kind: BoundaryKind::VideoStart,
    }];
    for t in interior {
        if t > EPS && t < duration - EPS && t - starts.last().unwrap().time_s > EPS {
            starts.push(Boundary { time_s: t, kind });
        }
    }

    // Raw pieces, then merge short ones, then split long ones.
    let raw: Vec<(f64, f64, BoundaryKind)> = starts
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let end = starts.get(i + 1).map_or(duration, |n| n.time_s);
            (b.time_s, end, b.kind)
        })
        .collect();
    let merged = merge_short(raw, cfg.min_segment_s);
    let mut pieces = Vec::new();
    for (start, end, kind) in merged {
        split_long(start, end, kind, cfg.max_segment_s, &mut pieces);
    }

    let segments: Vec<Segment> = pieces
        .iter()
        .enumerate()
        .map(|(index, &(start_s, end_s, boundary_kind))| Segment {
            index,
            start_s,
            end_s,
            boundary_kind,
        })
        .collect();
    let mut boundaries: Vec<Boundary> = segments
        .iter()
        .map(|s| Boundary {
            time_s: s.start_s,
            kind: s.boundary_kind,
        })
        .collect();
    boundaries.push(Boundary {
        time_s: duration,
        kind: BoundaryKind::VideoEnd,
    });
    Ok(SegmentPlan {
        video: video.clone(),
        mode,
        gap_stats,
        config: cfg.clone(),
        boundaries,
        segments,
    })
}

/// Folds pieces shorter than `min` into their predecessor; a short first
/// piece absorbs its successors until it is long enough.
fn merge_short(raw: Vec<(f64, f64, BoundaryKind)>, min: f64) -> Vec<(f64, f64, BoundaryKind)> {
    let mut out: Vec<(f64, f64, BoundaryKind)> = Vec::with_capacity(raw.len());
    for piece in raw {
        let only_one = out.len() == 1;
        if let Some(last) = out.last_mut() {
            let first_still_short = only_one && last.1 - last.0 < min;
            if first_still_short || piece.1 - piece.0 < min {
                last.1 = piece.1;
                continue;
            }
        }
        out.push(piece);
    }
    out
}

fn split_long(
    start: f64,
    end: f64,
    kind: BoundaryKind,
    max: f64,
    out: &mut Vec<(f64, f64, BoundaryKind)>,
) {
    let len = end - start;
    let parts = ((len / max) - EPS).ceil().max(1.0) as usize;
    let step = len / parts as f64;
    for p in 0..parts {
        let s = if p == 0 { start } else { start + step * p as f64 };
        let e = if p + 1 == parts { end } else { start + step * (p + 1) as f64 };
        let k = if p == 0 { kind } else { BoundaryKind::DurationSplit };
        out.push((s, e, k));
    }
}
