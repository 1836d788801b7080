//! Caption document data model and its on-disk form.
//!
//! One document per video holds all four caption levels: per-segment
//! anchors, per-second residuals, scene narratives and the whole-video
//! narrative. The serialized form is pretty-printed JSON with a
//! `schema_version` field; times are stored in seconds at millisecond
//! precision.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::residual::sampling::sample_count;
use crate::text::{round_ms, word_count};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRef {
    pub video_id: String,
    /// Local path or URL of the source.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate: Option<f64>,
}

impl VideoRef {
    pub fn new(video_id: impl Into<String>, path: impl Into<String>) -> Self {
        VideoRef {
            video_id: video_id.into(),
            path: path.into(),
            duration_s: None,
            frame_rate: None,
        }
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = Some(duration_s);
        self
    }
}

/// Why a segment starts where it does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    IframeMatched,
    ContentCut,
    DurationSplit,
    VideoStart,
    VideoEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    /// Provenance of the segment's start boundary.
    pub boundary_kind: BoundaryKind,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorCaption {
    pub segment_index: usize,
    pub anchor_time_s: f64,
    pub text: String,
    pub word_count: usize,
}

impl AnchorCaption {
    pub fn new(segment_index: usize, anchor_time_s: f64, text: impl Into<String>) -> Self {
        let text = text.into();
        AnchorCaption {
            segment_index,
            anchor_time_s,
            word_count: word_count(&text),
            text,
        }
    }
}

/// Indices `(i, i + 1)` of two adjacent sampled frames within a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FramePair(pub usize, pub usize);

impl FramePair {
    pub fn first(&self) -> usize {
        self.0
    }
    pub fn second(&self) -> usize {
        self.1
    }
    pub fn is_adjacent(&self) -> bool {
        self.1 == self.0 + 1
    }
}

impl fmt::Display for FramePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Cells of the 3x3 screen grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Zone {
    UpperLeft,
    UpperCenter,
    UpperRight,
    MiddleLeft,
    Center,
    MiddleRight,
    LowerLeft,
    LowerCenter,
    LowerRight,
}

impl Zone {
    pub const ALL: [Zone; 9] = [
        Zone::UpperLeft,
        Zone::UpperCenter,
        Zone::UpperRight,
        Zone::MiddleLeft,
        Zone::Center,
        Zone::MiddleRight,
        Zone::LowerLeft,
        Zone::LowerCenter,
        Zone::LowerRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Zone::UpperLeft => "upper-left",
            Zone::UpperCenter => "upper-center",
            Zone::UpperRight => "upper-right",
            Zone::MiddleLeft => "middle-left",
            Zone::Center => "center",
            Zone::MiddleRight => "middle-right",
            Zone::LowerLeft => "lower-left",
            Zone::LowerCenter => "lower-center",
            Zone::LowerRight => "lower-right",
        }
    }

    pub fn from_name(name: &str) -> Option<Zone> {
        let norm = name.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        Zone::ALL.into_iter().find(|z| z.name() == norm)
    }

    /// Row-major position, `(row, column)` with row 0 at the top.
    pub fn cell(self) -> (usize, usize) {
        let i = self as usize;
        (i / 3, i % 3)
    }

    pub fn from_cell(row: usize, col: usize) -> Zone {
        Zone::ALL[row * 3 + col]
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialRef {
    Zone { zone: Zone },
    Percent { x_pct: f64, y_pct: f64 },
}

impl SpatialRef {
    pub fn is_valid(&self) -> bool {
        match *self {
            SpatialRef::Zone { .. } => true,
            SpatialRef::Percent { x_pct, y_pct } => {
                (0.0..=100.0).contains(&x_pct) && (0.0..=100.0).contains(&y_pct)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub segment_index: usize,
    pub frame_pair: FramePair,
    pub delta_caption: String,
    #[serde(default)]
    pub spatial_tags: Vec<SpatialRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNarrative {
    pub segment_index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionDocument {
    pub schema_version: u32,
    pub video: VideoRef,
    pub sample_rate_hz: f64,
    pub segments: Vec<Segment>,
    pub anchors: Vec<AnchorCaption>,
    /// Residual records grouped per segment, in frame order.
    pub residuals: Vec<Vec<ResidualRecord>>,
    pub scene_narratives: Vec<SceneNarrative>,
    pub video_narrative: String,
}

/// A violated document invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invariant `{invariant}` violated: {detail}")]
pub struct ValidationError {
    pub invariant: &'static str,
    pub detail: String,
}

impl ValidationError {
    fn new(invariant: &'static str, detail: impl Into<String>) -> Self {
        ValidationError {
            invariant,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

const TIME_EPS: f64 = 1e-9;

impl CaptionDocument {
    /// Builds a document, normalizing every time field to millisecond
    /// precision and recomputing cached word counts, then validates it.
    pub fn new(
        video: VideoRef,
        sample_rate_hz: f64,
        segments: Vec<Segment>,
        anchors: Vec<AnchorCaption>,
        residuals: Vec<Vec<ResidualRecord>>,
        scene_narratives: Vec<SceneNarrative>,
        video_narrative: String,
    ) -> Result<Self, ValidationError> {
        let mut doc = CaptionDocument {
            schema_version: SCHEMA_VERSION,
            video,
            sample_rate_hz,
            segments,
            anchors,
            residuals,
            scene_narratives,
            video_narrative,
        };
        doc.normalize();
        doc.validate()?;
        Ok(doc)
    }

    /// Empty document for a video with no segments.
    pub fn empty(video: VideoRef) -> Self {
        CaptionDocument {
            schema_version: SCHEMA_VERSION,
            video,
            sample_rate_hz: 1.0,
            segments: Vec::new(),
            anchors: Vec::new(),
            residuals: Vec::new(),
            scene_narratives: Vec::new(),
            video_narrative: String::new(),
        }
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn residual_count(&self) -> usize {
        self.residuals.iter().map(Vec::len).sum()
    }

    fn normalize(&mut self) {
        if let Some(d) = self.video.duration_s.as_mut() {
            *d = round_ms(*d);
        }
        for s in &mut self.segments {
            s.start_s = round_ms(s.start_s);
            s.end_s = round_ms(s.end_s);
        }
        for a in &mut self.anchors {
            a.anchor_time_s = round_ms(a.anchor_time_s);
            a.word_count = word_count(&a.text);
        }
        for n in &mut self.scene_narratives {
            n.start_s = round_ms(n.start_s);
            n.end_s = round_ms(n.end_s);
        }
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ValidationError::new(
                "schema_version = 1",
                format!("found {}", self.schema_version),
            ));
        }
        if let Some(d) = self.video.duration_s {
            if !(d > 0.0) {
                return Err(ValidationError::new("duration_s > 0", format!("found {d}")));
            }
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(ValidationError::new(
                "sample_rate_hz > 0",
                format!("found {}", self.sample_rate_hz),
            ));
        }
        let k = self.segments.len();
        if self.anchors.len() != k {
            return Err(ValidationError::new(
                "|anchors| = K",
                format!("{} anchors for {k} segments", self.anchors.len()),
            ));
        }
        if self.scene_narratives.len() != k {
            return Err(ValidationError::new(
                "|scene_narratives| = K",
                format!("{} scene narratives for {k} segments", self.scene_narratives.len()),
            ));
        }
        if self.residuals.len() != k {
            return Err(ValidationError::new(
                "|residuals| = K",
                format!("{} residual groups for {k} segments", self.residuals.len()),
            ));
        }
        self.validate_segments()?;
        for (idx, (seg, anchor)) in self.segments.iter().zip(&self.anchors).enumerate() {
            if anchor.segment_index != idx {
                return Err(ValidationError::new(
                    "anchor.segment_index = k",
                    format!("anchor {idx} claims segment {}", anchor.segment_index),
                ));
            }
            if (anchor.anchor_time_s - seg.start_s).abs() > TIME_EPS {
                return Err(ValidationError::new(
                    "anchor_time_s = first sampled frame time",
                    format!(
                        "anchor {idx} at {} but segment starts at {}",
                        anchor.anchor_time_s, seg.start_s
                    ),
                ));
            }
            if anchor.text.trim().is_empty() {
                return Err(ValidationError::new(
                    "anchor text nonempty",
                    format!("anchor {idx} is empty"),
                ));
            }
            if anchor.word_count != word_count(&anchor.text) {
                return Err(ValidationError::new(
                    "word_count = whitespace token count",
                    format!(
                        "anchor {idx} caches {} but text has {}",
                        anchor.word_count,
                        word_count(&anchor.text)
                    ),
                ));
            }
        }
        for (idx, (seg, records)) in self.segments.iter().zip(&self.residuals).enumerate() {
            let samples = sample_count(seg.start_s, seg.end_s, self.sample_rate_hz);
            let mut seen = HashSet::new();
            for r in records {
                if r.segment_index != idx {
                    return Err(ValidationError::new(
                        "residual.segment_index = k",
                        format!("record {} in group {idx} claims segment {}", r.frame_pair, r.segment_index),
                    ));
                }
                if !r.frame_pair.is_adjacent() {
                    return Err(ValidationError::new(
                        "frame_pair j = i + 1",
                        format!("segment {idx} has pair {}", r.frame_pair),
                    ));
                }
                if r.frame_pair.1 >= samples {
                    return Err(ValidationError::new(
                        "frame_pair within segment sample range",
                        format!("segment {idx} has {samples} samples but pair {}", r.frame_pair),
                    ));
                }
                if !seen.insert(r.frame_pair) {
                    return Err(ValidationError::new(
                        "frame_pair unique per segment",
                        format!("segment {idx} repeats pair {}", r.frame_pair),
                    ));
                }
                if r.delta_caption.trim().is_empty() {
                    return Err(ValidationError::new(
                        "delta_caption nonempty",
                        format!("segment {idx} pair {} is empty", r.frame_pair),
                    ));
                }
                if let Some(bad) = r.spatial_tags.iter().find(|t| !t.is_valid()) {
                    return Err(ValidationError::new(
                        "spatial refs within [0, 100]",
                        format!("segment {idx} pair {} has {bad:?}", r.frame_pair),
                    ));
                }
            }
        }
        for (idx, (seg, n)) in self.segments.iter().zip(&self.scene_narratives).enumerate() {
            if n.segment_index != idx
                || (n.start_s - seg.start_s).abs() > TIME_EPS
                || (n.end_s - seg.end_s).abs() > TIME_EPS
            {
                return Err(ValidationError::new(
                    "scene narrative aligned with its segment",
                    format!("scene narrative {idx} does not match segment bounds"),
                ));
            }
        }
        Ok(())
    }

    fn validate_segments(&self) -> Result<(), ValidationError> {
        let mut prev_end: Option<f64> = None;
        for (idx, seg) in self.segments.iter().enumerate() {
            if seg.index != idx {
                return Err(ValidationError::new(
                    "segment index = position",
                    format!("segment at {idx} has index {}", seg.index),
                ));
            }
            if !(seg.start_s < seg.end_s) {
                return Err(ValidationError::new(
                    "start_s < end_s",
                    format!("segment {idx} spans [{}, {}]", seg.start_s, seg.end_s),
                ));
            }
            let expected_start = prev_end.unwrap_or(0.0);
            if (seg.start_s - expected_start).abs() > TIME_EPS {
                return Err(ValidationError::new(
                    "segments tile the video",
                    format!("segment {idx} starts at {} instead of {expected_start}", seg.start_s),
                ));
            }
            prev_end = Some(seg.end_s);
        }
        if let (Some(end), Some(d)) = (prev_end, self.video.duration_s) {
            if (end - d).abs() > TIME_EPS {
                return Err(ValidationError::new(
                    "segments tile the video",
                    format!("last segment ends at {end} but duration is {d}"),
                ));
            }
        }
        Ok(())
    }
}

/// Canonical byte form: pretty JSON, fields in declaration order, trailing
/// newline.
pub fn serialize_document(doc: &CaptionDocument) -> Result<Vec<u8>, ValidationError> {
    doc.validate()?;
    let mut out = serde_json::to_vec_pretty(doc).expect("document serialization is infallible");
    out.push(b'\n');
    Ok(out)
}

pub fn deserialize_document(bytes: &[u8]) -> Result<CaptionDocument, DocumentError> {
    let doc: CaptionDocument =
        serde_json::from_slice(bytes).map_err(|e| parse_error(bytes, &e))?;
    doc.validate()?;
    Ok(doc)
}

pub(crate) fn parse_error(bytes: &[u8], err: &serde_json::Error) -> DocumentError {
    DocumentError::Parse {
        offset: byte_offset(bytes, err.line(), err.column()),
        message: err.to_string(),
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for _ in 1..line {
        match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(p) => offset += p + 1,
            None => return bytes.len(),
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}

/// One line of a video manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    video_id: String,
    path: String,
    #[serde(default)]
    duration_s: Option<f64>,
}

/// Parses a JSON-lines manifest (`video_id`, `path`, optional `duration_s`).
/// Blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<VideoRef>, DocumentError> {
    let mut videos = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry: ManifestLine = serde_json::from_str(line).map_err(|e| DocumentError::Manifest {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(d) = entry.duration_s {
            if !(d > 0.0) {
                return Err(DocumentError::Manifest {
                    line: line_no,
                    message: format!("duration_s must be > 0, found {d}"),
                });
            }
        }
        if !ids.insert(entry.video_id.clone()) {
            return Err(DocumentError::Manifest {
                line: line_no,
                message: format!("duplicate video_id `{}`", entry.video_id),
            });
        }
        videos.push(VideoRef {
            video_id: entry.video_id,
            path: entry.path,
            duration_s: entry.duration_s,
            frame_rate: None,
        });
    }
    Ok(videos)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn six_segment_doc() -> CaptionDocument {
        // Alternating 38 s / 39 s segments at 1 Hz: 37 + 38 residuals per
        // pair of segments, 225 in total.
        let lengths = [38.0, 39.0, 38.0, 39.0, 38.0, 39.0];
        let duration: f64 = lengths.iter().sum();
        let video = VideoRef::new("v0", "videos/v0.mp4").with_duration(duration);
        let starts: Vec<f64> = lengths
            .iter()
            .scan(0.0, |acc, l| {
                let s = *acc;
                *acc += l;
                Some(s)
            })
            .collect();
        let segments: Vec<Segment> = (0..6)
            .map(|k| Segment {
                index: k,
                start_s: starts[k],
                end_s: starts[k] + lengths[k],
                boundary_kind: if k == 0 { BoundaryKind::VideoStart } else { BoundaryKind::ContentCut },
            })
            .collect();
        let anchors = segments
            .iter()
            .map(|s| AnchorCaption::new(s.index, s.start_s, format!("Anchor for scene {}.", s.index)))
            .collect();
        let residuals: Vec<Vec<ResidualRecord>> = segments
            .iter()
            .map(|s| {
                let n = sample_count(s.start_s, s.end_s, 1.0);
                (0..n - 1)
                    .map(|i| ResidualRecord {
                        segment_index: s.index,
                        frame_pair: FramePair(i, i + 1),
                        delta_caption: format!("Change {i}."),
                        spatial_tags: vec![],
                    })
                    .collect()
            })
            .collect();
        let scene_narratives = segments
            .iter()
            .map(|s| SceneNarrative {
                segment_index: s.index,
                start_s: s.start_s,
                end_s: s.end_s,
                text: format!("Scene {}.", s.index),
            })
            .collect();
        CaptionDocument::new(
            video,
            1.0,
            segments,
            anchors,
            residuals,
            scene_narratives,
            "Whole video.".into(),
        )
        .unwrap()
    }

    #[test]
    fn empty_document_round_trips() {
        let doc = CaptionDocument::empty(VideoRef::new("e", "e.mp4"));
        let bytes = serialize_document(&doc).unwrap();
        assert_eq!(deserialize_document(&bytes).unwrap(), doc);
    }

    #[test]
    fn six_segments_with_225_residuals_round_trip() {
        let doc = six_segment_doc();
        assert_eq!(doc.segment_count(), 6);
        assert_eq!(doc.residual_count(), 225);
        let bytes = serialize_document(&doc).unwrap();
        let back = deserialize_document(&bytes).unwrap();
        assert_eq!(back, doc);
        assert_eq!(serialize_document(&back).unwrap(), bytes);
    }

    #[test]
    fn missing_scene_narrative_is_named() {
        let doc = six_segment_doc();
        let mut value: serde_json::Value =
            serde_json::from_slice(&serialize_document(&doc).unwrap()).unwrap();
        value["scene_narratives"].as_array_mut().unwrap().pop();
        let bytes = serde_json::to_vec(&value).unwrap();
        match deserialize_document(&bytes) {
            Err(DocumentError::Validation(v)) => assert_eq!(v.invariant, "|scene_narratives| = K"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_input_is_a_parse_error() {
        let bytes = serialize_document(&six_segment_doc()).unwrap();
        let cut = &bytes[..bytes.len() / 2];
        match deserialize_document(cut) {
            Err(DocumentError::Parse { offset, .. }) => assert!(offset <= cut.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(deserialize_document(b""), Err(DocumentError::Parse { .. })));
    }

    #[test]
    fn stale_word_count_is_rejected() {
        let mut doc = six_segment_doc();
        doc.anchors[2].word_count += 1;
        assert_eq!(
            doc.validate().unwrap_err().invariant,
            "word_count = whitespace token count"
        );
    }

    #[test]
    fn out_of_range_pair_is_rejected() {
        let mut doc = six_segment_doc();
        let last = doc.residuals[0].len();
        doc.residuals[0].push(ResidualRecord {
            segment_index: 0,
            frame_pair: FramePair(last + 5, last + 6),
            delta_caption: "x".into(),
            spatial_tags: vec![],
        });
        assert_eq!(
            doc.validate().unwrap_err().invariant,
            "frame_pair within segment sample range"
        );
    }

    #[test]
    fn manifest_parses_and_rejects_duplicates() {
        let text = "{\"video_id\":\"a\",\"path\":\"a.mp4\",\"duration_s\":12.5}\n\n# c\n{\"video_id\":\"b\",\"path\":\"b\"}\n";
        let vids = parse_manifest(text).unwrap();
        assert_eq!(vids.len(), 2);
        assert_eq!(vids[0].duration_s, Some(12.5));
        assert_eq!(vids[1].duration_s, None);
        let dup = "{\"video_id\":\"a\",\"path\":\"x\"}\n{\"video_id\":\"a\",\"path\":\"y\"}";
        assert!(matches!(parse_manifest(dup), Err(DocumentError::Manifest { line: 2, .. })));
    }

    #[test]
    fn zone_names_round_trip() {
        for z in Zone::ALL {
            assert_eq!(Zone::from_name(z.name()), Some(z));
            let (r, c) = z.cell();
            assert_eq!(Zone::from_cell(r, c), z);
        }
        assert_eq!(Zone::from_name("Upper Left"), Some(Zone::UpperLeft));
    }
}
