//! Evidence validation and narrative synthesis.
//!
//! Residual captions become claims, claims pass through the acceptance
//! rules in [`rules`], and accepted evidence is composed into scene and
//! video narratives. Every claim ends up either in an evidence item or in
//! the omissions log of the [`AuditLog`].

pub mod claims;
pub mod ledger;
pub mod prompts;
pub mod rules;
pub mod synth;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError};
use crate::document::{CaptionDocument, SceneNarrative, ValidationError, VideoRef};
use crate::residual::{SegmentCaptions, WindowFailure};

pub use claims::{extract_claims, parse_anchor_attributes, Claim, ClaimExtractor, ClaimKind, ClaimSet, ExtractorMode};
pub use ledger::{AttributeLedger, LedgerEntry, Origin};
pub use rules::{
    accept_continuous, accept_discrete, apply_attribute_locking, resolve_contradictions, validate_segment,
    Antonyms, ClaimGroup, EvidenceItem, EvidenceKind, Omission, OmissionReason, SegmentValidation,
};
pub use synth::{synthesize_scene, synthesize_video, CrossBoundaryOmission, Synthesis, SynthesisMode};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("segment {segment} cannot be aggregated: {reason}")]
    Incomplete { segment: usize, reason: String },
    #[error("aggregate config: {0}")]
    Config(String),
    #[error("assembled document is invalid: {0}")]
    Document(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    #[default]
    Deterministic,
    Backend,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateConfig {
    pub synthesis: SynthesisMode,
    pub extractor: ExtractorKind,
    /// Antonym pairs added to the built-in table.
    pub extra_antonyms: Vec<(String, String)>,
}

impl AggregateConfig {
    pub fn antonyms(&self) -> Antonyms {
        Antonyms::default().with_extra(self.extra_antonyms.iter().cloned())
    }

    pub fn needs_backend(&self) -> bool {
        self.synthesis == SynthesisMode::Backend || self.extractor == ExtractorKind::Backend
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAudit {
    pub segment_index: usize,
    pub extractor_mode: ExtractorMode,
    pub claims: Vec<Claim>,
    pub evidence: Vec<EvidenceItem>,
    pub omissions: Vec<Omission>,
    pub anchor_ledger: AttributeLedger,
    pub final_ledger: AttributeLedger,
    pub synthesis_mode: SynthesisMode,
    pub whitelist_violations: Vec<String>,
    pub warnings: Vec<String>,
    pub window_failures: Vec<WindowFailure>,
}

/// Everything the aggregation stage decided, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub video_id: String,
    pub segments: Vec<SegmentAudit>,
    pub cross_boundary: Vec<CrossBoundaryOmission>,
    pub video_synthesis_mode: SynthesisMode,
    pub warnings: Vec<String>,
}

impl AuditLog {
    pub fn omission_count(&self) -> usize {
        self.segments.iter().map(|s| s.omissions.len()).sum()
    }
}

struct SceneResult {
    audit: SegmentAudit,
    narrative: String,
}

fn aggregate_scene(
    cap: &SegmentCaptions,
    backend: Option<&dyn Backend>,
    cfg: &AggregateConfig,
    antonyms: &Antonyms,
) -> Result<SceneResult, AggregateError> {
    let k = cap.segment.index;
    let anchor = cap.anchor.as_ref().ok_or_else(|| AggregateError::Incomplete {
        segment: k,
        reason: format!(
            "no anchor caption ({})",
            cap.anchor_failure.as_deref().unwrap_or("missing")
        ),
    })?;
    let extractor = match (cfg.extractor, backend) {
        (ExtractorKind::Backend, Some(b)) => ClaimExtractor::Backend(b),
        _ => ClaimExtractor::Deterministic,
    };
    let claim_set = extract_claims(&cap.residuals, &cap.sample_times, &extractor)?;
    let anchor_ledger = parse_anchor_attributes(&anchor.text, anchor.anchor_time_s);
    let v = validate_segment(k, &claim_set.claims, &anchor_ledger, antonyms);
    let synthesis = synthesize_scene(
        &anchor.text,
        &v.evidence,
        &claim_set.claims,
        &cap.residuals,
        cfg.synthesis,
        backend,
    )?;
    let mut warnings = claim_set.warnings;
    warnings.extend(synthesis.warnings);
    Ok(SceneResult {
        narrative: synthesis.text,
        audit: SegmentAudit {
            segment_index: k,
            extractor_mode: claim_set.mode,
            claims: claim_set.claims,
            evidence: v.evidence,
            omissions: v.omissions,
            anchor_ledger,
            final_ledger: v.ledger,
            synthesis_mode: synthesis.mode_used,
            whitelist_violations: synthesis.whitelist_violations,
            warnings,
            window_failures: cap.window_failures.clone(),
        },
    })
}

/// Validates every segment's residual evidence and assembles the full
/// four-level document. `captions` must be ordered by segment index.
pub fn aggregate_document(
    video: VideoRef,
    captions: &[SegmentCaptions],
    backend: Option<&dyn Backend>,
    cfg: &AggregateConfig,
) -> Result<(CaptionDocument, AuditLog), AggregateError> {
    if cfg.needs_backend() && backend.is_none() {
        return Err(AggregateError::Config(
            "backend synthesis or extraction requested without a text backend".into(),
        ));
    }
    for (i, c) in captions.iter().enumerate() {
        if c.segment.index != i {
            return Err(AggregateError::Incomplete {
                segment: c.segment.index,
                reason: format!("expected segment {i} at this position"),
            });
        }
    }
    let rate = captions.first().map_or(1.0, |c| c.rate_hz);
    if captions.iter().any(|c| c.rate_hz != rate) {
        return Err(AggregateError::Config("segments were sampled at different rates".into()));
    }
    let antonyms = cfg.antonyms();
    let scenes: Vec<SceneResult> = captions
        .par_iter()
        .map(|c| aggregate_scene(c, backend, cfg, &antonyms))
        .collect::<Result<_, _>>()?;

    let parts: Vec<synth::SceneParts> = captions
        .iter()
        .zip(&scenes)
        .map(|(c, s)| synth::SceneParts {
            anchor: &c.anchor.as_ref().expect("checked in aggregate_scene").text,
            narrative: &s.narrative,
            evidence: &s.audit.evidence,
            claims: &s.audit.claims,
            residuals: &c.residuals,
        })
        .collect();
    let (video_synth, cross_boundary) = synthesize_video(&parts, &antonyms, cfg.synthesis, backend)?;

    let doc = CaptionDocument::new(
        video.clone(),
        rate,
        captions.iter().map(|c| c.segment.clone()).collect(),
        captions.iter().map(|c| c.anchor.clone().expect("checked")).collect(),
        captions.iter().map(|c| c.residuals.clone()).collect(),
        captions
            .iter()
            .zip(&scenes)
            .map(|(c, s)| SceneNarrative {
                segment_index: c.segment.index,
                start_s: c.segment.start_s,
                end_s: c.segment.end_s,
                text: s.narrative.clone(),
            })
            .collect(),
        video_synth.text,
    )?;
    let audit = AuditLog {
        video_id: video.video_id,
        segments: scenes.into_iter().map(|s| s.audit).collect(),
        cross_boundary,
        video_synthesis_mode: video_synth.mode_used,
        warnings: video_synth.warnings,
    };
    Ok((doc, audit))
}
