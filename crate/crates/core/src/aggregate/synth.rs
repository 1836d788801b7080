//! Scene and video narratives from validated evidence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::claims::{caption_claims, Claim};
use super::prompts::{scene_prompt, video_prompt};
use super::rules::{Antonyms, ClaimKey, EvidenceItem, EvidenceKind, OmissionReason};
use crate::backend::{Backend, BackendError, DecodeParams, ModelRequest};
use crate::document::{FramePair, ResidualRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    #[default]
    Template,
    Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub text: String,
    pub mode_used: SynthesisMode,
    pub warnings: Vec<String>,
    /// Subjects in a backend narrative found in neither anchor nor evidence.
    pub whitelist_violations: Vec<String>,
}

fn terminate(s: &str) -> String {
    let s = s.trim();
    if s.ends_with(['.', '!', '?']) {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.trim().chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn secs(t: f64) -> String {
    format!("{t:.1}")
}

/// Time-tagged sentences for accepted evidence, chronological.
pub fn evidence_sentences(evidence: &[EvidenceItem], claims: &[Claim], residuals: &[ResidualRecord]) -> Vec<String> {
    let mut entries: Vec<((f64, usize), String)> = Vec::new();
    let mut by_pair: BTreeMap<FramePair, Vec<&EvidenceItem>> = BTreeMap::new();
    for e in evidence {
        if e.kind == EvidenceKind::ContinuousChange {
            entries.push((
                (e.time_span.0, e.claim_ids[0]),
                format!(
                    "[{}-{}s] {}",
                    secs(e.time_span.0),
                    secs(e.time_span.1),
                    terminate(&e.description)
                ),
            ));
        } else {
            by_pair.entry(e.support_pairs[0]).or_default().push(e);
        }
    }
    for (pair, items) in by_pair {
        let mut accepted: Vec<usize> = items.iter().flat_map(|e| e.claim_ids.iter().copied()).collect();
        accepted.sort_unstable();
        let in_record: Vec<&Claim> = claims.iter().filter(|c| c.frame_pair == pair).collect();
        let whole = in_record.iter().all(|c| accepted.binary_search(&c.id).is_ok());
        let text = match residuals.iter().find(|r| r.frame_pair == pair) {
            Some(r) if whole => r.delta_caption.clone(),
            _ => {
                let clauses: Vec<&str> = accepted.iter().map(|&id| claims[id].clause.as_str()).collect();
                capitalize(&clauses.join(" and "))
            }
        };
        let span = items[0].time_span;
        entries.push(((span.0, accepted[0]), format!("[{}s] {}", secs(span.1), terminate(&text))));
    }
    entries.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)));
    entries.into_iter().map(|(_, s)| s).collect()
}

/// Anchor text followed by the evidence sentences in time order.
pub fn template_scene(anchor: &str, evidence: &[EvidenceItem], claims: &[Claim], residuals: &[ResidualRecord]) -> String {
    let sentences = evidence_sentences(evidence, claims, residuals);
    let anchor = anchor.trim();
    if sentences.is_empty() {
        anchor.to_string()
    } else {
        format!("{anchor}\n{}", sentences.join(" "))
    }
}

fn allowed_words(anchor: &str, evidence: &[EvidenceItem], claims: &[Claim]) -> BTreeSet<String> {
    let mut words: BTreeSet<String> = BTreeSet::new();
    let mut add = |t: &str| {
        for w in t.split(|c: char| !c.is_alphanumeric()) {
            if !w.is_empty() {
                words.insert(w.to_lowercase());
            }
        }
    };
    add(anchor);
    for e in evidence {
        add(&e.description);
        add(&e.subject);
        for &id in &e.claim_ids {
            add(&claims[id].clause);
        }
    }
    words
}

/// Subjects asserted in `narrative` that are absent from the allowed text.
pub fn whitelist_violations(narrative: &str, anchor: &str, evidence: &[EvidenceItem], claims: &[Claim]) -> Vec<String> {
    let allowed = allowed_words(anchor, evidence, claims);
    let mut out: Vec<String> = caption_claims(narrative, FramePair(0, 1), (0.0, 0.0), 0)
        .into_iter()
        .map(|c| c.subject)
        .filter(|s| s != "scene" && !allowed.contains(s))
        .collect();
    out.sort();
    out.dedup();
    out
}

fn ask(backend: &dyn Backend, prompt: String) -> Result<Result<String, String>, BackendError> {
    match backend.invoke(&ModelRequest::text(prompt, DecodeParams::default())) {
        Ok(r) if r.refusal || r.text.trim().is_empty() => Ok(Err("text model returned no narrative".into())),
        Ok(r) => Ok(Ok(r.text.trim().to_string())),
        Err(e @ BackendError::FixtureMissing { .. }) => Err(e),
        Err(e) => Ok(Err(e.to_string())),
    }
}

pub fn synthesize_scene(
    anchor: &str,
    evidence: &[EvidenceItem],
    claims: &[Claim],
    residuals: &[ResidualRecord],
    mode: SynthesisMode,
    backend: Option<&dyn Backend>,
) -> Result<Synthesis, BackendError> {
    let template = || template_scene(anchor, evidence, claims, residuals);
    let (mode, backend) = match (mode, backend) {
        (SynthesisMode::Backend, Some(b)) => (mode, b),
        (SynthesisMode::Backend, None) => {
            return Ok(Synthesis {
                text: template(),
                mode_used: SynthesisMode::Template,
                warnings: vec!["no text backend configured; used template".into()],
                whitelist_violations: Vec::new(),
            })
        }
        _ => {
            return Ok(Synthesis {
                text: template(),
                mode_used: SynthesisMode::Template,
                warnings: Vec::new(),
                whitelist_violations: Vec::new(),
            })
        }
    };
    let prompt = scene_prompt(anchor, &evidence_sentences(evidence, claims, residuals));
    match ask(backend, prompt)? {
        Ok(text) => {
            let violations = whitelist_violations(&text, anchor, evidence, claims);
            for v in &violations {
                log::warn!("scene narrative mentions `{v}`, absent from anchor and evidence");
            }
            Ok(Synthesis {
                text,
                mode_used: mode,
                warnings: Vec::new(),
                whitelist_violations: violations,
            })
        }
        Err(warning) => {
            log::warn!("scene synthesis fell back to template: {warning}");
            Ok(Synthesis {
                text: template(),
                mode_used: SynthesisMode::Template,
                warnings: vec![warning],
                whitelist_violations: Vec::new(),
            })
        }
    }
}

/// Evidence dropped from the video narrative by the cross-boundary check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossBoundaryOmission {
    pub segment_index: usize,
    pub other_segment: usize,
    pub evidence_ids: Vec<usize>,
    pub subject: String,
    pub reason: OmissionReason,
}

fn evidence_key(e: &EvidenceItem) -> ClaimKey {
    use super::claims::ClaimKind;
    ClaimKey {
        kind: match e.kind {
            EvidenceKind::ContinuousChange => ClaimKind::Motion,
            EvidenceKind::DiscreteEvent => ClaimKind::Event,
            EvidenceKind::AttributeUpdate => ClaimKind::Change,
        },
        subject: e.subject.clone(),
        predicate: e.predicate.clone(),
        value: e.value.clone(),
    }
}

/// Re-applies support-count resolution between adjacent segments. Each
/// segment's evidence is grouped by key with support summed; a group is
/// dropped if an incompatible group in a neighbouring segment has equal
/// or greater support.
pub fn cross_boundary_conflicts(segments: &[&[EvidenceItem]], antonyms: &Antonyms) -> Vec<CrossBoundaryOmission> {
    let grouped: Vec<BTreeMap<ClaimKey, (usize, Vec<usize>)>> = segments
        .iter()
        .map(|ev| {
            let mut m: BTreeMap<ClaimKey, (usize, Vec<usize>)> = BTreeMap::new();
            for e in ev.iter() {
                let slot = m.entry(evidence_key(e)).or_default();
                slot.0 += e.support_count;
                slot.1.push(e.id);
            }
            m
        })
        .collect();
    let mut out = Vec::new();
    for k in 0..grouped.len() {
        for (key, (support, ids)) in &grouped[k] {
            let mut worst: Option<(usize, OmissionReason)> = None;
            for n in [k.checked_sub(1), Some(k + 1)].into_iter().flatten() {
                let Some(other) = grouped.get(n) else { continue };
                for (okey, (osupport, _)) in other {
                    if !key.incompatible(okey, antonyms) {
                        continue;
                    }
                    let reason = match osupport.cmp(support) {
                        std::cmp::Ordering::Greater => OmissionReason::Contradicted,
                        std::cmp::Ordering::Equal => OmissionReason::UnresolvedConflict,
                        std::cmp::Ordering::Less => continue,
                    };
                    if worst.is_none_or(|(_, r)| reason < r) {
                        worst = Some((n, reason));
                    }
                }
            }
            if let Some((n, reason)) = worst {
                out.push(CrossBoundaryOmission {
                    segment_index: k,
                    other_segment: n,
                    evidence_ids: ids.clone(),
                    subject: key.subject.clone(),
                    reason,
                });
            }
        }
    }
    out
}

/// Inputs for one scene of the video narrative.
pub struct SceneParts<'a> {
    pub anchor: &'a str,
    pub narrative: &'a str,
    pub evidence: &'a [EvidenceItem],
    pub claims: &'a [Claim],
    pub residuals: &'a [ResidualRecord],
}

/// Scenes in order; scenes that lost evidence across a boundary are
/// re-rendered without it.
pub fn template_video(scenes: &[SceneParts<'_>], dropped: &[CrossBoundaryOmission]) -> String {
    scenes
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let gone: BTreeSet<usize> = dropped
                .iter()
                .filter(|d| d.segment_index == k)
                .flat_map(|d| d.evidence_ids.iter().copied())
                .collect();
            if gone.is_empty() {
                s.narrative.trim().to_string()
            } else {
                let kept: Vec<EvidenceItem> = s.evidence.iter().filter(|e| !gone.contains(&e.id)).cloned().collect();
                template_scene(s.anchor, &kept, s.claims, s.residuals)
            }
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn synthesize_video(
    scenes: &[SceneParts<'_>],
    antonyms: &Antonyms,
    mode: SynthesisMode,
    backend: Option<&dyn Backend>,
) -> Result<(Synthesis, Vec<CrossBoundaryOmission>), BackendError> {
    let evidence: Vec<&[EvidenceItem]> = scenes.iter().map(|s| s.evidence).collect();
    let dropped = cross_boundary_conflicts(&evidence, antonyms);
    let template = template_video(scenes, &dropped);
    let fallback = |warnings: Vec<String>| Synthesis {
        text: template.clone(),
        mode_used: SynthesisMode::Template,
        warnings,
        whitelist_violations: Vec::new(),
    };
    let synthesis = match (mode, backend) {
        (SynthesisMode::Template, _) => fallback(Vec::new()),
        (SynthesisMode::Backend, None) => fallback(vec!["no text backend configured; used template".into()]),
        (SynthesisMode::Backend, Some(_)) if scenes.len() <= 1 => fallback(Vec::new()),
        (SynthesisMode::Backend, Some(b)) => {
            let narratives: Vec<String> = scenes.iter().map(|s| s.narrative.to_string()).collect();
            let mut subjects: Vec<String> = dropped.iter().map(|d| d.subject.clone()).collect();
            subjects.sort();
            subjects.dedup();
            match ask(b, video_prompt(&narratives, &subjects))? {
                Ok(text) => Synthesis {
                    text,
                    mode_used: SynthesisMode::Backend,
                    warnings: Vec::new(),
                    whitelist_violations: Vec::new(),
                },
                Err(w) => fallback(vec![w]),
            }
        }
    };
    Ok((synthesis, dropped))
}
