//! The acceptance rules: contradiction resolution by support count,
//! consecutive-run acceptance for continuous changes, before/after
//! consistency for discrete claims, and attribute locking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::claims::{Claim, ClaimKind};
use super::ledger::{event_effect, AttributeLedger, Origin};
use crate::document::FramePair;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antonyms {
    pairs: Vec<(String, String)>,
}

impl Default for Antonyms {
    fn default() -> Self {
        Antonyms::new(
            [
                ("left", "right"),
                ("up", "down"),
                ("opens", "closes"),
                ("appears", "disappears"),
                ("clockwise", "counterclockwise"),
            ]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string())),
        )
    }
}

impl Antonyms {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Antonyms {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn with_extra(mut self, extra: impl IntoIterator<Item = (String, String)>) -> Self {
        self.pairs.extend(extra);
        self
    }

    pub fn opposed(&self, a: &str, b: &str) -> bool {
        self.pairs
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClaimKey {
    pub kind: ClaimKind,
    pub subject: String,
    pub predicate: String,
    pub value: Option<String>,
}

impl ClaimKey {
    pub fn of(c: &Claim) -> Self {
        ClaimKey {
            kind: c.kind,
            subject: c.subject.clone(),
            predicate: c.predicate.clone(),
            value: c.value.clone(),
        }
    }

    /// Same subject and either opposite values of one predicate or
    /// opposite value-free predicates.
    pub fn incompatible(&self, other: &ClaimKey, antonyms: &Antonyms) -> bool {
        if self.subject != other.subject {
            return false;
        }
        match (&self.value, &other.value) {
            (Some(a), Some(b)) => self.predicate == other.predicate && antonyms.opposed(a, b),
            (None, None) => antonyms.opposed(&self.predicate, &other.predicate),
            _ => false,
        }
    }
}

/// Claims sharing one key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimGroup {
    pub key: ClaimKey,
    pub claim_ids: Vec<usize>,
    pub span: (f64, f64),
}

impl ClaimGroup {
    pub fn support(&self) -> usize {
        self.claim_ids.len()
    }
}

pub fn group_claims(claims: &[Claim]) -> Vec<ClaimGroup> {
    let mut map: BTreeMap<ClaimKey, ClaimGroup> = BTreeMap::new();
    for c in claims {
        let g = map.entry(ClaimKey::of(c)).or_insert_with(|| ClaimGroup {
            key: ClaimKey::of(c),
            claim_ids: Vec::new(),
            span: c.span,
        });
        g.claim_ids.push(c.id);
        g.span.0 = g.span.0.min(c.span.0);
        g.span.1 = g.span.1.max(c.span.1);
    }
    map.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmissionReason {
    /// Lost to an incompatible group with strictly greater support.
    Contradicted,
    /// Tied with an incompatible group.
    UnresolvedConflict,
    /// Continuous change without two consecutive supporting residuals.
    InsufficientSupport,
    /// The ledger already holds the claimed outcome, or disagrees with an
    /// observation.
    PreconditionFailed,
    /// A later observation disagrees with the claimed outcome.
    PostconditionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omission {
    pub claim_id: usize,
    pub reason: OmissionReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Indices into the input groups, ascending.
    pub survivors: Vec<usize>,
    pub omitted: Vec<(usize, OmissionReason)>,
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// A group survives iff its support strictly exceeds that of every group
/// it conflicts with. `require_overlap` restricts conflicts to groups whose
/// time spans intersect.
pub fn resolve_contradictions(groups: &[ClaimGroup], antonyms: &Antonyms, require_overlap: bool) -> Resolution {
    let mut res = Resolution::default();
    for (i, g) in groups.iter().enumerate() {
        let mut beaten = false;
        let mut tied = false;
        for (j, h) in groups.iter().enumerate() {
            if i == j || !g.key.incompatible(&h.key, antonyms) {
                continue;
            }
            if require_overlap && !overlaps(g.span, h.span) {
                continue;
            }
            match h.support().cmp(&g.support()) {
                std::cmp::Ordering::Greater => beaten = true,
                std::cmp::Ordering::Equal => tied = true,
                std::cmp::Ordering::Less => {}
            }
        }
        if beaten {
            res.omitted.push((i, OmissionReason::Contradicted));
        } else if tied {
            res.omitted.push((i, OmissionReason::UnresolvedConflict));
        } else {
            res.survivors.push(i);
        }
    }
    res
}

/// Maximal runs of consecutive pairs `(i, i+1), (i+1, i+2), ...` with at
/// least two members. Input pairs may repeat and come in any order.
pub fn accept_continuous(pairs: &[FramePair]) -> Vec<Vec<FramePair>> {
    let mut starts: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    starts.sort_unstable();
    starts.dedup();
    let mut runs: Vec<Vec<FramePair>> = Vec::new();
    let mut current: Vec<FramePair> = Vec::new();
    for s in starts {
        if current.last().is_some_and(|p| p.1 != s) {
            runs.push(std::mem::take(&mut current));
        }
        current.push(FramePair(s, s + 1));
    }
    runs.push(current);
    runs.retain(|r| r.len() >= 2);
    runs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    ContinuousChange,
    DiscreteEvent,
    AttributeUpdate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeEffect {
    pub attribute: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: usize,
    pub segment_index: usize,
    pub kind: EvidenceKind,
    pub subject: String,
    pub predicate: String,
    pub value: Option<String>,
    pub description: String,
    pub support_pairs: Vec<FramePair>,
    pub support_count: usize,
    pub time_span: (f64, f64),
    pub claim_ids: Vec<usize>,
    /// Ledger update this item carries, if any.
    pub effect: Option<AttributeEffect>,
}

impl EvidenceItem {
    pub fn key(&self) -> (EvidenceKind, &str, &str, Option<&str>) {
        (self.kind, &self.subject, &self.predicate, self.value.as_deref())
    }
}

/// Attribute a claim asserts a value for: the event's effect, or the
/// attribute of a change or observation.
pub fn claim_target(c: &Claim) -> Option<(String, String)> {
    match c.kind {
        ClaimKind::Motion => None,
        ClaimKind::Event => event_effect(&c.predicate).map(|(a, v)| (a.to_string(), v.to_string())),
        ClaimKind::Change | ClaimKind::Observation => {
            c.value.as_ref().map(|v| (c.predicate.clone(), v.clone()))
        }
    }
}

fn is_transition_on(c: &Claim, attribute: &str) -> bool {
    match c.kind {
        ClaimKind::Event => event_effect(&c.predicate).is_some_and(|(a, _)| a == attribute),
        ClaimKind::Change => c.predicate == attribute,
        _ => false,
    }
}

/// Claims ordered by time: frame pair, then position within the record.
pub fn temporal_order(claims: &[Claim]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..claims.len()).collect();
    order.sort_by_key(|&i| (claims[i].frame_pair.0, claims[i].id));
    order
}

/// Before/after consistency of one non-motion claim against the ledger
/// and the claims that follow it (`later`, in temporal order).
pub fn accept_discrete<'a>(
    claim: &Claim,
    ledger: &AttributeLedger,
    later: impl IntoIterator<Item = &'a Claim>,
) -> Result<(), (OmissionReason, String)> {
    let Some((attr, value)) = claim_target(claim) else {
        return Ok(());
    };
    let current = ledger.value(&claim.subject, &attr);
    match claim.kind {
        ClaimKind::Observation => {
            if let Some(cur) = current.filter(|cur| *cur != value) {
                return Err((
                    OmissionReason::PreconditionFailed,
                    format!("{} {attr} is {cur}, not {value}", claim.subject),
                ));
            }
        }
        _ => {
            if current == Some(value.as_str()) {
                return Err((
                    OmissionReason::PreconditionFailed,
                    format!("{} {attr} is already {value}", claim.subject),
                ));
            }
        }
    }
    for l in later {
        if l.subject != claim.subject {
            continue;
        }
        if is_transition_on(l, &attr) {
            break;
        }
        if l.kind == ClaimKind::Observation && l.predicate == attr && l.value.as_deref() != Some(value.as_str()) {
            return Err((
                OmissionReason::PostconditionFailed,
                format!(
                    "claim {} observes {} {attr} {}",
                    l.id,
                    l.subject,
                    l.value.as_deref().unwrap_or("?")
                ),
            ));
        }
    }
    Ok(())
}

/// Folds accepted attribute-bearing evidence over the anchor ledger in
/// temporal order.
pub fn apply_attribute_locking(anchor: &AttributeLedger, evidence: &[EvidenceItem]) -> AttributeLedger {
    let mut ledger = anchor.clone();
    let mut items: Vec<&EvidenceItem> = evidence.iter().filter(|e| e.effect.is_some()).collect();
    items.sort_by(|a, b| {
        a.support_pairs[0]
            .0
            .cmp(&b.support_pairs[0].0)
            .then(a.claim_ids[0].cmp(&b.claim_ids[0]))
    });
    for e in items {
        let eff = e.effect.as_ref().unwrap();
        ledger.establish(&e.subject, &eff.attribute, &eff.value, e.time_span.1, Origin::Residual);
    }
    ledger
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentValidation {
    pub evidence: Vec<EvidenceItem>,
    pub omissions: Vec<Omission>,
    pub ledger: AttributeLedger,
}

fn sentence_of(clause: &str) -> String {
    let mut chars = clause.trim().chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Runs every rule over one segment's claims. `claims[i].id` must equal `i`.
pub fn validate_segment(
    segment_index: usize,
    claims: &[Claim],
    anchor: &AttributeLedger,
    antonyms: &Antonyms,
) -> SegmentValidation {
    debug_assert!(claims.iter().enumerate().all(|(i, c)| c.id == i));
    let groups = group_claims(claims);
    let resolution = resolve_contradictions(&groups, antonyms, true);
    let mut omissions: Vec<Omission> = Vec::new();
    for &(gi, reason) in &resolution.omitted {
        for &id in &groups[gi].claim_ids {
            omissions.push(Omission {
                claim_id: id,
                reason,
                detail: format!(
                    "{} {} {} conflicts with opposing claims",
                    groups[gi].key.subject,
                    groups[gi].key.predicate,
                    groups[gi].key.value.as_deref().unwrap_or("")
                )
                .trim_end()
                .to_string(),
            });
        }
    }

    let mut evidence: Vec<EvidenceItem> = Vec::new();
    let mut surviving = vec![false; claims.len()];
    for &gi in &resolution.survivors {
        let g = &groups[gi];
        if g.key.kind != ClaimKind::Motion {
            for &id in &g.claim_ids {
                surviving[id] = true;
            }
            continue;
        }
        let pairs: Vec<FramePair> = g.claim_ids.iter().map(|&id| claims[id].frame_pair).collect();
        let runs = accept_continuous(&pairs);
        let mut used = vec![false; g.claim_ids.len()];
        for run in runs {
            let ids: Vec<usize> = g
                .claim_ids
                .iter()
                .enumerate()
                .filter(|(_, &id)| run.contains(&claims[id].frame_pair))
                .map(|(k, &id)| {
                    used[k] = true;
                    id
                })
                .collect();
            let first = &claims[ids[0]];
            let last_span = ids.iter().map(|&id| claims[id].span.1).fold(f64::MIN, f64::max);
            let first_span = ids.iter().map(|&id| claims[id].span.0).fold(f64::MAX, f64::min);
            evidence.push(EvidenceItem {
                id: 0,
                segment_index,
                kind: EvidenceKind::ContinuousChange,
                subject: g.key.subject.clone(),
                predicate: g.key.predicate.clone(),
                value: g.key.value.clone(),
                description: sentence_of(&first.clause),
                support_count: run.len(),
                support_pairs: run,
                time_span: (first_span, last_span),
                claim_ids: ids,
                effect: None,
            });
        }
        for (k, &id) in g.claim_ids.iter().enumerate() {
            if !used[k] {
                omissions.push(Omission {
                    claim_id: id,
                    reason: OmissionReason::InsufficientSupport,
                    detail: "continuous change without two consecutive supporting residuals".into(),
                });
            }
        }
    }

    let order = temporal_order(claims);
    let mut ledger = anchor.clone();
    for (pos, &id) in order.iter().enumerate() {
        if !surviving[id] {
            continue;
        }
        let c = &claims[id];
        let later = order[pos + 1..].iter().map(|&j| &claims[j]);
        match accept_discrete(c, &ledger, later) {
            Err((reason, detail)) => omissions.push(Omission {
                claim_id: id,
                reason,
                detail,
            }),
            Ok(()) => {
                let effect = claim_target(c).map(|(attribute, value)| AttributeEffect { attribute, value });
                if let Some(eff) = &effect {
                    ledger.establish(&c.subject, &eff.attribute, &eff.value, c.span.1, Origin::Residual);
                }
                evidence.push(EvidenceItem {
                    id: 0,
                    segment_index,
                    kind: if c.kind == ClaimKind::Event {
                        EvidenceKind::DiscreteEvent
                    } else {
                        EvidenceKind::AttributeUpdate
                    },
                    subject: c.subject.clone(),
                    predicate: c.predicate.clone(),
                    value: c.value.clone(),
                    description: sentence_of(&c.clause),
                    support_pairs: vec![c.frame_pair],
                    support_count: 1,
                    time_span: c.span,
                    claim_ids: vec![id],
                    effect,
                });
            }
        }
    }

    evidence.sort_by(|a, b| {
        a.time_span
            .0
            .total_cmp(&b.time_span.0)
            .then(a.claim_ids[0].cmp(&b.claim_ids[0]))
    });
    for (i, e) in evidence.iter_mut().enumerate() {
        e.id = i;
    }
    omissions.sort_by_key(|o| o.claim_id);
    SegmentValidation {
        evidence,
        omissions,
        ledger,
    }
}
