//! Claims: normalized assertions pulled out of residual captions, plus the
//! deterministic pattern extractor and the anchor attribute parser.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ledger::{AttributeLedger, Origin};
use crate::backend::{Backend, BackendError, DecodeParams, ModelRequest};
use crate::document::{FramePair, ResidualRecord};
use crate::text::{find_json_span, is_no_change};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    /// Ongoing movement; needs consecutive support.
    Motion,
    /// Instantaneous happening, possibly with a state effect.
    Event,
    /// Explicit attribute update, `predicate` names the attribute.
    Change,
    /// Statement about the current value of an attribute.
    Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    /// Position in the segment's claim list.
    pub id: usize,
    pub kind: ClaimKind,
    pub subject: String,
    pub predicate: String,
    pub value: Option<String>,
    pub frame_pair: FramePair,
    /// Times of the two frames of the pair.
    pub span: (f64, f64),
    /// Source text of the clause, as written.
    pub clause: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorMode {
    Deterministic,
    Backend,
    /// Backend extraction failed; the deterministic extractor was used.
    BackendFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSet {
    pub claims: Vec<Claim>,
    pub mode: ExtractorMode,
    pub warnings: Vec<String>,
}

pub enum ClaimExtractor<'a> {
    Deterministic,
    Backend(&'a dyn Backend),
}

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "its", "their", "some",
];

const PREPOSITIONS: &[&str] = &[
    "of", "on", "in", "at", "with", "to", "from", "into", "onto", "near", "by", "behind", "under",
    "over", "across", "toward", "towards", "through", "for", "inside",
];

const DIRECTIONS: &[(&str, &str)] = &[
    ("left", "left"),
    ("leftward", "left"),
    ("leftwards", "left"),
    ("right", "right"),
    ("rightward", "right"),
    ("rightwards", "right"),
    ("up", "up"),
    ("upward", "up"),
    ("upwards", "up"),
    ("down", "down"),
    ("downward", "down"),
    ("downwards", "down"),
    ("forward", "forward"),
    ("backward", "backward"),
    ("clockwise", "clockwise"),
    ("counterclockwise", "counterclockwise"),
    ("counter-clockwise", "counterclockwise"),
    ("anticlockwise", "counterclockwise"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VerbClass {
    Copula,
    Become,
    Motion,
    Event,
    Add,
    Remove,
    Cut,
}

const VERBS: &[(&[&str], &str, VerbClass)] = &[
    (&["is", "are"], "is", VerbClass::Copula),
    (&["sits", "sit"], "sits", VerbClass::Copula),
    (&["remains", "remain"], "remains", VerbClass::Copula),
    (&["stays", "stay"], "stays", VerbClass::Copula),
    (&["turns", "turn"], "turns", VerbClass::Become),
    (&["becomes", "become"], "becomes", VerbClass::Become),
    (&["changes", "change"], "changes", VerbClass::Become),
    (&["moves", "move"], "moves", VerbClass::Motion),
    (&["slides", "slide"], "slides", VerbClass::Motion),
    (&["rolls", "roll"], "rolls", VerbClass::Motion),
    (&["walks", "walk"], "walks", VerbClass::Motion),
    (&["runs", "run"], "runs", VerbClass::Motion),
    (&["scrolls", "scroll"], "scrolls", VerbClass::Motion),
    (&["pans", "pan"], "pans", VerbClass::Motion),
    (&["tilts", "tilt"], "tilts", VerbClass::Motion),
    (&["zooms", "zoom"], "zooms", VerbClass::Motion),
    (&["drifts", "drift"], "drifts", VerbClass::Motion),
    (&["shifts", "shift"], "shifts", VerbClass::Motion),
    (&["rotates", "rotate"], "rotates", VerbClass::Motion),
    (&["spins", "spin"], "spins", VerbClass::Motion),
    (&["travels", "travel"], "travels", VerbClass::Motion),
    (&["drives", "drive"], "drives", VerbClass::Motion),
    (&["flies", "fly"], "flies", VerbClass::Motion),
    (&["swims", "swim"], "swims", VerbClass::Motion),
    (&["climbs", "climb"], "climbs", VerbClass::Motion),
    (&["rises", "rise"], "rises", VerbClass::Motion),
    (&["sinks", "sink"], "sinks", VerbClass::Motion),
    (&["opens", "open"], "opens", VerbClass::Event),
    (&["closes", "close"], "closes", VerbClass::Event),
    (&["appears", "appear"], "appears", VerbClass::Event),
    (&["disappears", "disappear", "vanishes", "vanish"], "disappears", VerbClass::Event),
    (&["enters", "enter"], "enters", VerbClass::Event),
    (&["exits", "exit"], "exits", VerbClass::Event),
    (&["leaves", "leave"], "leaves", VerbClass::Event),
    (&["shatters", "shatter"], "shatters", VerbClass::Event),
    (&["breaks", "break"], "breaks", VerbClass::Event),
    (&["falls", "fall"], "falls", VerbClass::Event),
    (&["stops", "stop"], "stops", VerbClass::Event),
    (&["starts", "start"], "starts", VerbClass::Event),
    (&["jumps", "jump"], "jumps", VerbClass::Event),
    (&["waves", "wave"], "waves", VerbClass::Event),
    (&["nods", "nod"], "nods", VerbClass::Event),
    (&["speaks", "speak", "talks", "talk"], "speaks", VerbClass::Event),
    (&["clicks", "click"], "clicks", VerbClass::Event),
    (&["adds", "add"], "adds", VerbClass::Add),
    (&["removes", "remove"], "removes", VerbClass::Remove),
    (&["cuts", "cut"], "cuts", VerbClass::Cut),
];

/// Event verbs whose grammatical object, when present, is what changes.
const TRANSITIVE: &[&str] = &["opens", "closes", "breaks", "shatters", "stops", "starts"];

const COLORS: &[&str] = &[
    "red", "blue", "green", "yellow", "black", "white", "gray", "grey", "orange", "purple", "pink",
    "brown", "silver", "gold",
];
const STATES: &[&str] = &[
    "open", "closed", "intact", "broken", "shattered", "fallen", "on", "off", "lit", "dark",
    "empty", "full", "bold", "underlined", "highlighted", "blurred",
];
const VISIBILITY: &[(&str, &str)] = &[("visible", "visible"), ("hidden", "hidden"), ("invisible", "hidden")];
const MOTION_STATES: &[&str] = &["stopped", "started", "moving", "stationary"];

fn verb(word: &str) -> Option<(&'static str, VerbClass)> {
    VERBS
        .iter()
        .find(|(forms, _, _)| forms.contains(&word))
        .map(|(_, canon, class)| (*canon, *class))
}

fn direction(word: &str) -> Option<&'static str> {
    DIRECTIONS.iter().find(|(w, _)| *w == word).map(|(_, d)| *d)
}

/// Attribute an adjective describes, with its canonical value.
pub fn attribute_of(adj: &str) -> Option<(&'static str, String)> {
    if COLORS.contains(&adj) {
        let v = if adj == "grey" { "gray" } else { adj };
        return Some(("color", v.to_string()));
    }
    if STATES.contains(&adj) {
        return Some(("state", adj.to_string()));
    }
    if let Some((_, v)) = VISIBILITY.iter().find(|(w, _)| *w == adj) {
        return Some(("visibility", v.to_string()));
    }
    if MOTION_STATES.contains(&adj) {
        return Some(("motion", adj.to_string()));
    }
    None
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '-' && c != '%')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Head noun of a noun phrase: determiners dropped, cut at the first
/// preposition, last remaining word.
pub fn head_noun(tokens: &[String]) -> Option<String> {
    let cut = tokens
        .iter()
        .position(|t| PREPOSITIONS.contains(&t.as_str()))
        .unwrap_or(tokens.len());
    tokens[..cut]
        .iter()
        .rfind(|t| !DETERMINERS.contains(&t.as_str()))
        .cloned()
}

fn is_initial(token: &str) -> bool {
    let t = token.trim_start_matches(|c: char| !c.is_alphanumeric());
    let mut chars = t.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
        || ["Mr", "Mrs", "Ms", "Dr", "St", "Jr", "Sr", "vs", "e.g", "i.e"].contains(&t)
}

/// Splits on sentence punctuation followed by whitespace, keeping
/// initials such as "T." inside names.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if !matches!(b, b'.' | b'!' | b'?' | b';') {
            continue;
        }
        let at_end = i + 1 == bytes.len();
        if !at_end && !bytes[i + 1].is_ascii_whitespace() {
            continue;
        }
        let last_token = text[start..i].split_whitespace().next_back().unwrap_or("");
        if b == b'.' && is_initial(last_token) && !at_end {
            continue;
        }
        let s = text[start..i].trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
        start = i + 1;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

fn has_verb(fragment: &str) -> bool {
    words(fragment).iter().any(|w| verb(w).is_some())
}

/// Splits a sentence at commas, "and" and "then" when both sides carry a verb.
pub fn split_clauses(sentence: &str) -> Vec<String> {
    let lower = sentence.to_lowercase();
    let mut cuts: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < lower.len() {
        let rest = &lower[i..];
        let len = if rest.starts_with(", and then ") {
            11
        } else if rest.starts_with(", then ") {
            7
        } else if rest.starts_with(", and ") {
            6
        } else if rest.starts_with(" and then ") {
            10
        } else if rest.starts_with(", ") {
            2
        } else if rest.starts_with(" and ") {
            5
        } else if rest.starts_with(" then ") {
            6
        } else {
            0
        };
        if len > 0 {
            cuts.push((i, i + len));
            i += len;
        } else {
            i += rest.chars().next().map_or(1, char::len_utf8);
        }
    }
    let mut clauses = Vec::new();
    let mut start = 0;
    for (k, &(a, b)) in cuts.iter().enumerate() {
        let next = cuts.get(k + 1).map_or(sentence.len(), |c| c.0);
        if has_verb(&sentence[start..a]) && has_verb(&sentence[b..next]) {
            clauses.push(sentence[start..a].trim().to_string());
            start = b;
        }
    }
    clauses.push(sentence[start..].trim().to_string());
    clauses.retain(|c| !c.is_empty());
    clauses
}

/// One parsed clause before it is bound to a frame pair.
#[derive(Debug, Clone, PartialEq)]
struct Parsed {
    kind: ClaimKind,
    subject: String,
    predicate: String,
    value: Option<String>,
}

fn parse_clause(clause: &str, prev_subject: Option<&str>) -> Parsed {
    let toks = words(clause);
    let fallback = || Parsed {
        kind: ClaimKind::Event,
        subject: "scene".into(),
        predicate: "changes".into(),
        value: Some(toks.join(" ")),
    };
    let Some(v) = toks.iter().position(|t| verb(t).is_some()) else {
        return fallback();
    };
    let (canon, class) = verb(&toks[v]).unwrap();
    let subject = if v == 0 {
        prev_subject.map(str::to_string)
    } else {
        head_noun(&toks[..v])
    }
    .unwrap_or_else(|| "scene".to_string());
    let rest = &toks[v + 1..];
    let skip = |r: &[String]| -> Vec<String> {
        r.iter()
            .filter(|t| !["still", "now", "completely", "fully"].contains(&t.as_str()))
            .cloned()
            .collect()
    };
    match class {
        VerbClass::Copula => {
            if rest.len() >= 2 && rest[0] == "replaced" && rest[1] == "by" {
                return Parsed {
                    kind: ClaimKind::Event,
                    subject,
                    predicate: "replaced".into(),
                    value: Some(rest[2..].join(" ")).filter(|s| !s.is_empty()),
                };
            }
            let now = rest.iter().any(|t| t == "now");
            let adjs = skip(rest);
            if adjs.is_empty() && rest.iter().any(|t| t == "still") {
                return Parsed {
                    kind: ClaimKind::Observation,
                    subject,
                    predicate: "motion".into(),
                    value: Some("stopped".into()),
                };
            }
            match adjs.first().and_then(|a| attribute_of(a)) {
                Some((attr, value)) if adjs.len() == 1 => Parsed {
                    kind: if now { ClaimKind::Change } else { ClaimKind::Observation },
                    subject,
                    predicate: attr.into(),
                    value: Some(value),
                },
                _ => fallback(),
            }
        }
        VerbClass::Become => {
            if canon == "turns" {
                if let Some(d) = rest.iter().find_map(|t| direction(t)) {
                    return Parsed {
                        kind: ClaimKind::Motion,
                        subject,
                        predicate: canon.into(),
                        value: Some(d.into()),
                    };
                }
            }
            let r: Vec<String> = skip(rest).into_iter().filter(|t| t != "to" && t != "into").collect();
            match r.last().and_then(|a| attribute_of(a)) {
                Some((attr, value)) => {
                    let object = head_noun(&r[..r.len() - 1]);
                    Parsed {
                        kind: ClaimKind::Change,
                        subject: object.unwrap_or(subject),
                        predicate: attr.into(),
                        value: Some(value),
                    }
                }
                None => fallback(),
            }
        }
        VerbClass::Motion => Parsed {
            kind: ClaimKind::Motion,
            subject,
            predicate: canon.into(),
            value: rest
                .iter()
                .find_map(|t| direction(t))
                .or_else(|| {
                    (canon == "zooms")
                        .then(|| rest.iter().find(|t| *t == "in" || *t == "out"))
                        .flatten()
                        .map(|t| if t == "in" { "in" } else { "out" })
                })
                .map(str::to_string),
        },
        VerbClass::Event => {
            let object = (TRANSITIVE.contains(&canon)
                && rest.first().is_some_and(|t| DETERMINERS.contains(&t.as_str())))
            .then(|| head_noun(rest))
            .flatten();
            Parsed {
                kind: ClaimKind::Event,
                subject: object.unwrap_or(subject),
                predicate: canon.into(),
                value: None,
            }
        }
        VerbClass::Add | VerbClass::Remove => match head_noun(rest) {
            Some(obj) => Parsed {
                kind: ClaimKind::Event,
                subject: obj,
                predicate: if class == VerbClass::Add { "appears" } else { "disappears" }.into(),
                value: None,
            },
            None => fallback(),
        },
        VerbClass::Cut => {
            if rest.first().is_some_and(|t| t == "to") && rest.len() > 1 {
                Parsed {
                    kind: ClaimKind::Event,
                    subject: "scene".into(),
                    predicate: "cuts".into(),
                    value: Some(rest[1..].join(" ")),
                }
            } else {
                fallback()
            }
        }
    }
}

fn clean_clause(clause: &str) -> String {
    let mut c = clause.trim().trim_end_matches(['.', '!', '?', ';', ',']).trim();
    for lead in ["and then ", "then ", "and "] {
        if c.len() >= lead.len() && c[..lead.len()].eq_ignore_ascii_case(lead) {
            c = c[lead.len()..].trim_start();
        }
    }
    c.to_string()
}

fn pair_span(pair: FramePair, sample_times: &[f64]) -> (f64, f64) {
    let t = |i: usize| sample_times.get(i).copied().unwrap_or(i as f64);
    (t(pair.0), t(pair.1))
}

/// Deterministic claims for one caption, ids starting at `first_id`.
pub fn caption_claims(caption: &str, pair: FramePair, span: (f64, f64), first_id: usize) -> Vec<Claim> {
    if is_no_change(caption) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for sentence in split_sentences(caption) {
        let mut prev: Option<String> = None;
        for clause in split_clauses(&sentence) {
            let text = clean_clause(&clause);
            if text.is_empty() {
                continue;
            }
            let p = parse_clause(&text, prev.as_deref());
            if p.subject != "scene" {
                prev = Some(p.subject.clone());
            }
            out.push(Claim {
                id: first_id + out.len(),
                kind: p.kind,
                subject: p.subject,
                predicate: p.predicate,
                value: p.value,
                frame_pair: pair,
                span,
                clause: text,
            });
        }
    }
    out
}

fn deterministic(records: &[ResidualRecord], sample_times: &[f64]) -> Vec<Claim> {
    let mut claims = Vec::new();
    for r in records {
        let span = pair_span(r.frame_pair, sample_times);
        let found = caption_claims(&r.delta_caption, r.frame_pair, span, claims.len());
        claims.extend(found);
    }
    claims
}

#[derive(Debug, serde::Deserialize)]
struct RawClaim {
    record: usize,
    kind: ClaimKind,
    subject: String,
    predicate: String,
    #[serde(default)]
    value: Option<String>,
    #[serde(default)]
    clause: Option<String>,
}

fn backend_claims(
    records: &[ResidualRecord],
    sample_times: &[f64],
    backend: &dyn Backend,
) -> Result<Result<Vec<Claim>, String>, BackendError> {
    let listing: Vec<String> = records
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{i}. {}", r.delta_caption))
        .collect();
    let prompt = super::prompts::claims_prompt(&listing.join("\n"));
    let resp = backend.invoke(&ModelRequest::text(prompt, DecodeParams::default()))?;
    let Some(span) = find_json_span(&resp.text, b'[', b']') else {
        return Ok(Err("claim extractor reply has no JSON array".into()));
    };
    let raw: Vec<RawClaim> = match serde_json::from_str::<Value>(span).and_then(serde_json::from_value) {
        Ok(r) => r,
        Err(e) => return Ok(Err(format!("claim extractor reply: {e}"))),
    };
    let mut claims = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if is_no_change(&r.delta_caption) {
            continue;
        }
        let span = pair_span(r.frame_pair, sample_times);
        let mine: Vec<&RawClaim> = raw.iter().filter(|c| c.record == i).collect();
        if mine.is_empty() {
            // Every changed record must yield a claim.
            let found = caption_claims(&r.delta_caption, r.frame_pair, span, claims.len());
            claims.extend(found);
            continue;
        }
        for c in mine {
            claims.push(Claim {
                id: claims.len(),
                kind: c.kind,
                subject: c.subject.trim().to_lowercase(),
                predicate: c.predicate.trim().to_lowercase(),
                value: c.value.as_ref().map(|v| v.trim().to_lowercase()).filter(|v| !v.is_empty()),
                frame_pair: r.frame_pair,
                span,
                clause: c.clause.clone().unwrap_or_else(|| clean_clause(&r.delta_caption)),
            });
        }
    }
    if raw.iter().any(|c| c.record >= records.len()) {
        return Ok(Err("claim extractor referenced an unknown record".into()));
    }
    Ok(Ok(claims))
}

/// Claims for one segment's residuals, in record order. Backend failures
/// other than a missing replay fixture fall back to the deterministic
/// extractor with a warning.
pub fn extract_claims(
    records: &[ResidualRecord],
    sample_times: &[f64],
    extractor: &ClaimExtractor<'_>,
) -> Result<ClaimSet, BackendError> {
    match extractor {
        ClaimExtractor::Deterministic => Ok(ClaimSet {
            claims: deterministic(records, sample_times),
            mode: ExtractorMode::Deterministic,
            warnings: Vec::new(),
        }),
        ClaimExtractor::Backend(backend) => {
            let outcome = match backend_claims(records, sample_times, *backend) {
                Err(e @ BackendError::FixtureMissing { .. }) => return Err(e),
                Err(e) => Err(e.to_string()),
                Ok(r) => r,
            };
            match outcome {
                Ok(claims) => Ok(ClaimSet {
                    claims,
                    mode: ExtractorMode::Backend,
                    warnings: Vec::new(),
                }),
                Err(warning) => {
                    log::warn!("claim extraction fell back to patterns: {warning}");
                    Ok(ClaimSet {
                        claims: deterministic(records, sample_times),
                        mode: ExtractorMode::BackendFallback,
                        warnings: vec![warning],
                    })
                }
            }
        }
    }
}

/// Attribute entries stated in an anchor caption: "<adjective> <noun>" and
/// "<noun> is <adjective>".
pub fn parse_anchor_attributes(anchor: &str, time_s: f64) -> AttributeLedger {
    let mut ledger = AttributeLedger::default();
    for sentence in split_sentences(anchor) {
        let toks = words(&sentence);
        for i in 0..toks.len() {
            if let Some((attr, value)) = attribute_of(&toks[i]) {
                if let Some(noun) = toks.get(i + 1) {
                    let ok = !DETERMINERS.contains(&noun.as_str())
                        && !PREPOSITIONS.contains(&noun.as_str())
                        && verb(noun).is_none()
                        && attribute_of(noun).is_none()
                        && !["and", "or", "but"].contains(&noun.as_str());
                    if ok && attr != "motion" {
                        ledger.establish(noun, attr, &value, time_s, Origin::Anchor);
                    }
                }
            }
            if matches!(toks[i].as_str(), "is" | "are") && i > 0 {
                let adj = toks.get(i + 1).filter(|a| *a != "not");
                if let Some((attr, value)) = adj.and_then(|a| attribute_of(a)) {
                    let noun = &toks[i - 1];
                    if !DETERMINERS.contains(&noun.as_str()) {
                        ledger.establish(noun, attr, &value, time_s, Origin::Anchor);
                    }
                }
            }
        }
    }
    ledger
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(caption: &str) -> Vec<(ClaimKind, String, String, Option<String>)> {
        caption_claims(caption, FramePair(2, 3), (2.0, 3.0), 0)
            .into_iter()
            .map(|c| (c.kind, c.subject, c.predicate, c.value))
            .collect()
    }

    fn t(kind: ClaimKind, s: &str, p: &str, v: Option<&str>) -> (ClaimKind, String, String, Option<String>) {
        (kind, s.into(), p.into(), v.map(str::to_string))
    }

    #[test]
    fn no_change_yields_nothing() {
        assert!(one("No visible change.").is_empty());
        assert!(one("no visible change").is_empty());
    }

    #[test]
    fn motion_with_direction() {
        assert_eq!(one("The ball moves right."), vec![t(ClaimKind::Motion, "ball", "moves", Some("right"))]);
        assert_eq!(one("The document scrolls down."), vec![t(ClaimKind::Motion, "document", "scrolls", Some("down"))]);
        assert_eq!(one("The camera pans to the left"), vec![t(ClaimKind::Motion, "camera", "pans", Some("left"))]);
    }

    #[test]
    fn conjunction_splitting() {
        assert_eq!(
            one("Hover on the link turns the text red and adds an underline."),
            vec![
                t(ClaimKind::Change, "text", "color", Some("red")),
                t(ClaimKind::Event, "underline", "appears", None),
            ]
        );
        assert_eq!(
            one("A man and a woman appear."),
            vec![t(ClaimKind::Event, "woman", "appears", None)]
        );
        assert_eq!(
            one("The door opens, then the cat enters and sits still."),
            vec![
                t(ClaimKind::Event, "door", "opens", None),
                t(ClaimKind::Event, "cat", "enters", None),
                t(ClaimKind::Observation, "cat", "motion", Some("stopped")),
            ]
        );
    }

    #[test]
    fn replacement_and_cut() {
        let claims = caption_claims(
            "The resume of Andrew Heilman is replaced by the resume of Melody T. McCloud.",
            FramePair(11, 12),
            (14.0, 15.0),
            7,
        );
        assert_eq!(claims.len(), 1);
        assert_eq!(claims[0].id, 7);
        assert_eq!(claims[0].subject, "resume");
        assert_eq!(claims[0].predicate, "replaced");
        assert_eq!(claims[0].value.as_deref(), Some("the resume of melody t mccloud"));
        assert_eq!(claims[0].clause, "The resume of Andrew Heilman is replaced by the resume of Melody T. McCloud");
        assert_eq!(
            one("The camera cuts to the TV studio with two anchors in front of a video wall."),
            vec![t(
                ClaimKind::Event,
                "scene",
                "cuts",
                Some("the tv studio with two anchors in front of a video wall")
            )]
        );
    }

    #[test]
    fn events_states_and_observations() {
        assert_eq!(one("The vase shatters."), vec![t(ClaimKind::Event, "vase", "shatters", None)]);
        assert_eq!(one("The vase sits intact."), vec![t(ClaimKind::Observation, "vase", "state", Some("intact"))]);
        assert_eq!(one("The man opens the door."), vec![t(ClaimKind::Event, "door", "opens", None)]);
        assert_eq!(one("The light is now off."), vec![t(ClaimKind::Change, "light", "state", Some("off"))]);
        assert_eq!(one("The sign becomes blue."), vec![t(ClaimKind::Change, "sign", "color", Some("blue"))]);
        assert_eq!(one("The car turns left."), vec![t(ClaimKind::Motion, "car", "turns", Some("left"))]);
        assert_eq!(
            one("Something odd happens."),
            vec![t(ClaimKind::Event, "scene", "changes", Some("something odd happens"))]
        );
    }

    #[test]
    fn sentence_splitting_keeps_initials() {
        assert_eq!(
            split_sentences("Melody T. McCloud appears. Dr. Smith waves! Done"),
            vec!["Melody T. McCloud appears", "Dr. Smith waves", "Done"]
        );
    }

    #[test]
    fn anchor_attributes() {
        let l = parse_anchor_attributes(
            "An elderly man in a gray suit and red tie stands at center. The door is closed. A closed window.",
            3.0,
        );
        assert_eq!(l.value("suit", "color"), Some("gray"));
        assert_eq!(l.value("tie", "color"), Some("red"));
        assert_eq!(l.value("door", "state"), Some("closed"));
        assert_eq!(l.value("window", "state"), Some("closed"));
        assert_eq!(l.value("man", "color"), None);
    }
}
