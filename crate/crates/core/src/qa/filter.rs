//! Re-labeling and quality filtering. Every decision is a pure function of
//! the recorded votes, so replaying a vote log reproduces all states.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::types::{Capability, Difficulty, FilterState, Prediction, QaQuestion, Vote, VotePhase, VoteRecord};
use super::QaError;

pub const RELABEL_VOTERS: usize = 4;
pub const TEXT_ONLY_VOTERS: usize = 2;
pub const PHASE_A_VOTERS: usize = 3;
pub const PHASE_B_VOTERS: usize = 3;

/// How a winning label must compare with the number of `unknown` votes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownRule {
    /// count(label) > count(unknown)
    #[default]
    Strict,
    /// count(label) >= count(unknown)
    AtLeast,
}

/// Accepted label, or `None` when the question should be discarded.
pub fn relabel_capability(votes: &[Vote], rule: UnknownRule) -> Result<Option<Capability>, QaError> {
    if votes.len() != RELABEL_VOTERS {
        return Err(QaError::Input(format!(
            "relabeling takes {RELABEL_VOTERS} votes, got {}",
            votes.len()
        )));
    }
    let mut counts: BTreeMap<Capability, usize> = BTreeMap::new();
    let mut unknown = 0;
    for v in votes {
        match v {
            Vote::Capability(c) => *counts.entry(*c).or_default() += 1,
            Vote::Unknown => unknown += 1,
            other => return Err(QaError::Input(format!("{other:?} is not a capability vote"))),
        }
    }
    let Some(&best) = counts.values().max() else {
        return Ok(None);
    };
    let leaders: Vec<Capability> = counts.iter().filter(|(_, &n)| n == best).map(|(&c, _)| c).collect();
    let beats_unknown = match rule {
        UnknownRule::Strict => best > unknown,
        UnknownRule::AtLeast => best >= unknown,
    };
    Ok((leaders.len() == 1 && best >= 2 && beats_unknown).then(|| leaders[0]))
}

/// True when the question survives: no text-only model found the answer.
pub fn text_leak_filter(ground_truth: u8, answers: &[Prediction]) -> Result<bool, QaError> {
    if answers.len() != TEXT_ONLY_VOTERS {
        return Err(QaError::Input(format!(
            "text-only filtering takes {TEXT_ONLY_VOTERS} answers, got {}",
            answers.len()
        )));
    }
    Ok(!answers.iter().any(|a| a.option() == Some(ground_truth)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseA {
    Normal,
    SuspectedWrongGt,
    PhaseBPending,
}

/// `unknown` never matches and never counts towards a unanimous choice.
pub fn phase_a_classify(ground_truth: u8, answers: &[Prediction; PHASE_A_VOTERS]) -> PhaseA {
    let matches = answers.iter().filter(|a| a.option() == Some(ground_truth)).count();
    let unanimous = answers[0].option().is_some() && answers.iter().all(|a| *a == answers[0]);
    if matches >= 2 {
        PhaseA::Normal
    } else if matches == 0 && unanimous {
        PhaseA::SuspectedWrongGt
    } else {
        PhaseA::PhaseBPending
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseB {
    ConsensusHard,
    LikelyCorrect,
    Discarded,
}

pub fn phase_b_classify(confirmations: &[bool; PHASE_B_VOTERS]) -> PhaseB {
    match confirmations.iter().filter(|&&c| c).count() {
        3 => PhaseB::ConsensusHard,
        2 => PhaseB::LikelyCorrect,
        _ => PhaseB::Discarded,
    }
}

pub fn assign_difficulty(q: &QaQuestion) -> Result<Difficulty, QaError> {
    match (q.filter_state, q.phase_a_matches) {
        (FilterState::Normal, Some(3)) => Ok(Difficulty::Easy),
        (FilterState::Normal, Some(2)) => Ok(Difficulty::Medium),
        (FilterState::LikelyCorrect, _) => Ok(Difficulty::Hard),
        (FilterState::ConsensusHard, _) => Ok(Difficulty::VeryHard),
        (state, matches) => Err(QaError::State(format!(
            "{} is not retained (state {state:?}, phase A matches {matches:?})",
            q.question_id
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncompleteQuestion {
    pub question_id: String,
    pub phase: VotePhase,
    pub expected: usize,
    pub found: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub counts: BTreeMap<String, usize>,
    /// Questions whose vote log lacks a phase they need; they keep the
    /// state reached so far and are not retained.
    pub incomplete: Vec<IncompleteQuestion>,
}

fn state_name(s: FilterState) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Runs every question through relabeling, the text-only filter and both
/// visual phases, then assigns difficulty to the retained ones. Votes per
/// phase are ordered by voter id.
pub fn run_filters(
    pool: &mut [QaQuestion],
    votes: &[VoteRecord],
    rule: UnknownRule,
) -> Result<FilterReport, QaError> {
    let mut by_question: BTreeMap<&str, BTreeMap<VotePhase, Vec<&VoteRecord>>> = BTreeMap::new();
    for v in votes {
        v.validate()?;
        by_question
            .entry(v.question_id.as_str())
            .or_default()
            .entry(v.phase)
            .or_default()
            .push(v);
    }
    for phases in by_question.values_mut() {
        for list in phases.values_mut() {
            list.sort_by(|a, b| a.voter_id.cmp(&b.voter_id));
            if let Some(w) = list.windows(2).find(|w| w[0].voter_id == w[1].voter_id) {
                return Err(QaError::Input(format!(
                    "{}: voter {} voted twice in phase {:?}",
                    w[0].question_id, w[0].voter_id, w[0].phase
                )));
            }
        }
    }

    let empty = BTreeMap::new();
    let mut report = FilterReport::default();
    for q in pool.iter_mut() {
        q.validate()?;
        q.capability = None;
        q.difficulty = None;
        q.phase_a_matches = None;
        q.filter_state = FilterState::Pool;
        let phases = by_question.get(q.question_id.as_str()).unwrap_or(&empty);
        if let Err(missing) = filter_one(q, phases, rule) {
            report.incomplete.push(missing);
        }
        if q.filter_state.is_retained() {
            q.difficulty = Some(assign_difficulty(q)?);
        }
        *report.counts.entry(state_name(q.filter_state)).or_default() += 1;
    }
    Ok(report)
}

fn take(
    q: &QaQuestion,
    phases: &BTreeMap<VotePhase, Vec<&VoteRecord>>,
    phase: VotePhase,
    expected: usize,
) -> Result<Vec<Vote>, IncompleteQuestion> {
    let found: Vec<Vote> = phases
        .get(&phase)
        .map(|l| l.iter().map(|r| r.vote).collect())
        .unwrap_or_default();
    if found.len() == expected {
        Ok(found)
    } else {
        Err(IncompleteQuestion {
            question_id: q.question_id.clone(),
            phase,
            expected,
            found: found.len(),
        })
    }
}

fn predictions(votes: &[Vote]) -> Vec<Prediction> {
    votes.iter().map(|v| v.as_prediction().expect("validated")).collect()
}

fn filter_one(
    q: &mut QaQuestion,
    phases: &BTreeMap<VotePhase, Vec<&VoteRecord>>,
    rule: UnknownRule,
) -> Result<(), IncompleteQuestion> {
    let relabel = take(q, phases, VotePhase::Relabel, RELABEL_VOTERS)?;
    match relabel_capability(&relabel, rule).expect("validated") {
        Some(c) => q.capability = Some(c),
        None => {
            q.filter_state = FilterState::Discarded;
            return Ok(());
        }
    }

    let text = predictions(&take(q, phases, VotePhase::TextOnly, TEXT_ONLY_VOTERS)?);
    if !text_leak_filter(q.ground_truth, &text).expect("two answers") {
        q.filter_state = FilterState::TextLeak;
        return Ok(());
    }

    let a = predictions(&take(q, phases, VotePhase::PhaseA, PHASE_A_VOTERS)?);
    let a: [Prediction; 3] = [a[0], a[1], a[2]];
    q.phase_a_matches = Some(a.iter().filter(|p| p.option() == Some(q.ground_truth)).count() as u8);
    match phase_a_classify(q.ground_truth, &a) {
        PhaseA::Normal => {
            q.filter_state = FilterState::Normal;
            return Ok(());
        }
        PhaseA::SuspectedWrongGt => {
            q.filter_state = FilterState::SuspectedWrongGt;
            return Ok(());
        }
        PhaseA::PhaseBPending => q.filter_state = FilterState::PhaseBPending,
    }

    let b = take(q, phases, VotePhase::PhaseB, PHASE_B_VOTERS)?;
    let confirm = |v: &Vote| matches!(v, Vote::Confirm(true));
    q.filter_state = match phase_b_classify(&[confirm(&b[0]), confirm(&b[1]), confirm(&b[2])]) {
        PhaseB::ConsensusHard => FilterState::ConsensusHard,
        PhaseB::LikelyCorrect => FilterState::LikelyCorrect,
        PhaseB::Discarded => FilterState::Discarded,
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::types::SourceBenchmark;

    use Capability::*;

    fn cap(c: Capability) -> Vote {
        Vote::Capability(c)
    }

    #[test]
    fn relabel_examples() {
        let r = |v: &[Vote]| relabel_capability(v, UnknownRule::Strict).unwrap();
        assert_eq!(r(&[cap(ActionRecognition), cap(ActionRecognition), Vote::Unknown, Vote::Unknown]), None);
        assert_eq!(
            r(&[cap(ActionRecognition), cap(ActionRecognition), cap(ActionRecognition), cap(Counting)]),
            Some(ActionRecognition)
        );
        assert_eq!(r(&[cap(ActionRecognition), cap(ActionRecognition), cap(Counting), cap(Counting)]), None);
        assert_eq!(r(&[cap(Speed), cap(Speed), cap(Counting), Vote::Unknown]), Some(Speed));
        assert_eq!(r(&[cap(Speed), cap(Counting), cap(Rotation), Vote::Unknown]), None);
        assert_eq!(r(&[Vote::Unknown; 4]), None);
        assert!(relabel_capability(&[cap(Speed); 3], UnknownRule::Strict).is_err());
    }

    #[test]
    fn lenient_rule_accepts_ties_with_unknown() {
        let v = [cap(ActionRecognition), cap(ActionRecognition), Vote::Unknown, Vote::Unknown];
        assert_eq!(relabel_capability(&v, UnknownRule::AtLeast).unwrap(), Some(ActionRecognition));
    }

    #[test]
    fn text_leak_examples() {
        let p = Prediction::Option;
        assert!(text_leak_filter(1, &[p(0), p(2)]).unwrap());
        assert!(!text_leak_filter(1, &[p(1), p(2)]).unwrap());
        assert!(!text_leak_filter(1, &[p(1), p(1)]).unwrap());
        assert!(text_leak_filter(1, &[Prediction::UNKNOWN, p(0)]).unwrap());
    }

    #[test]
    fn phase_examples() {
        let p = Prediction::Option;
        assert_eq!(phase_a_classify(0, &[p(0), p(0), p(0)]), PhaseA::Normal);
        assert_eq!(phase_a_classify(0, &[p(1), p(1), p(1)]), PhaseA::SuspectedWrongGt);
        assert_eq!(phase_a_classify(0, &[p(0), p(1), p(1)]), PhaseA::PhaseBPending);
        assert_eq!(phase_a_classify(0, &[p(1), p(2), p(1)]), PhaseA::PhaseBPending);
        let u = Prediction::UNKNOWN;
        assert_eq!(phase_a_classify(0, &[u, u, u]), PhaseA::PhaseBPending);
        assert_eq!(phase_b_classify(&[true, true, true]), PhaseB::ConsensusHard);
        assert_eq!(phase_b_classify(&[true, true, false]), PhaseB::LikelyCorrect);
        assert_eq!(phase_b_classify(&[true, false, false]), PhaseB::Discarded);
    }

    fn question(id: &str, gt: u8) -> QaQuestion {
        QaQuestion {
            question_id: id.into(),
            source_benchmark: SourceBenchmark::Mvbench,
            source_id: id.into(),
            video_id: "v".into(),
            question: "What happens?".into(),
            options: ["a".into(), "b".into(), "c".into(), "d".into()],
            ground_truth: gt,
            capability: None,
            difficulty: None,
            filter_state: FilterState::Pool,
            phase_a_matches: None,
        }
    }

    fn votes(id: &str, phase: VotePhase, vs: &[Vote]) -> Vec<VoteRecord> {
        vs.iter()
            .enumerate()
            .map(|(i, &vote)| VoteRecord {
                question_id: id.into(),
                voter_id: format!("m{i}"),
                phase,
                vote,
            })
            .collect()
    }

    #[test]
    fn pipeline_assigns_states_and_difficulty() {
        let mut pool = vec![question("easy", 0), question("leak", 0), question("hard", 2), question("gap", 1)];
        let mut log = Vec::new();
        for id in ["easy", "leak", "hard", "gap"] {
            log.extend(votes(id, VotePhase::Relabel, &[cap(Speed), cap(Speed), cap(Speed), Vote::Unknown]));
        }
        log.extend(votes("easy", VotePhase::TextOnly, &[Vote::Answer(1), Vote::Answer(2)]));
        log.extend(votes("easy", VotePhase::PhaseA, &[Vote::Answer(0); 3]));
        log.extend(votes("leak", VotePhase::TextOnly, &[Vote::Answer(0), Vote::Unknown]));
        log.extend(votes("hard", VotePhase::TextOnly, &[Vote::Unknown, Vote::Unknown]));
        log.extend(votes("hard", VotePhase::PhaseA, &[Vote::Answer(2), Vote::Answer(0), Vote::Answer(1)]));
        log.extend(votes("hard", VotePhase::PhaseB, &[Vote::Confirm(true), Vote::Confirm(false), Vote::Confirm(true)]));
        log.extend(votes("gap", VotePhase::TextOnly, &[Vote::Answer(0), Vote::Answer(2)]));
        // reversed log order must not matter
        log.reverse();

        let report = run_filters(&mut pool, &log, UnknownRule::Strict).unwrap();
        assert_eq!(pool[0].filter_state, FilterState::Normal);
        assert_eq!(pool[0].difficulty, Some(Difficulty::Easy));
        assert_eq!(pool[1].filter_state, FilterState::TextLeak);
        assert_eq!(pool[2].filter_state, FilterState::LikelyCorrect);
        assert_eq!(pool[2].difficulty, Some(Difficulty::Hard));
        assert_eq!(pool[3].filter_state, FilterState::Pool);
        assert_eq!(report.incomplete.len(), 1);
        assert_eq!(report.incomplete[0].phase, VotePhase::PhaseA);

        let again = pool.clone();
        run_filters(&mut pool, &log, UnknownRule::Strict).unwrap();
        assert_eq!(pool, again);
    }

    #[test]
    fn difficulty_requires_retention() {
        let mut q = question("x", 0);
        q.filter_state = FilterState::TextLeak;
        assert!(matches!(assign_difficulty(&q), Err(QaError::State(_))));
        q.filter_state = FilterState::ConsensusHard;
        assert_eq!(assign_difficulty(&q).unwrap(), Difficulty::VeryHard);
        q.filter_state = FilterState::Normal;
        q.phase_a_matches = Some(2);
        assert_eq!(assign_difficulty(&q).unwrap(), Difficulty::Medium);
    }

    #[test]
    fn duplicate_voters_are_rejected() {
        let mut pool = vec![question("q", 0)];
        let mut log = votes("q", VotePhase::Relabel, &[cap(Speed); 4]);
        log[1].voter_id = "m0".into();
        assert!(run_filters(&mut pool, &log, UnknownRule::Strict).is_err());
    }
}
