use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::QaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    ActionRecognition,
    AttributeRecognition,
    CameraMovement,
    Counting,
    Direction,
    HolisticUnderstanding,
    ObjectTracking,
    Reasoning,
    Rotation,
    Speed,
    StateChange,
    TemporalGrounding,
    TemporalSequence,
    Trajectory,
}

impl Capability {
    pub const ALL: [Capability; 14] = [
        Capability::ActionRecognition,
        Capability::AttributeRecognition,
        Capability::CameraMovement,
        Capability::Counting,
        Capability::Direction,
        Capability::HolisticUnderstanding,
        Capability::ObjectTracking,
        Capability::Reasoning,
        Capability::Rotation,
        Capability::Speed,
        Capability::StateChange,
        Capability::TemporalGrounding,
        Capability::TemporalSequence,
        Capability::Trajectory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Capability::ActionRecognition => "action_recognition",
            Capability::AttributeRecognition => "attribute_recognition",
            Capability::CameraMovement => "camera_movement",
            Capability::Counting => "counting",
            Capability::Direction => "direction",
            Capability::HolisticUnderstanding => "holistic_understanding",
            Capability::ObjectTracking => "object_tracking",
            Capability::Reasoning => "reasoning",
            Capability::Rotation => "rotation",
            Capability::Speed => "speed",
            Capability::StateChange => "state_change",
            Capability::TemporalGrounding => "temporal_grounding",
            Capability::TemporalSequence => "temporal_sequence",
            Capability::Trajectory => "trajectory",
        }
    }

    pub fn index(self) -> usize {
        Capability::ALL.iter().position(|&c| c == self).expect("listed")
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Capability {
    type Err = QaError;

    /// Accepts `state_change`, `state change` or `State Change`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Capability::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| QaError::Input(format!("unknown capability {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceBenchmark {
    Mvbench,
    Motionbench,
    Tempcompass,
    Tomato,
    Etbench,
    Longvideobench,
    Lvbench,
    Videomme,
}

impl SourceBenchmark {
    pub const ALL: [SourceBenchmark; 8] = [
        SourceBenchmark::Mvbench,
        SourceBenchmark::Motionbench,
        SourceBenchmark::Tempcompass,
        SourceBenchmark::Tomato,
        SourceBenchmark::Etbench,
        SourceBenchmark::Longvideobench,
        SourceBenchmark::Lvbench,
        SourceBenchmark::Videomme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceBenchmark::Mvbench => "mvbench",
            SourceBenchmark::Motionbench => "motionbench",
            SourceBenchmark::Tempcompass => "tempcompass",
            SourceBenchmark::Tomato => "tomato",
            SourceBenchmark::Etbench => "etbench",
            SourceBenchmark::Longvideobench => "longvideobench",
            SourceBenchmark::Lvbench => "lvbench",
            SourceBenchmark::Videomme => "videomme",
        }
    }
}

impl FromStr for SourceBenchmark {
    type Err = QaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        SourceBenchmark::ALL
            .into_iter()
            .find(|b| b.name() == norm)
            .ok_or_else(|| QaError::Input(format!("unknown source benchmark {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    VeryHard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard, Difficulty::VeryHard];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
            Difficulty::VeryHard => "very_hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterState {
    #[default]
    Pool,
    TextLeak,
    Normal,
    SuspectedWrongGt,
    PhaseBPending,
    ConsensusHard,
    LikelyCorrect,
    Discarded,
}

impl FilterState {
    pub fn is_retained(self) -> bool {
        matches!(self, FilterState::Normal | FilterState::ConsensusHard | FilterState::LikelyCorrect)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaQuestion {
    pub question_id: String,
    pub source_benchmark: SourceBenchmark,
    /// Identifier of the question in its source benchmark.
    pub source_id: String,
    pub video_id: String,
    pub question: String,
    pub options: [String; 4],
    pub ground_truth: u8,
    #[serde(default)]
    pub capability: Option<Capability>,
    #[serde(default)]
    pub difficulty: Option<Difficulty>,
    #[serde(default)]
    pub filter_state: FilterState,
    /// Phase A voters that picked the ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_a_matches: Option<u8>,
}

impl QaQuestion {
    pub fn validate(&self) -> Result<(), QaError> {
        if self.ground_truth > 3 {
            return Err(QaError::Input(format!(
                "{}: ground truth {} is not an option index",
                self.question_id, self.ground_truth
            )));
        }
        if self.options.iter().any(|o| o.trim().is_empty()) {
            return Err(QaError::Input(format!("{}: empty answer option", self.question_id)));
        }
        Ok(())
    }
}

/// An option index or the `unknown` token. Serialized as a number or the
/// string `"unknown"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Option(u8),
    Unknown(UnknownToken),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnknownToken {
    #[serde(rename = "unknown")]
    Unknown,
}

impl Prediction {
    pub const UNKNOWN: Prediction = Prediction::Unknown(UnknownToken::Unknown);

    pub fn option(self) -> Option<u8> {
        match self {
            Prediction::Option(i) => Some(i),
            Prediction::Unknown(_) => None,
        }
    }

    pub fn is_unknown(self) -> bool {
        matches!(self, Prediction::Unknown(_))
    }

    pub fn letter(self) -> String {
        match self {
            Prediction::Option(i) => ((b'A' + i) as char).to_string(),
            Prediction::Unknown(_) => "unknown".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotePhase {
    Relabel,
    TextOnly,
    PhaseA,
    PhaseB,
    Eval,
}

/// A single voter's output. On disk: a capability name, an option index,
/// a boolean confirmation, or `"unknown"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawVote", into = "RawVote")]
pub enum Vote {
    Capability(Capability),
    Answer(u8),
    Confirm(bool),
    Unknown,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawVote {
    Index(u8),
    Flag(bool),
    Text(String),
}

impl TryFrom<RawVote> for Vote {
    type Error = String;

    fn try_from(raw: RawVote) -> Result<Self, Self::Error> {
        Ok(match raw {
            RawVote::Index(i) => Vote::Answer(i),
            RawVote::Flag(b) => Vote::Confirm(b),
            RawVote::Text(t) if t.trim().eq_ignore_ascii_case("unknown") => Vote::Unknown,
            RawVote::Text(t) => Vote::Capability(t.parse().map_err(|e: QaError| e.to_string())?),
        })
    }
}

impl From<Vote> for RawVote {
    fn from(v: Vote) -> Self {
        match v {
            Vote::Capability(c) => RawVote::Text(c.name().into()),
            Vote::Answer(i) => RawVote::Index(i),
            Vote::Confirm(b) => RawVote::Flag(b),
            Vote::Unknown => RawVote::Text("unknown".into()),
        }
    }
}

impl Vote {
    /// Answer votes as predictions; `None` for votes of another kind.
    pub fn as_prediction(self) -> Option<Prediction> {
        match self {
            Vote::Answer(i) if i <= 3 => Some(Prediction::Option(i)),
            Vote::Unknown => Some(Prediction::UNKNOWN),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteRecord {
    pub question_id: String,
    pub voter_id: String,
    pub phase: VotePhase,
    pub vote: Vote,
}

impl VoteRecord {
    pub fn validate(&self) -> Result<(), QaError> {
        let ok = match self.phase {
            VotePhase::Relabel => matches!(self.vote, Vote::Capability(_) | Vote::Unknown),
            VotePhase::TextOnly | VotePhase::PhaseA | VotePhase::Eval => self.vote.as_prediction().is_some(),
            VotePhase::PhaseB => matches!(self.vote, Vote::Confirm(_)),
        };
        if ok {
            Ok(())
        } else {
            Err(QaError::Input(format!(
                "{} voter {}: vote {:?} does not fit phase {:?}",
                self.question_id, self.voter_id, self.vote, self.phase
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalResult {
    pub question_id: String,
    pub capability: Option<Capability>,
    pub predicted: Prediction,
    pub rationale: String,
    pub observation: String,
    pub correct: bool,
    /// The reply never yielded a usable choice, even after the repair prompt.
    #[serde(default)]
    pub parse_failure: bool,
    /// The backend failed; the prediction was recorded as unknown.
    #[serde(default)]
    pub errored: bool,
}
