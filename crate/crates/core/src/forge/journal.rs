//! Append-only per-video journal. Replaying it yields the job's state;
//! every recorded artifact is checked against its digest on replay.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ForgeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pending,
    Segmented,
    Captioned,
    Aggregated,
    Done,
    Failed,
}

impl Stage {
    /// Stage reached by the next successful step.
    pub fn next(self) -> Option<Stage> {
        match self {
            Stage::Pending => Some(Stage::Segmented),
            Stage::Segmented => Some(Stage::Captioned),
            Stage::Captioned => Some(Stage::Aggregated),
            Stage::Aggregated => Some(Stage::Done),
            Stage::Done | Stage::Failed => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalEvent {
    Advance {
        seq: u64,
        stage: Stage,
        attempt: u32,
        /// File name in the job directory to its sha256.
        artifacts: BTreeMap<String, String>,
    },
    Fail {
        seq: u64,
        /// Stage that was being attempted.
        stage: Stage,
        attempt: u32,
        error: JobError,
    },
    Retry {
        seq: u64,
        attempt: u32,
    },
}

impl JournalEvent {
    fn seq(&self) -> u64 {
        match self {
            JournalEvent::Advance { seq, .. } | JournalEvent::Fail { seq, .. } | JournalEvent::Retry { seq, .. } => *seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobState {
    pub video_id: String,
    pub stage: Stage,
    /// Last stage completed successfully.
    pub completed: Stage,
    pub attempts: u32,
    pub last_error: Option<JobError>,
    pub artifacts: BTreeMap<String, String>,
}

impl JobState {
    pub fn new(video_id: impl Into<String>) -> Self {
        JobState {
            video_id: video_id.into(),
            stage: Stage::Pending,
            completed: Stage::Pending,
            attempts: 0,
            last_error: None,
            artifacts: BTreeMap::new(),
        }
    }

    fn apply(&mut self, ev: &JournalEvent) -> Result<(), String> {
        match ev {
            JournalEvent::Advance { stage, attempt, artifacts, .. } => {
                if self.stage == Stage::Failed || self.stage.next() != Some(*stage) {
                    return Err(format!("advance to {stage:?} from {:?}", self.stage));
                }
                self.stage = *stage;
                self.completed = *stage;
                self.attempts = self.attempts.max(*attempt);
                self.artifacts.extend(artifacts.clone());
            }
            JournalEvent::Fail { stage, attempt, error, .. } => {
                if self.stage.next() != Some(*stage) {
                    return Err(format!("failure of {stage:?} recorded at {:?}", self.stage));
                }
                self.stage = Stage::Failed;
                self.attempts = self.attempts.max(*attempt);
                self.last_error = Some(error.clone());
            }
            JournalEvent::Retry { attempt, .. } => {
                if self.stage != Stage::Failed || *attempt != self.attempts + 1 {
                    return Err(format!("retry {attempt} from {:?} after {} attempts", self.stage, self.attempts));
                }
                self.stage = self.completed;
                self.attempts = *attempt;
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file and a rename so readers never see a
/// partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ForgeError> {
    let io = |e| ForgeError::io(path, e);
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    {
        let mut f = File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

pub struct Journal {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl Journal {
    pub const FILE: &'static str = "journal.jsonl";

    /// Replays the journal in `dir`, verifying artifacts, and opens it for
    /// appending. A torn final line from a crash is dropped.
    pub fn open(dir: &Path, video_id: &str) -> Result<(Journal, JobState), ForgeError> {
        fs::create_dir_all(dir).map_err(|e| ForgeError::io(dir, e))?;
        let path = dir.join(Self::FILE);
        let (state, next_seq, keep) = replay(&path, dir, video_id)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ForgeError::io(&path, e))?;
        if let Some(len) = keep {
            log::warn!("{}: dropping torn last line", path.display());
            file.set_len(len).map_err(|e| ForgeError::io(&path, e))?;
        }
        Ok((Journal { path, file, next_seq }, state))
    }

    pub fn append(&mut self, ev: impl FnOnce(u64) -> JournalEvent) -> Result<(), ForgeError> {
        let ev = ev(self.next_seq);
        let mut line = serde_json::to_string(&ev).expect("serializable");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| ForgeError::io(&self.path, e))?;
        self.next_seq += 1;
        Ok(())
    }
}

fn corrupt(path: &Path, detail: String) -> ForgeError {
    ForgeError::Corrupt {
        path: path.display().to_string(),
        detail,
    }
}

/// State, next sequence number, and the length to truncate to when the
/// last line is torn.
fn replay(path: &Path, dir: &Path, video_id: &str) -> Result<(JobState, u64, Option<u64>), ForgeError> {
    let mut state = JobState::new(video_id);
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((state, 0, None)),
        Err(e) => return Err(ForgeError::io(path, e)),
    };
    let text = String::from_utf8(bytes).map_err(|_| corrupt(path, "journal is not UTF-8".into()))?;
    let torn_at = (!text.is_empty() && !text.ends_with('\n')).then(|| text.rfind('\n').map_or(0, |i| i + 1));
    let body = &text[..torn_at.unwrap_or(text.len())];
    let mut seq = 0u64;
    for (i, line) in body.lines().enumerate() {
        let ev: JournalEvent =
            serde_json::from_str(line).map_err(|e| corrupt(path, format!("line {}: {e}", i + 1)))?;
        if ev.seq() != seq {
            return Err(corrupt(path, format!("line {}: sequence {} where {seq} was expected", i + 1, ev.seq())));
        }
        state.apply(&ev).map_err(|m| corrupt(path, format!("line {}: {m}", i + 1)))?;
        seq += 1;
    }
    for (name, digest) in &state.artifacts {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| corrupt(&p, format!("recorded artifact unreadable: {e}")))?;
        if sha256_hex(&bytes) != *digest {
            return Err(corrupt(&p, "artifact does not match its recorded digest".into()));
        }
    }
    Ok((state, seq, torn_at.map(|n| n as u64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn advance(stage: Stage, attempt: u32) -> impl FnOnce(u64) -> JournalEvent {
        move |seq| JournalEvent::Advance {
            seq,
            stage,
            attempt,
            artifacts: BTreeMap::new(),
        }
    }

    #[test]
    fn replays_to_the_same_state() {
        let dir = tempfile::tempdir().unwrap();
        let (mut j, s) = Journal::open(dir.path(), "v").unwrap();
        assert_eq!(s.stage, Stage::Pending);
        j.append(advance(Stage::Segmented, 1)).unwrap();
        j.append(|seq| JournalEvent::Fail {
            seq,
            stage: Stage::Captioned,
            attempt: 1,
            error: JobError { kind: "frames".into(), message: "missing".into() },
        })
        .unwrap();
        j.append(|seq| JournalEvent::Retry { seq, attempt: 2 }).unwrap();
        drop(j);
        let (_, s) = Journal::open(dir.path(), "v").unwrap();
        assert_eq!((s.stage, s.completed, s.attempts), (Stage::Segmented, Stage::Segmented, 2));
        assert_eq!(s.last_error.unwrap().kind, "frames");
    }

    #[test]
    fn torn_tail_is_dropped_and_damage_refused() {
        let dir = tempfile::tempdir().unwrap();
        let (mut j, _) = Journal::open(dir.path(), "v").unwrap();
        j.append(advance(Stage::Segmented, 1)).unwrap();
        drop(j);
        let path = dir.path().join(Journal::FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"adv").unwrap();
        drop(f);
        let (mut j, s) = Journal::open(dir.path(), "v").unwrap();
        assert_eq!(s.stage, Stage::Segmented);
        j.append(advance(Stage::Captioned, 1)).unwrap();
        drop(j);
        assert_eq!(Journal::open(dir.path(), "v").unwrap().1.stage, Stage::Captioned);

        let text = fs::read_to_string(&path).unwrap().replace("\"seq\":1", "\"seq\":5");
        fs::write(&path, text).unwrap();
        assert!(matches!(Journal::open(dir.path(), "v"), Err(ForgeError::Corrupt { .. })));
    }

    #[test]
    fn artifacts_are_verified() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&dir.path().join("a.json"), b"{}").unwrap();
        let (mut j, _) = Journal::open(dir.path(), "v").unwrap();
        j.append(|seq| JournalEvent::Advance {
            seq,
            stage: Stage::Segmented,
            attempt: 1,
            artifacts: [("a.json".to_string(), sha256_hex(b"{}"))].into(),
        })
        .unwrap();
        drop(j);
        assert!(Journal::open(dir.path(), "v").is_ok());
        fs::write(dir.path().join("a.json"), b"[]").unwrap();
        assert!(matches!(Journal::open(dir.path(), "v"), Err(ForgeError::Corrupt { .. })));
    }

    #[test]
    fn illegal_transitions_are_corruption() {
        let mut s = JobState::new("v");
        let ev = JournalEvent::Advance { seq: 0, stage: Stage::Captioned, attempt: 1, artifacts: BTreeMap::new() };
        assert!(s.apply(&ev).is_err());
        assert!(s.apply(&JournalEvent::Retry { seq: 0, attempt: 1 }).is_err());
    }
}
