//! Manifest-driven batch construction of caption documents with
//! per-video journals, resume, failure isolation and corpus statistics.
//!
//! State directory layout:
//!
//! ```text
//! <state>/forge.json                 pipeline configuration digest
//! <state>/index.json                 summary of every job
//! <state>/jobs/<video_id>/journal.jsonl
//! <state>/jobs/<video_id>/segments.json, captions.json, document.json, audit.json
//! ```

pub mod journal;
pub mod stages;
pub mod stats;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::AggregateConfig;
use crate::backend::{Backend, BackendError};
use crate::cuts::CutDetectConfig;
use crate::document::{deserialize_document, serialize_document, CaptionDocument, VideoRef};
use crate::residual::{CaptionConfig, SegmentCaptions};
use crate::segment::{SegmentPlan, SegmentationConfig};

pub use journal::{JobError, JobState, Journal, JournalEvent, Stage};
pub use stages::VideoBundle;
pub use stats::{compute_stats, redundancy_report, CorpusStats, PerSecondBaseline, RedundancyReport};

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(
        "state directory is damaged at {path}: {detail}. Delete that job's directory under jobs/ to redo the video, \
         or restore the file from a backup, then run again"
    )]
    Corrupt { path: String, detail: String },
    #[error("{0}")]
    Input(String),
    #[error("forge config: {0}")]
    Config(String),
}

impl ForgeError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        ForgeError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeConfig {
    /// Worker threads; 0 means one per CPU.
    pub workers: usize,
    pub max_attempts: u32,
    pub segmentation: SegmentationConfig,
    pub cuts: CutDetectConfig,
    pub caption: CaptionConfig,
    pub aggregate: AggregateConfig,
    /// Leave every job once it reaches this stage, as if the run had been
    /// killed there.
    #[serde(skip)]
    pub stop_after: Option<Stage>,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            workers: 0,
            max_attempts: 2,
            segmentation: SegmentationConfig::default(),
            cuts: CutDetectConfig::default(),
            caption: CaptionConfig::default(),
            aggregate: AggregateConfig::default(),
            stop_after: None,
        }
    }
}

impl ForgeConfig {
    /// Digest of everything that shapes the outputs. Worker count and retry
    /// policy are excluded, so they may change between resumed runs.
    pub fn pipeline_digest(&self) -> String {
        let v = serde_json::json!({
            "segmentation": self.segmentation,
            "cuts": self.cuts,
            "caption": self.caption,
            "aggregate": self.aggregate,
        });
        journal::sha256_hex(v.to_string().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgeIndex {
    pub config_digest: String,
    pub jobs: Vec<JobState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgeReport {
    pub jobs: Vec<JobState>,
    pub stats: Option<CorpusStats>,
}

pub struct Backends<'a> {
    pub vision: &'a dyn Backend,
    pub text: Option<&'a dyn Backend>,
}

const SEGMENTS: &str = "segments.json";
const CAPTIONS: &str = "captions.json";
const DOCUMENT: &str = "document.json";
const AUDIT: &str = "audit.json";
const INDEX: &str = "index.json";
const MARKER: &str = "forge.json";

fn job_dir(state: &Path, video_id: &str) -> PathBuf {
    state.join("jobs").join(video_id)
}

fn check_id(id: &str) -> Result<(), ForgeError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ForgeError::Input(format!(
            "video id {id:?} cannot name a directory; use letters, digits, '-', '_' or '.'"
        )))
    }
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ForgeError> {
    let bytes = fs::read(path).map_err(|e| ForgeError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| ForgeError::Corrupt {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Verifies or creates the configuration marker.
fn claim_state_dir(state: &Path, cfg: &ForgeConfig) -> Result<(), ForgeError> {
    fs::create_dir_all(state.join("jobs")).map_err(|e| ForgeError::io(state, e))?;
    let marker = state.join(MARKER);
    let digest = cfg.pipeline_digest();
    if marker.exists() {
        let v: serde_json::Value = read_json(&marker)?;
        if v.get("config_digest").and_then(|d| d.as_str()) != Some(digest.as_str()) {
            return Err(ForgeError::Config(format!(
                "{} was created with a different pipeline configuration; use a fresh state directory",
                state.display()
            )));
        }
        return Ok(());
    }
    journal::write_atomic(&marker, &pretty(&serde_json::json!({ "config_digest": digest })))
}

struct Job<'a> {
    video: &'a VideoRef,
    base: &'a Path,
    dir: PathBuf,
    journal: Journal,
    state: JobState,
}

impl Job<'_> {
    /// Runs the next stage and returns the artifacts it wrote.
    fn step(&self, next: Stage, cfg: &ForgeConfig, backends: &Backends) -> crate::Result<BTreeMap<String, String>> {
        let write = |name: &str, bytes: Vec<u8>| -> crate::Result<(String, String)> {
            journal::write_atomic(&self.dir.join(name), &bytes)?;
            Ok((name.to_string(), journal::sha256_hex(&bytes)))
        };
        let mut out = BTreeMap::new();
        match next {
            Stage::Segmented => {
                let bundle = VideoBundle::for_video(self.video, self.base)?;
                let plan = stages::segment_video(self.video, &bundle, &cfg.segmentation, &cfg.cuts)?;
                out.extend([write(SEGMENTS, pretty(&plan))?]);
            }
            Stage::Captioned => {
                let bundle = VideoBundle::for_video(self.video, self.base)?;
                let plan: SegmentPlan = read_json(&self.dir.join(SEGMENTS))?;
                let captions = stages::caption_video(&plan, &bundle, backends.vision, &cfg.caption)?;
                out.extend([write(CAPTIONS, pretty(&captions))?]);
            }
            Stage::Aggregated => {
                let plan: SegmentPlan = read_json(&self.dir.join(SEGMENTS))?;
                let captions: Vec<SegmentCaptions> = read_json(&self.dir.join(CAPTIONS))?;
                let (doc, audit) = stages::aggregate_video(&plan, &captions, backends.text, &cfg.aggregate)?;
                let bytes = serialize_document(&doc).map_err(crate::aggregate::AggregateError::from)?;
                out.extend([write(DOCUMENT, bytes)?, write(AUDIT, pretty(&audit))?]);
            }
            Stage::Done => {
                let bytes = fs::read(self.dir.join(DOCUMENT)).map_err(|e| crate::Error::io(self.dir.join(DOCUMENT), e))?;
                deserialize_document(&bytes)?;
            }
            Stage::Pending | Stage::Failed => unreachable!("not a target stage"),
        }
        Ok(out)
    }

    fn run(mut self, cfg: &ForgeConfig, backends: &Backends) -> Result<JobState, ForgeError> {
        // Attempts started by this run; a failed job gets a fresh budget.
        let mut started = 0;
        if self.state.stage != Stage::Failed {
            self.state.attempts = self.state.attempts.max(1);
            started = 1;
        }
        loop {
            if self.state.stage == Stage::Failed {
                if started >= cfg.max_attempts {
                    break;
                }
                started += 1;
                let attempt = self.state.attempts + 1;
                self.journal.append(|seq| JournalEvent::Retry { seq, attempt })?;
                self.state.stage = self.state.completed;
                self.state.attempts = attempt;
                continue;
            }
            if cfg.stop_after == Some(self.state.stage) {
                break;
            }
            let Some(next) = self.state.stage.next() else {
                break;
            };
            let attempt = self.state.attempts;
            match self.step(next, cfg, backends) {
                Ok(artifacts) => {
                    self.journal.append(|seq| JournalEvent::Advance {
                        seq,
                        stage: next,
                        attempt,
                        artifacts: artifacts.clone(),
                    })?;
                    self.state.stage = next;
                    self.state.completed = next;
                    self.state.artifacts.extend(artifacts);
                }
                Err(e) => {
                    log::warn!("{}: {next:?} failed (attempt {attempt}): {e}", self.video.video_id);
                    let error = JobError {
                        kind: e.kind().to_string(),
                        message: e.to_string(),
                    };
                    self.journal.append(|seq| JournalEvent::Fail {
                        seq,
                        stage: next,
                        attempt,
                        error: error.clone(),
                    })?;
                    self.state.stage = Stage::Failed;
                    self.state.last_error = Some(error);
                }
            }
        }
        Ok(self.state)
    }
}

/// Processes every manifest video through segmentation, captioning and
/// aggregation. `base` resolves relative bundle paths. Re-running with the
/// same state directory resumes where each job stopped.
pub fn run_forge(
    manifest: &[VideoRef],
    base: &Path,
    state: &Path,
    cfg: &ForgeConfig,
    backends: &Backends,
) -> Result<ForgeReport, ForgeError> {
    if cfg.max_attempts == 0 {
        return Err(ForgeError::Config("max_attempts must be at least 1".into()));
    }
    cfg.caption
        .validate()
        .map_err(|e| ForgeError::Config(e.to_string()))?;
    for v in manifest {
        check_id(&v.video_id)?;
    }
    claim_state_dir(state, cfg)?;

    // Replay every journal before starting so damage stops the run early.
    let mut jobs = Vec::with_capacity(manifest.len());
    for v in manifest {
        let dir = job_dir(state, &v.video_id);
        let (journal, st) = Journal::open(&dir, &v.video_id)?;
        jobs.push(Job {
            video: v,
            base,
            dir,
            journal,
            state: st,
        });
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ForgeError::Config(e.to_string()))?;
    let states: Vec<JobState> = pool.install(|| {
        jobs.into_par_iter()
            .map(|job| job.run(cfg, backends))
            .collect::<Result<_, _>>()
    })?;

    let mut sorted = states.clone();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let index = ForgeIndex {
        config_digest: cfg.pipeline_digest(),
        jobs: sorted,
    };
    journal::write_atomic(&state.join(INDEX), &pretty(&index))?;

    let done = load_documents(state, &states)?;
    let baselines = load_baselines(manifest, base, &states);
    let stats = if done.is_empty() {
        None
    } else {
        Some(compute_stats(&done, &baselines)?)
    };
    Ok(ForgeReport { jobs: states, stats })
}

fn load_documents(state: &Path, jobs: &[JobState]) -> Result<Vec<CaptionDocument>, ForgeError> {
    jobs.iter()
        .filter(|j| j.stage == Stage::Done)
        .map(|j| {
            let path = job_dir(state, &j.video_id).join(DOCUMENT);
            let bytes = fs::read(&path).map_err(|e| ForgeError::io(&path, e))?;
            deserialize_document(&bytes).map_err(|e| ForgeError::Corrupt {
                path: path.display().to_string(),
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Optional `baseline.json` per-second captions in each finished bundle.
fn load_baselines(manifest: &[VideoRef], base: &Path, jobs: &[JobState]) -> BTreeMap<String, PerSecondBaseline> {
    let done: std::collections::HashSet<&str> =
        jobs.iter().filter(|j| j.stage == Stage::Done).map(|j| j.video_id.as_str()).collect();
    manifest
        .iter()
        .filter(|v| done.contains(v.video_id.as_str()))
        .filter_map(|v| {
            let bundle = VideoBundle::for_video(v, base).ok()?;
            let b: PerSecondBaseline = read_json(&bundle.root.join("baseline.json")).ok()?;
            (b.video_id == v.video_id).then(|| (v.video_id.clone(), b))
        })
        .collect()
}

/// Job states replayed from the journals of a state directory, with the
/// documents of finished jobs.
pub fn load_state(state: &Path) -> Result<(Vec<JobState>, Vec<CaptionDocument>), ForgeError> {
    let jobs_root = state.join("jobs");
    let mut ids: Vec<String> = fs::read_dir(&jobs_root)
        .map_err(|e| ForgeError::io(&jobs_root, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    ids.sort();
    let mut jobs = Vec::new();
    for id in ids {
        let (_, st) = Journal::open(&jobs_root.join(&id), &id)?;
        jobs.push(st);
    }
    let docs = load_documents(state, &jobs)?;
    Ok((jobs, docs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_must_be_path_safe() {
        assert!(check_id("vid_01.a-b").is_ok());
        for bad in ["", "..", ".hidden", "a/b", "a b"] {
            assert!(check_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn digest_ignores_worker_count() {
        let a = ForgeConfig::default();
        let b = ForgeConfig { workers: 8, max_attempts: 5, ..ForgeConfig::default() };
        assert_eq!(a.pipeline_digest(), b.pipeline_digest());
        let mut c = ForgeConfig::default();
        c.caption.window_size = 4;
        assert_ne!(a.pipeline_digest(), c.pipeline_digest());
    }

    #[test]
    fn state_dir_refuses_other_configs() {
        let dir = tempfile::tempdir().unwrap();
        claim_state_dir(dir.path(), &ForgeConfig::default()).unwrap();
        claim_state_dir(dir.path(), &ForgeConfig::default()).unwrap();
        let mut other = ForgeConfig::default();
        other.caption.overlap = 2;
        assert!(matches!(claim_state_dir(dir.path(), &other), Err(ForgeError::Config(_))));
    }
}
