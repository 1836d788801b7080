//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists with the same field names as the JSON files the CLI writes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use codeccap_core::aggregate::{aggregate_document, AggregateConfig};
use codeccap_core::backend::{Backend as _, BackendConfig, BackendMode, ModelClient};
use codeccap_core::cuts::{detect_cuts as core_detect_cuts, import_cuts as core_import_cuts, CutDetectConfig, CutFormat, CutList};
use codeccap_core::document::{deserialize_document, parse_manifest, serialize_document, VideoRef};
use codeccap_core::forge::{self, Backends, ForgeConfig, PerSecondBaseline};
use codeccap_core::frames::{source_features, FrameDir};
use codeccap_core::qa::filter::{phase_a_classify, phase_b_classify};
use codeccap_core::qa::sampling::{allocate_budget as core_allocate, difficulty_targets as core_targets, BuildConfig};
use codeccap_core::qa::types::{Capability, EvalResult, Prediction, QaQuestion};
use codeccap_core::qa::{self, EvalConfig, MetricsReport, PoolConfig};
use codeccap_core::residual::{caption_segment, CaptionConfig, SegmentCaptions};
use codeccap_core::segment::{parse_iframe_timeline, plan_segments, probe_duration, SegmentPlan, SegmentationConfig, TimelineFormat};
use codeccap_core::text::word_count;
use codeccap_core::ErrorCategory;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(codeccap, CodeccapError, PyException);
create_exception!(codeccap, InputError, CodeccapError);
create_exception!(codeccap, BackendError, CodeccapError);
create_exception!(codeccap, InternalError, CodeccapError);

fn err(e: impl Into<codeccap_core::Error>) -> PyErr {
    let e: codeccap_core::Error = e.into();
    let msg = e.to_string();
    match e.category() {
        ErrorCategory::Input => InputError::new_err(msg),
        ErrorCategory::Backend => BackendError::new_err(msg),
        ErrorCategory::Internal => InternalError::new_err(msg),
    }
}

fn input(msg: impl std::fmt::Display) -> PyErr {
    InputError::new_err(msg.to_string())
}

/// Python value → Rust, through its JSON form.
fn extract<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(input)
}

fn extract_or_default<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        Some(o) if !o.is_none() => extract(o),
        _ => Ok(T::default()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| InternalError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A record/replay model client.
#[pyclass(frozen, module = "codeccap")]
struct Backend {
    client: ModelClient,
}

#[pymethods]
impl Backend {
    /// `profile` holds backend config fields (`name`, `endpoint`, `model`,
    /// `rpm_limit`, ...). `fixtures` and `mode` override the profile.
    #[new]
    #[pyo3(signature = (profile=None, *, fixtures=None, mode=None))]
    fn new(profile: Option<&Bound<'_, PyAny>>, fixtures: Option<PathBuf>, mode: Option<&str>) -> PyResult<Self> {
        let mut cfg: BackendConfig = extract_or_default(profile)?;
        if let Some(m) = mode {
            cfg.mode = m.parse::<BackendMode>().map_err(err)?;
        }
        if fixtures.is_some() {
            cfg.fixture_dir = fixtures;
        }
        Ok(Backend {
            client: ModelClient::new(cfg).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.client.id().to_string()
    }

    #[getter]
    fn mode(&self) -> String {
        format!("{:?}", self.client.config().mode).to_lowercase()
    }

    /// Requests handed to the network so far; always 0 in replay mode.
    #[getter]
    fn upstream_calls(&self) -> u64 {
        self.client.upstream_calls()
    }

    fn __repr__(&self) -> String {
        format!("Backend(name={:?}, mode={})", self.name(), self.mode())
    }
}

/// The four-level caption document of one video.
#[pyclass(frozen, from_py_object, module = "codeccap")]
#[derive(Clone)]
struct CaptionDocument {
    doc: codeccap_core::CaptionDocument,
}

#[pymethods]
impl CaptionDocument {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(CaptionDocument {
            doc: deserialize_document(text.as_bytes()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| err(codeccap_core::Error::io(&path, e)))?;
        Ok(CaptionDocument {
            doc: deserialize_document(&bytes).map_err(err)?,
        })
    }

    /// Canonical serialization, byte-identical to the CLI's output.
    fn to_json(&self) -> PyResult<String> {
        let bytes = serialize_document(&self.doc).map_err(|e| input(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| InternalError::new_err(e.to_string()))
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.doc)
    }

    #[getter]
    fn video_id(&self) -> &str {
        &self.doc.video.video_id
    }

    #[getter]
    fn segments(&self) -> Vec<(f64, f64)> {
        self.doc.segments.iter().map(|s| (s.start_s, s.end_s)).collect()
    }

    #[getter]
    fn anchors(&self) -> Vec<String> {
        self.doc.anchors.iter().map(|a| a.text.clone()).collect()
    }

    /// Residual captions per segment, each as (second, delta caption).
    #[getter]
    fn residuals(&self) -> Vec<Vec<(usize, String)>> {
        self.doc
            .residuals
            .iter()
            .map(|seg| seg.iter().map(|r| (r.frame_pair.second(), r.delta_caption.clone())).collect())
            .collect()
    }

    #[getter]
    fn scene_narratives(&self) -> Vec<String> {
        self.doc.scene_narratives.iter().map(|s| s.text.clone()).collect()
    }

    #[getter]
    fn video_narrative(&self) -> &str {
        &self.doc.video_narrative
    }

    fn validate(&self) -> PyResult<()> {
        self.doc.validate().map_err(|e| input(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.doc.segments.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "CaptionDocument(video_id={:?}, segments={}, residuals={})",
            self.doc.video.video_id,
            self.doc.segment_count(),
            self.doc.residual_count()
        )
    }
}

/// Segment plan for one video. `video` is a manifest entry dict, `iframes`
/// the probe JSON or plain list text, `cuts` the cut times in seconds.
#[pyfunction]
#[pyo3(signature = (video, iframes, cuts, config=None))]
fn segment<'py>(
    py: Python<'py>,
    video: &Bound<'py, PyAny>,
    iframes: &str,
    cuts: Vec<f64>,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut video: VideoRef = extract(video)?;
    let cfg: SegmentationConfig = extract_or_default(config)?;
    let timeline = parse_iframe_timeline(iframes.as_bytes(), TimelineFormat::Auto).map_err(err)?;
    if video.duration_s.is_none() {
        video.duration_s = probe_duration(iframes.as_bytes());
    }
    let cuts = CutList::new(cuts).map_err(err)?;
    let plan = plan_segments(&video, &timeline, &cuts, &cfg).map_err(err)?;
    to_py(py, &plan)
}

#[pyfunction]
fn import_cuts(text: &str) -> PyResult<Vec<f64>> {
    Ok(core_import_cuts(text.as_bytes(), CutFormat::Auto).map_err(err)?.times().to_vec())
}

/// Shot cuts detected from a directory of timestamp-named frames.
#[pyfunction]
#[pyo3(signature = (frames_dir, config=None))]
fn detect_cuts(py: Python<'_>, frames_dir: PathBuf, config: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<f64>> {
    let cfg: CutDetectConfig = extract_or_default(config)?;
    py.detach(|| -> Result<Vec<f64>, codeccap_core::Error> {
        cfg.validate()?;
        let frames = FrameDir::open(&frames_dir)?;
        let features = source_features(&frames, cfg.bins_per_channel)?;
        Ok(core_detect_cuts(&features, &cfg)?.times().to_vec())
    })
    .map_err(err)
}

/// Anchor and residual captions for every segment of a plan.
#[pyfunction]
#[pyo3(signature = (plan, frames_dir, backend, config=None))]
fn caption<'py>(
    py: Python<'py>,
    plan: &Bound<'py, PyAny>,
    frames_dir: PathBuf,
    backend: &Backend,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let plan: SegmentPlan = extract(plan)?;
    let cfg: CaptionConfig = extract_or_default(config)?;
    let client = &backend.client;
    let captions = py
        .detach(|| -> Result<Vec<SegmentCaptions>, codeccap_core::Error> {
            let frames = FrameDir::open(&frames_dir)?;
            plan.segments
                .iter()
                .map(|s| caption_segment(s, &frames, client, &cfg).map_err(Into::into))
                .collect()
        })
        .map_err(err)?;
    to_py(py, &captions)
}

/// Validates residual evidence and assembles the document. Returns the
/// document and the audit log.
#[pyfunction]
#[pyo3(signature = (plan, captions, config=None, text_backend=None))]
fn aggregate<'py>(
    py: Python<'py>,
    plan: &Bound<'py, PyAny>,
    captions: &Bound<'py, PyAny>,
    config: Option<&Bound<'py, PyAny>>,
    text_backend: Option<&Backend>,
) -> PyResult<(CaptionDocument, Bound<'py, PyAny>)> {
    let plan: SegmentPlan = extract(plan)?;
    let captions: Vec<SegmentCaptions> = extract(captions)?;
    let cfg: AggregateConfig = extract_or_default(config)?;
    let text = text_backend.map(|b| &b.client as &dyn codeccap_core::backend::Backend);
    let (doc, audit) = py
        .detach(|| aggregate_document(plan.video.clone(), &captions, text, &cfg))
        .map_err(err)?;
    Ok((CaptionDocument { doc }, to_py(py, &audit)?))
}

/// Runs the batch engine over a manifest file. Returns the job states and
/// corpus statistics.
#[pyfunction]
#[pyo3(signature = (manifest, state, backend, *, text_backend=None, config=None))]
fn run_forge<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    state: PathBuf,
    backend: &Backend,
    text_backend: Option<&Backend>,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: ForgeConfig = extract_or_default(config)?;
    let text = std::fs::read_to_string(&manifest).map_err(|e| err(codeccap_core::Error::io(&manifest, e)))?;
    let videos = parse_manifest(&text).map_err(err)?;
    let base = manifest.parent().map(PathBuf::from).unwrap_or_default();
    let backends = Backends {
        vision: &backend.client,
        text: text_backend.map(|b| &b.client as &dyn codeccap_core::backend::Backend),
    };
    let report = py
        .detach(|| forge::run_forge(&videos, &base, &state, &cfg, &backends))
        .map_err(err)?;
    to_py(py, &serde_json::json!({ "jobs": report.jobs, "stats": report.stats }))
}

/// Job states and finished documents of a forge state directory.
#[pyfunction]
fn load_state<'py>(py: Python<'py>, state: PathBuf) -> PyResult<(Bound<'py, PyAny>, Vec<CaptionDocument>)> {
    let (jobs, docs) = forge::load_state(&state).map_err(err)?;
    Ok((to_py(py, &jobs)?, docs.into_iter().map(|doc| CaptionDocument { doc }).collect()))
}

#[pyfunction]
#[pyo3(signature = (documents, baselines=None))]
fn corpus_stats<'py>(
    py: Python<'py>,
    documents: Vec<CaptionDocument>,
    baselines: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let baselines: BTreeMap<String, PerSecondBaseline> = extract_or_default(baselines)?;
    let docs: Vec<_> = documents.into_iter().map(|d| d.doc).collect();
    to_py(py, &forge::compute_stats(&docs, &baselines).map_err(err)?)
}

/// Compares a document with per-second captions (`{"video_id", "captions":
/// [{"time_s", "text"}]}`).
#[pyfunction]
fn redundancy<'py>(py: Python<'py>, document: &CaptionDocument, baseline: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let baseline: PerSecondBaseline = extract(baseline)?;
    to_py(py, &forge::redundancy_report(&document.doc, &baseline, &word_count).map_err(err)?)
}

/// Filters a JSON-lines question pool with the vote logs under `votes_dir`
/// and samples the benchmark.
#[pyfunction]
#[pyo3(signature = (pool, votes_dir, config=None, pool_config=None))]
fn build_benchmark<'py>(
    py: Python<'py>,
    pool: &str,
    votes_dir: PathBuf,
    config: Option<&Bound<'py, PyAny>>,
    pool_config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: BuildConfig = extract_or_default(config)?;
    let pool_cfg: PoolConfig = extract_or_default(pool_config)?;
    let questions = qa::ingest_pool(pool, &pool_cfg).map_err(err)?;
    let votes = qa::load_votes(&votes_dir).map_err(err)?;
    to_py(py, &qa::build_benchmark(questions, &votes, &cfg).map_err(err)?)
}

/// Answers each question from its video's caption. `captions` maps video
/// id to caption text.
#[pyfunction]
#[pyo3(signature = (questions, captions, backend, config=None, log_path=None))]
fn evaluate<'py>(
    py: Python<'py>,
    questions: &Bound<'py, PyAny>,
    captions: BTreeMap<String, String>,
    backend: &Backend,
    config: Option<&Bound<'py, PyAny>>,
    log_path: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let questions: Vec<QaQuestion> = extract(questions)?;
    let cfg: EvalConfig = extract_or_default(config)?;
    let client = &backend.client;
    let results = py
        .detach(|| qa::run_evaluation(&questions, &captions, client, &cfg, log_path.as_deref()))
        .map_err(err)?;
    to_py(py, &results)
}

#[pyfunction]
#[pyo3(signature = (results, seed=0, resamples=qa::DEFAULT_RESAMPLES, strict=false))]
fn compute_metrics<'py>(
    py: Python<'py>,
    results: &Bound<'py, PyAny>,
    seed: u64,
    resamples: usize,
    strict: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let results: Vec<EvalResult> = extract(results)?;
    let report = py
        .detach(|| qa::compute_metrics(&results, seed, resamples, strict))
        .map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn render_table(report: &Bound<'_, PyAny>) -> PyResult<String> {
    let report: MetricsReport = extract(report)?;
    Ok(qa::render_table(&report))
}

/// Questions per capability for a total budget. `available` maps a
/// capability name to its counts per difficulty (easy to very hard).
#[pyfunction]
fn allocate_budget(available: BTreeMap<String, [usize; 4]>, budget: usize) -> PyResult<BTreeMap<String, usize>> {
    let available = available
        .into_iter()
        .map(|(k, v)| Ok((k.parse::<Capability>().map_err(err)?, v)))
        .collect::<PyResult<BTreeMap<_, _>>>()?;
    Ok(core_allocate(&available, budget)
        .map_err(err)?
        .into_iter()
        .map(|(c, n)| (c.name().to_string(), n))
        .collect())
}

/// Per-difficulty targets (easy, medium, hard, very hard) for one quota.
#[pyfunction]
fn difficulty_targets(quota: usize) -> [usize; 4] {
    core_targets(quota)
}

fn prediction(obj: &Bound<'_, PyAny>) -> PyResult<Prediction> {
    extract(obj)
}

/// Phase A outcome for three answers (option index or "unknown").
#[pyfunction]
fn phase_a(ground_truth: u8, answers: [Bound<'_, PyAny>; 3]) -> PyResult<String> {
    let a = [prediction(&answers[0])?, prediction(&answers[1])?, prediction(&answers[2])?];
    Ok(serde_json::to_value(phase_a_classify(ground_truth, &a)).expect("plain enum").as_str().unwrap_or_default().to_string())
}

#[pyfunction]
fn phase_b(confirmations: [bool; 3]) -> String {
    serde_json::to_value(phase_b_classify(&confirmations))
        .expect("plain enum")
        .as_str()
        .unwrap_or_default()
        .to_string()
}

#[pymodule]
fn codeccap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("CodeccapError", py.get_type::<CodeccapError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("BackendError", py.get_type::<BackendError>())?;
    m.add("InternalError", py.get_type::<InternalError>())?;
    m.add("NO_VISIBLE_CHANGE", codeccap_core::text::NO_VISIBLE_CHANGE)?;
    m.add_class::<Backend>()?;
    m.add_class::<CaptionDocument>()?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(import_cuts, m)?)?;
    m.add_function(wrap_pyfunction!(detect_cuts, m)?)?;
    m.add_function(wrap_pyfunction!(caption, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(run_forge, m)?)?;
    m.add_function(wrap_pyfunction!(load_state, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(redundancy, m)?)?;
    m.add_function(wrap_pyfunction!(build_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(render_table, m)?)?;
    m.add_function(wrap_pyfunction!(allocate_budget, m)?)?;
    m.add_function(wrap_pyfunction!(difficulty_targets, m)?)?;
    m.add_function(wrap_pyfunction!(phase_a, m)?)?;
    m.add_function(wrap_pyfunction!(phase_b, m)?)?;
    Ok(())
}
