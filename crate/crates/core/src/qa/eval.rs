//! Caption-then-predict evaluation: a text model answers each question
//! from the caption alone, with an `unknown` escape.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::types::{EvalResult, Prediction, QaQuestion};
use super::QaError;
use crate::backend::{Backend, BackendError, DecodeParams, ModelRequest};
use crate::document::{deserialize_document, CaptionDocument};
use crate::residual::prompts::render;
use crate::text::find_json_span;

pub const EVAL: &str = include_str!("../../prompts/v1/qa_eval.txt");
pub const EVAL_REPAIR: &str = include_str!("../../prompts/v1/qa_repair.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub max_tokens: u32,
    pub temperature: f64,
    /// Leave errored questions out of accuracy denominators instead of
    /// counting them as unknown.
    pub strict: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_tokens: 1024,
            temperature: 0.0,
            strict: false,
        }
    }
}

impl EvalConfig {
    fn params(&self) -> DecodeParams {
        DecodeParams {
            max_tokens: self.max_tokens,
            temperature: self.temperature,
        }
    }
}

pub fn eval_prompt(caption: &str, q: &QaQuestion) -> String {
    let options: Vec<String> = q
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {}", (b'A' + i as u8) as char, o.trim()))
        .collect();
    render(
        EVAL,
        &[
            ("caption", caption.trim()),
            ("question", q.question.trim()),
            ("options", &options.join("\n")),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAnswer {
    pub prediction: Prediction,
    pub rationale: String,
    pub observation: String,
}

fn parse_choice(token: &str) -> Option<Prediction> {
    let t = token.trim().trim_start_matches(['(', '[', '"']).trim();
    if t.len() >= 7 && t[..7].eq_ignore_ascii_case("unknown") {
        return Some(Prediction::UNKNOWN);
    }
    let mut chars = t.chars();
    let first = chars.next()?.to_ascii_uppercase();
    let rest_ok = chars.next().is_none_or(|c| !c.is_ascii_alphanumeric());
    match first {
        'A'..='D' if rest_ok => Some(Prediction::Option(first as u8 - b'A')),
        _ => None,
    }
}

fn answer_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^\W*(?:final\s+)?answer\W*[:=]\s*(.+)$").expect("valid regex"))
}

/// Reads the choice from a reply: the JSON object when there is one,
/// otherwise an `Answer: X` line.
pub fn parse_eval_reply(text: &str) -> Result<ParsedAnswer, String> {
    if let Some(span) = find_json_span(text, b'{', b'}') {
        let v: serde_json::Value = serde_json::from_str(span).map_err(|e| e.to_string())?;
        let field = |k: &str| v.get(k).and_then(|x| x.as_str()).unwrap_or("").trim().to_string();
        let prediction = match v.get("answer") {
            Some(serde_json::Value::String(s)) => parse_choice(s),
            Some(serde_json::Value::Number(n)) => n.as_u64().filter(|&i| i <= 3).map(|i| Prediction::Option(i as u8)),
            _ => None,
        }
        .ok_or_else(|| format!("\"answer\" must be A, B, C, D or unknown, got {}", v.get("answer").unwrap_or(&serde_json::Value::Null)))?;
        return Ok(ParsedAnswer {
            prediction,
            rationale: field("rationale"),
            observation: field("observation"),
        });
    }
    let caps = answer_line()
        .captures(text)
        .ok_or_else(|| "no JSON object or answer line found".to_string())?;
    let prediction = parse_choice(&caps[1]).ok_or_else(|| format!("unreadable answer {:?}", &caps[1]))?;
    Ok(ParsedAnswer {
        prediction,
        rationale: String::new(),
        observation: String::new(),
    })
}

fn result(q: &QaQuestion, parsed: ParsedAnswer, parse_failure: bool, errored: bool) -> EvalResult {
    EvalResult {
        question_id: q.question_id.clone(),
        capability: q.capability,
        correct: parsed.prediction.option() == Some(q.ground_truth),
        predicted: parsed.prediction,
        rationale: parsed.rationale,
        observation: parsed.observation,
        parse_failure,
        errored,
    }
}

fn unknown() -> ParsedAnswer {
    ParsedAnswer {
        prediction: Prediction::UNKNOWN,
        rationale: String::new(),
        observation: String::new(),
    }
}

/// Transport failures mark the question errored; anything else, notably a
/// missing replay fixture, aborts.
fn call(backend: &dyn Backend, prompt: String, cfg: &EvalConfig) -> Result<Option<String>, QaError> {
    match backend.invoke(&ModelRequest::text(prompt, cfg.params())) {
        Ok(resp) => Ok(Some(resp.text)),
        Err(BackendError::Transport { attempts, message }) => {
            log::warn!("evaluation request failed after {attempts} attempts: {message}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn evaluate_caption(
    caption: &str,
    q: &QaQuestion,
    backend: &dyn Backend,
    cfg: &EvalConfig,
) -> Result<EvalResult, QaError> {
    q.validate()?;
    if caption.trim().is_empty() {
        return Ok(result(q, unknown(), false, false));
    }
    let prompt = eval_prompt(caption, q);
    let Some(first) = call(backend, prompt.clone(), cfg)? else {
        return Ok(result(q, unknown(), false, true));
    };
    let problem = match parse_eval_reply(&first) {
        Ok(parsed) => return Ok(result(q, parsed, false, false)),
        Err(p) => p,
    };
    let repair = render(
        EVAL_REPAIR,
        &[("problem", &problem), ("previous_output", first.trim()), ("original_prompt", &prompt)],
    );
    let Some(second) = call(backend, repair, cfg)? else {
        return Ok(result(q, unknown(), true, true));
    };
    Ok(match parse_eval_reply(&second) {
        Ok(parsed) => result(q, parsed, false, false),
        Err(_) => result(q, unknown(), true, false),
    })
}

/// Text given to the answering model for one captioned video.
pub fn caption_text(doc: &CaptionDocument) -> String {
    if !doc.video_narrative.trim().is_empty() {
        return doc.video_narrative.clone();
    }
    doc.scene_narratives
        .iter()
        .map(|s| s.text.trim())
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Captions keyed by video id: `<id>.txt` holds plain text, `<id>.json` a
/// caption document. A video with both is an error.
pub fn load_caption_dir(dir: &Path) -> Result<BTreeMap<String, String>, QaError> {
    let io = |path: &Path, source| QaError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BTreeMap::new();
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let (Some(stem), Some(ext)) = (path.file_stem().and_then(|s| s.to_str()), path.extension()) else {
            continue;
        };
        let text = match ext.to_str() {
            Some("txt") => fs::read_to_string(&path).map_err(|e| io(&path, e))?,
            Some("json") => {
                let bytes = fs::read(&path).map_err(|e| io(&path, e))?;
                let doc = deserialize_document(&bytes)
                    .map_err(|e| QaError::Input(format!("{}: {e}", path.display())))?;
                caption_text(&doc)
            }
            _ => continue,
        };
        if out.insert(stem.to_string(), text).is_some() {
            return Err(QaError::Input(format!("two captions for video {stem}")));
        }
    }
    Ok(out)
}

/// Results already in an append-only log. A torn final line from an
/// interrupted run is ignored; damage anywhere else is an error.
pub fn read_eval_log(path: &Path) -> Result<Vec<EvalResult>, QaError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => {
            return Err(QaError::Io {
                path: path.display().to_string(),
                source: e,
            })
        }
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("{}: ignoring torn last line", path.display());
            }
            Err(e) => {
                return Err(QaError::Input(format!(
                    "{} line {}: {e}; remove the file to start over",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Cuts a partially written last line so appends start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<(), QaError> {
    let io = |source| QaError::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io(e)),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    OpenOptions::new()
        .write(true)
        .open(path)
        .and_then(|f| f.set_len(keep as u64))
        .map_err(io)
}

/// Evaluates every question, in parallel, skipping those already in
/// `log_path` and appending new results to it. Returns results in
/// benchmark order.
pub fn run_evaluation(
    questions: &[QaQuestion],
    captions: &BTreeMap<String, String>,
    backend: &dyn Backend,
    cfg: &EvalConfig,
    log_path: Option<&Path>,
) -> Result<Vec<EvalResult>, QaError> {
    let mut done: BTreeMap<String, EvalResult> = BTreeMap::new();
    let mut writer: Option<Mutex<File>> = None;
    if let Some(path) = log_path {
        let wanted: HashSet<&str> = questions.iter().map(|q| q.question_id.as_str()).collect();
        for r in read_eval_log(path)? {
            if wanted.contains(r.question_id.as_str()) {
                done.insert(r.question_id.clone(), r);
            }
        }
        drop_torn_tail(path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| QaError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        writer = Some(Mutex::new(file));
    }
    let pending: Vec<&QaQuestion> = questions.iter().filter(|q| !done.contains_key(&q.question_id)).collect();
    let fresh: Vec<EvalResult> = pending
        .par_iter()
        .map(|q| {
            let caption = captions.get(&q.video_id).map_or("", String::as_str);
            let r = evaluate_caption(caption, q, backend, cfg)?;
            if let Some(w) = &writer {
                let mut line = serde_json::to_string(&r).expect("serializable");
                line.push('\n');
                let mut f = w.lock().expect("log writer poisoned");
                f.write_all(line.as_bytes()).map_err(|e| QaError::Io {
                    path: log_path.unwrap().display().to_string(),
                    source: e,
                })?;
            }
            Ok(r)
        })
        .collect::<Result<_, QaError>>()?;
    done.extend(fresh.into_iter().map(|r| (r.question_id.clone(), r)));
    Ok(questions
        .iter()
        .map(|q| done.remove(&q.question_id).expect("evaluated"))
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::backend::{ModelResponse, Usage};
    use crate::qa::types::{Capability, FilterState, SourceBenchmark};

    struct Scripted {
        replies: Vec<Result<String, ()>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(replies: &[&str]) -> Self {
            Scripted {
                replies: replies.iter().map(|r| Ok(r.to_string())).collect(),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Backend for Scripted {
        fn invoke(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst);
            assert!(req.images.is_empty());
            match self.replies.get(i).cloned().unwrap_or(Err(())) {
                Ok(text) => Ok(ModelResponse {
                    text,
                    usage: Usage::default(),
                    backend_id: "scripted".into(),
                    refusal: false,
                }),
                Err(()) => Err(BackendError::Transport {
                    attempts: 3,
                    message: "connection reset".into(),
                }),
            }
        }
        fn id(&self) -> &str {
            "scripted"
        }
    }

    fn question() -> QaQuestion {
        QaQuestion {
            question_id: "q1".into(),
            source_benchmark: SourceBenchmark::Tempcompass,
            source_id: "1".into(),
            video_id: "v1".into(),
            question: "What color does the link text turn?".into(),
            options: ["Blue".into(), "Red".into(), "Green".into(), "Black".into()],
            ground_truth: 1,
            capability: Some(Capability::AttributeRecognition),
            difficulty: None,
            filter_state: FilterState::Normal,
            phase_a_matches: Some(3),
        }
    }

    #[test]
    fn prompt_offers_unknown() {
        let p = eval_prompt("A page.", &question());
        assert!(p.contains("special\ntoken unknown"));
        assert!(p.contains("B. Red\nC. Green"));
        assert!(!p.contains("{{"));
    }

    #[test]
    fn parses_json_and_answer_lines() {
        let r = parse_eval_reply(r#"Sure. {"rationale": "r", "observation": "text turns red", "answer": "B"}"#).unwrap();
        assert_eq!(r.prediction, Prediction::Option(1));
        assert_eq!(r.observation, "text turns red");
        assert_eq!(parse_eval_reply("Reasoning...\nAnswer: (C) Green").unwrap().prediction, Prediction::Option(2));
        assert_eq!(parse_eval_reply("**Final answer**: unknown").unwrap().prediction, Prediction::UNKNOWN);
        assert_eq!(parse_eval_reply(r#"{"answer": 3}"#).unwrap().prediction, Prediction::Option(3));
        assert!(parse_eval_reply(r#"{"answer": "E"}"#).is_err());
        assert!(parse_eval_reply("I think it is red").is_err());
        assert!(parse_eval_reply("Answer: Blueish").is_err());
    }

    #[test]
    fn correct_answer_from_caption() {
        let b = Scripted::new(&[r#"{"rationale":"The caption says so.","observation":"the text red","answer":"B"}"#]);
        let r = evaluate_caption("Hover turns the text red.", &question(), &b, &EvalConfig::default()).unwrap();
        assert!(r.correct && !r.parse_failure && !r.errored);
    }

    #[test]
    fn unknown_is_never_correct() {
        let b = Scripted::new(&[r#"{"rationale":"","observation":"","answer":"unknown"}"#]);
        let r = evaluate_caption("A cat sleeps.", &question(), &b, &EvalConfig::default()).unwrap();
        assert!(r.predicted.is_unknown() && !r.correct);
    }

    #[test]
    fn empty_caption_skips_backend() {
        let b = Scripted::new(&[]);
        let r = evaluate_caption("  ", &question(), &b, &EvalConfig::default()).unwrap();
        assert!(r.predicted.is_unknown() && !r.errored);
        assert_eq!(b.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn one_repair_then_unknown() {
        let b = Scripted::new(&["no idea", r#"{"answer":"B"}"#]);
        let r = evaluate_caption("x", &question(), &b, &EvalConfig::default()).unwrap();
        assert!(r.correct && !r.parse_failure);
        let b = Scripted::new(&["no idea", "still no idea", r#"{"answer":"B"}"#]);
        let r = evaluate_caption("x", &question(), &b, &EvalConfig::default()).unwrap();
        assert!(r.parse_failure && r.predicted.is_unknown());
        assert_eq!(b.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn transport_failure_marks_errored() {
        let b = Scripted::new(&[]);
        let r = evaluate_caption("x", &question(), &b, &EvalConfig::default()).unwrap();
        assert!(r.errored && r.predicted.is_unknown() && !r.correct);
    }

    #[test]
    fn log_resumes_and_tolerates_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("eval.jsonl");
        let mut qs = vec![question(), question()];
        qs[1].question_id = "q2".into();
        let captions: BTreeMap<String, String> = [("v1".to_string(), "text".to_string())].into();
        let b = Scripted::new(&[r#"{"answer":"B"}"#, r#"{"answer":"A"}"#]);
        let first = run_evaluation(&qs[..1], &captions, &b, &EvalConfig::default(), Some(&log)).unwrap();
        assert_eq!(first.len(), 1);
        let mut f = OpenOptions::new().append(true).open(&log).unwrap();
        f.write_all(b"{\"question_id\": \"q2\", \"capab").unwrap();
        drop(f);
        let all = run_evaluation(&qs, &captions, &b, &EvalConfig::default(), Some(&log)).unwrap();
        assert_eq!(b.calls.load(Ordering::SeqCst), 2);
        assert_eq!(all[0], first[0]);
        assert_eq!(all[1].predicted, Prediction::Option(0));
        assert_eq!(read_eval_log(&log).unwrap().len(), 2);
    }
}
