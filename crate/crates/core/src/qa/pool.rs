//! Question pool ingestion. Each source benchmark is mapped onto
//! [`QaQuestion`] by a column map from configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::types::{FilterState, QaQuestion, SourceBenchmark, VoteRecord};
use super::QaError;

/// Field names of one source's records. `options` names either a single
/// array field or four scalar fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub id: String,
    pub video: String,
    pub question: String,
    pub options: Vec<String>,
    /// Option index, letter, or the text of the correct option.
    pub answer: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "id".into(),
            video: "video_id".into(),
            question: "question".into(),
            options: vec!["options".into()],
            answer: "answer".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    /// Field holding the source benchmark name.
    pub source_field: String,
    pub adapters: BTreeMap<SourceBenchmark, ColumnMap>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            source_field: "source".into(),
            adapters: BTreeMap::new(),
        }
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn resolve_answer(v: &Value, options: &[String; 4]) -> Option<u8> {
    if let Some(i) = v.as_u64() {
        return (i <= 3).then_some(i as u8);
    }
    let s = v.as_str()?.trim();
    let letter = s.trim_start_matches('(').trim_end_matches([')', '.']).trim();
    if letter.len() == 1 {
        let c = letter.as_bytes()[0].to_ascii_uppercase();
        if (b'A'..=b'D').contains(&c) {
            return Some(c - b'A');
        }
    }
    options
        .iter()
        .position(|o| o.trim().eq_ignore_ascii_case(s))
        .map(|i| i as u8)
}

fn ingest_record(obj: &Value, cfg: &PoolConfig) -> Result<QaQuestion, String> {
    let get = |k: &str| obj.get(k).ok_or_else(|| format!("missing field {k:?}"));
    let source: SourceBenchmark = scalar(get(&cfg.source_field)?)
        .ok_or("source is not a string")?
        .parse()
        .map_err(|e: QaError| e.to_string())?;
    let default = ColumnMap::default();
    let map = cfg.adapters.get(&source).unwrap_or(&default);
    let text = |k: &str| -> Result<String, String> { scalar(get(k)?).ok_or_else(|| format!("field {k:?} is not a scalar")) };

    let options: Vec<String> = match map.options.as_slice() {
        [one] => get(one)?
            .as_array()
            .ok_or_else(|| format!("field {one:?} is not an array"))?
            .iter()
            .map(|o| scalar(o).ok_or("non-scalar option".to_string()))
            .collect::<Result<_, _>>()?,
        many => many.iter().map(|k| text(k)).collect::<Result<_, _>>()?,
    };
    let options: [String; 4] = options
        .try_into()
        .map_err(|o: Vec<String>| format!("expected 4 options, found {}", o.len()))?;
    let answer = get(&map.answer)?;
    let ground_truth = resolve_answer(answer, &options).ok_or_else(|| format!("cannot resolve answer {answer}"))?;
    let source_id = text(&map.id)?;
    let q = QaQuestion {
        question_id: format!("{}:{source_id}", source.name()),
        source_benchmark: source,
        source_id,
        video_id: text(&map.video)?,
        question: text(&map.question)?,
        options,
        ground_truth,
        capability: None,
        difficulty: None,
        filter_state: FilterState::Pool,
        phase_a_matches: None,
    };
    q.validate().map_err(|e| e.to_string())?;
    Ok(q)
}

/// One JSON object per line; blank lines are skipped.
pub fn ingest_pool(text: &str, cfg: &PoolConfig) -> Result<Vec<QaQuestion>, QaError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let obj: Value = serde_json::from_str(line).map_err(|e| QaError::Input(format!("pool line {}: {e}", i + 1)))?;
        out.push(ingest_record(&obj, cfg).map_err(|e| QaError::Input(format!("pool line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Every `*.jsonl` file under `dir`, in file-name order.
pub fn load_votes(dir: &Path) -> Result<Vec<VoteRecord>, QaError> {
    let io = |p: &Path, source| QaError::Io {
        path: p.display().to_string(),
        source,
    };
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| io(&f, e))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: VoteRecord = serde_json::from_str(line)
                .map_err(|e| QaError::Input(format!("{} line {}: {e}", f.display(), i + 1)))?;
            rec.validate()?;
            out.push(rec);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_columns() {
        let line = r#"{"source":"MVBench","id":17,"video_id":"v9","question":"Q?","options":["a","b","c","d"],"answer":"(C)"}"#;
        let q = ingest_pool(line, &PoolConfig::default()).unwrap().remove(0);
        assert_eq!(q.question_id, "mvbench:17");
        assert_eq!(q.ground_truth, 2);
        assert_eq!(q.video_id, "v9");
    }

    #[test]
    fn mapped_columns_and_text_answers() {
        let mut cfg = PoolConfig::default();
        cfg.adapters.insert(
            SourceBenchmark::Videomme,
            ColumnMap {
                id: "qid".into(),
                video: "videoID".into(),
                question: "prompt".into(),
                options: vec!["o1".into(), "o2".into(), "o3".into(), "o4".into()],
                answer: "gt".into(),
            },
        );
        let line = r#"{"source":"videomme","qid":"x","videoID":"v","prompt":"Q","o1":"red","o2":"blue","o3":"green","o4":"black","gt":"Blue"}"#;
        let q = ingest_pool(line, &cfg).unwrap().remove(0);
        assert_eq!(q.ground_truth, 1);
        assert_eq!(q.options[3], "black");
    }

    #[test]
    fn bad_records_name_the_line() {
        let lines = "\n{\"source\":\"tomato\",\"id\":1,\"video_id\":\"v\",\"question\":\"Q\",\"options\":[\"a\",\"b\",\"c\"],\"answer\":0}";
        let err = ingest_pool(lines, &PoolConfig::default()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("4 options"), "{err}");
        let unknown_src = r#"{"source":"kinetics","id":1}"#;
        assert!(ingest_pool(unknown_src, &PoolConfig::default()).is_err());
    }
}
