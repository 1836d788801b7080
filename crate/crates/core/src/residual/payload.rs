use serde_json::Value;

use super::CaptionError;
use crate::document::FramePair;
use crate::text::find_json_span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRecord {
    /// Position of the element in the returned array.
    pub position: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedPayload {
    /// Valid records in reply order, indices local to the window.
    pub records: Vec<(FramePair, String)>,
    pub rejected: Vec<RejectedRecord>,
}

/// First JSON array in `text` whose elements are all objects.
fn locate_array(text: &str) -> Option<Vec<Value>> {
    let mut offset = 0;
    while offset < text.len() {
        let rest = &text[offset..];
        let span = find_json_span(rest, b'[', b']')?;
        let begin = span.as_ptr() as usize - rest.as_ptr() as usize;
        if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(span) {
            if items.iter().all(Value::is_object) {
                return Some(items);
            }
        }
        offset += begin + 1;
    }
    None
}

/// Pulls `{frame_pair, delta_caption}` records out of a model reply for a
/// window of `frame_count` frames. Unknown fields are ignored; records with
/// a bad pair or an empty caption are rejected individually.
pub fn parse_residual_payload(text: &str, frame_count: usize) -> Result<ParsedPayload, CaptionError> {
    let items = locate_array(text)
        .ok_or_else(|| CaptionError::Parse("no JSON array of residual objects found".into()))?;
    let mut out = ParsedPayload::default();
    let mut seen = std::collections::BTreeSet::new();
    for (position, item) in items.iter().enumerate() {
        let reject = |reason: String| RejectedRecord { position, reason };
        let pair = item.get("frame_pair").and_then(|p| {
            let arr = p.as_array()?;
            match arr.as_slice() {
                [a, b] => Some(FramePair(a.as_u64()? as usize, b.as_u64()? as usize)),
                _ => None,
            }
        });
        let Some(pair) = pair else {
            out.rejected.push(reject("frame_pair is not a pair of non-negative integers".into()));
            continue;
        };
        if !pair.is_adjacent() {
            out.rejected.push(reject(format!("frame_pair {pair} is not adjacent")));
            continue;
        }
        if pair.second() >= frame_count {
            out.rejected.push(reject(format!(
                "frame_pair {pair} is outside the window of {frame_count} frames"
            )));
            continue;
        }
        let caption = item
            .get("delta_caption")
            .and_then(Value::as_str)
            .map(str::trim)
            .unwrap_or_default();
        if caption.is_empty() {
            out.rejected.push(reject(format!("frame_pair {pair} has no delta_caption")));
            continue;
        }
        if !seen.insert(pair) {
            out.rejected.push(reject(format!("frame_pair {pair} repeated")));
            continue;
        }
        out.records.push((pair, caption.to_string()));
    }
    Ok(out)
}
