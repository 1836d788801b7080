//! Small text helpers shared by several stages.

/// Literal a residual caption carries when two adjacent frames are identical.
pub const NO_VISIBLE_CHANGE: &str = "No visible change.";

/// Number of whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// True for the reserved no-change literal, ignoring case, surrounding
/// whitespace and a missing trailing period.
pub fn is_no_change(text: &str) -> bool {
    let t = text.trim().trim_end_matches('.').trim();
    t.eq_ignore_ascii_case("no visible change")
}

/// Rounds seconds to millisecond precision.
pub fn round_ms(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

/// Extracts the first top-level JSON value of the requested shape (`[`..`]`
/// or `{`..`}`) from free text, e.g. a model reply that wraps the payload in
/// prose or a fenced code block.
pub fn find_json_span(text: &str, open: u8, close: u8) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(rel) = bytes[start..].iter().position(|&b| b == open) {
        let begin = start + rel;
        if let Some(end) = matching_close(bytes, begin, open, close) {
            let candidate = &text[begin..=end];
            if serde_json::from_str::<serde_json::Value>(candidate).is_ok() {
                return Some(candidate);
            }
        }
        start = begin + 1;
    }
    None
}

fn matching_close(bytes: &[u8], begin: usize, open: u8, close: u8) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(begin) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        if b == b'"' {
            in_string = true;
        } else if b == open {
            depth += 1;
        } else if b == close {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_words_on_whitespace() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("  a  b\tc\n"), 3);
        assert_eq!(word_count(NO_VISIBLE_CHANGE), 3);
    }

    #[test]
    fn recognizes_no_change_variants() {
        assert!(is_no_change("No visible change."));
        assert!(is_no_change(" no visible change "));
        assert!(!is_no_change("No visible change in the sky."));
    }

    #[test]
    fn finds_array_inside_prose_and_fence() {
        let text = "Here are the residuals:\n```json\n[{\"a\": \"]\"}]\n```\nDone.";
        assert_eq!(find_json_span(text, b'[', b']'), Some("[{\"a\": \"]\"}]"));
        assert_eq!(find_json_span("no json [here", b'[', b']'), None);
    }
}
