//! Versioned prompt templates. Their bytes feed request hashes, so any edit
//! invalidates recorded fixtures; the golden tests below catch that.

use crate::text::NO_VISIBLE_CHANGE;

pub const PROMPT_VERSION: &str = "v1";

pub const ANCHOR: &str = include_str!("../../prompts/v1/anchor.txt");
pub const RESIDUAL: &str = include_str!("../../prompts/v1/residual.txt");
pub const REPAIR: &str = include_str!("../../prompts/v1/repair.txt");

/// Replaces every `{{key}}` placeholder.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

pub fn anchor_prompt() -> String {
    ANCHOR.to_string()
}

/// Residual prompt for a window whose frames are numbered `0..times.len()`.
pub fn residual_prompt(times: &[f64], emit_no_change: bool) -> String {
    let frame_list: Vec<String> = times
        .iter()
        .enumerate()
        .map(|(i, t)| format!("- frame {i}: t = {t:.3} s"))
        .collect();
    let pair_list: Vec<String> = (1..times.len()).map(|j| format!("[{}, {}]", j - 1, j)).collect();
    let rule = if emit_no_change {
        format!(
            "Every pair listed below must appear exactly once. When nothing changed between the two frames, the delta_caption must be exactly \"{NO_VISIBLE_CHANGE}\""
        )
    } else {
        "Omit pairs in which nothing changed.".to_string()
    };
    render(
        RESIDUAL,
        &[
            ("frame_count", &times.len().to_string()),
            ("frame_list", &frame_list.join("\n")),
            ("no_change_rule", &rule),
            ("pair_list", &pair_list.join(", ")),
        ],
    )
}

pub fn repair_prompt(original: &str, previous_output: &str, problem: &str) -> String {
    render(
        REPAIR,
        &[
            ("problem", problem),
            ("previous_output", previous_output),
            ("original_prompt", original),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn digest(s: &str) -> String {
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    #[test]
    fn screen_coordinate_instruction_is_verbatim() {
        for t in [ANCHOR, RESIDUAL] {
            assert!(t.contains("follow screen coordinates rather than subject-centric"));
        }
    }

    #[test]
    fn anchor_forbids_motion() {
        assert!(ANCHOR.contains("Do not narrate motion"));
    }

    #[test]
    fn templates_are_byte_stable() {
        // Frozen digests; update together with re-recorded fixtures.
        let got = [digest(ANCHOR), digest(RESIDUAL), digest(REPAIR)];
        let frozen = [GOLDEN_ANCHOR, GOLDEN_RESIDUAL, GOLDEN_REPAIR];
        assert_eq!(got, frozen.map(String::from));
    }

    #[test]
    fn residual_prompt_lists_pairs() {
        let p = residual_prompt(&[3.0, 4.0, 5.0], true);
        assert!(p.contains("- frame 2: t = 5.000 s"));
        assert!(p.contains("[0, 1], [1, 2]"));
        assert!(p.contains("\"No visible change.\""));
        assert!(!p.contains("{{"));
        assert!(residual_prompt(&[0.0, 1.0], false).contains("Omit pairs"));
    }

    #[test]
    fn rendered_prompt_is_stable() {
        assert_eq!(digest(&residual_prompt(&[0.0, 1.0], true)), GOLDEN_RENDERED);
    }

    const GOLDEN_ANCHOR: &str = "122bb38706065e3297152383ecf1ec50caa9346197839ba1cbc3488916721e3c";
    const GOLDEN_RESIDUAL: &str = "4e0dac5524899c0b2d528dca18f2aca40cf0b78b040e81266b8fba01e975932f";
    const GOLDEN_REPAIR: &str = "f2d6e8b3f5fff30952ebd57fe6e45d6861c3404cf4c82861dad1822536604cdd";
    const GOLDEN_RENDERED: &str = "3b92cedff3b7c515d4fd9dccd3c950ef136e2d0ae0396ee08cb98305b098688a";
}
