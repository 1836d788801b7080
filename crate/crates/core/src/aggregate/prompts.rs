use crate::residual::prompts::render;

pub const CLAIMS: &str = include_str!("../../prompts/v1/claims.txt");
pub const SCENE: &str = include_str!("../../prompts/v1/scene.txt");
pub const VIDEO: &str = include_str!("../../prompts/v1/video.txt");

pub fn claims_prompt(records: &str) -> String {
    render(CLAIMS, &[("records", records)])
}

pub fn scene_prompt(anchor: &str, evidence: &[String]) -> String {
    let list = if evidence.is_empty() {
        "(none)".to_string()
    } else {
        evidence.iter().map(|e| format!("- {e}")).collect::<Vec<_>>().join("\n")
    };
    render(SCENE, &[("anchor", anchor.trim()), ("evidence", &list)])
}

pub fn video_prompt(scenes: &[String], omitted_subjects: &[String]) -> String {
    let omissions = if omitted_subjects.is_empty() {
        String::new()
    } else {
        format!(
            " Leave out conflicting statements about: {}.",
            omitted_subjects.join(", ")
        )
    };
    let body: Vec<String> = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Scene {}:\n{}", i + 1, s.trim()))
        .collect();
    render(VIDEO, &[("omissions", &omissions), ("scenes", &body.join("\n\n"))])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompts_render_fully() {
        assert!(!claims_prompt("0. x").contains("{{"));
        let s = scene_prompt("A room.", &["[4.0s] A door opens.".into()]);
        assert!(s.contains("- [4.0s] A door opens.") && !s.contains("{{"));
        let v = video_prompt(&["a".into(), "b".into()], &["ball".into()]);
        assert!(v.contains("Scene 2:\nb") && v.contains("about: ball."));
    }
}
