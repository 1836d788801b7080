//! Synthetic test corpus: three video bundles with per-second frames, an
//! authored caption script per video, and replay fixtures recorded from
//! those scripts. The committed copy lives in `tests/data/corpus`.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use codeccap_core::backend::{
    BackendConfig, BackendMode, ModelClient, ModelRequest, ModelResponse, Transport, TransportError, Usage,
    VirtualClock,
};
use codeccap_core::forge::stages::{caption_video, segment_video};
use codeccap_core::forge::VideoBundle;
use codeccap_core::text::NO_VISIBLE_CHANGE;
use codeccap_core::VideoRef;
use image::{Rgb, RgbImage};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn corpus_dir() -> PathBuf {
    data_dir().join("corpus")
}

pub fn update_golden() -> bool {
    std::env::var_os("UPDATE_GOLDEN").is_some_and(|v| v == "1")
}

/// One scripted video: scene colours by start time, anchor text by segment
/// start, and the change arriving at each second.
pub struct Script {
    pub id: &'static str,
    pub duration_s: u32,
    pub timeline: Timeline,
    pub cuts: Option<&'static str>,
    pub scenes: &'static [(u32, [u8; 3])],
    pub anchors: &'static [(u32, &'static str)],
    pub changes: &'static [(u32, &'static str)],
    pub baseline: &'static [(u32, u32, &'static str)],
}

pub enum Timeline {
    Probe(&'static [f64]),
    Plain(&'static [f64]),
}

const BANNER_ANCHOR: &str = "An elderly man in a charcoal-gray suit, white shirt and brown polka-dot tie holds a silver mesh microphone near his chin. \
He wears thin-rimmed glasses and looks toward the right of the frame. Behind him hangs a blue campaign banner reading \
\"REALTORS FOR ISAKSON\" above the line \"Vote Johnny Isakson For U.S. Senate\". The background is softly blurred and evenly lit.";

const KEMP_ANCHOR: &str = "A white webpage headed \"GOVERNOR BRIAN P. KEMP\" shows a section titled \"U.S. Senate Submissions\". \
Below the title sits a single downloadable file link in blue text with a paperclip icon to its left. \
A mouse cursor rests near the right edge of the page.";

const STAGE_ANCHOR: &str = "A stage with a dark backdrop and a wooden lectern at center. Two flags stand to the left of the lectern. \
Spotlights form bright circles on the floor and the audience seats in the foreground are empty.";

pub const CLIP31: Script = Script {
    id: "clip31",
    duration_s: 31,
    timeline: Timeline::Probe(&[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0]),
    cuts: Some("3\n21\n25\n"),
    scenes: &[(0, [200, 170, 150]), (3, [245, 245, 250]), (21, [200, 170, 150]), (25, [30, 30, 60])],
    anchors: &[(0, BANNER_ANCHOR), (3, KEMP_ANCHOR), (21, BANNER_ANCHOR), (25, STAGE_ANCHOR)],
    changes: &[
        (4, "Hover on the link turns the text red and adds an underline."),
        (5, "The page is replaced by the resume of Adam Fouche."),
        (6, "The document scrolls down."),
        (7, "The document scrolls down."),
        (8, "The resume of Adam Fouche is replaced by the resume of Andrew Heilman."),
        (9, "The document scrolls down."),
        (10, "The document scrolls down."),
        (11, "The resume of Andrew Heilman is replaced by the resume of Carla Jimenez."),
        (13, "The resume of Carla Jimenez is replaced by the resume of Dennis Okafor."),
        (14, "The document scrolls down."),
        (15, "The document scrolls down."),
        (16, "The resume of Dennis Okafor is replaced by the resume of Melody T. McCloud."),
        (17, "The document scrolls down."),
        (18, "The document scrolls down."),
        (26, "The stage is replaced by a TV studio with two anchors in front of a video wall."),
    ],
    baseline: &[
        (0, 3, "Close-up of an elderly white man with thin-rimmed glasses and deep wrinkles gazing to the right. \
                Soft lighting and a blurred background. A watermark reads 11alive.com / AP IMAGES."),
        (3, 4, "The view cuts to a webpage headed GOVERNOR BRIAN P. KEMP. A heading reads U.S. Senate Submissions. \
                A paperclip icon sits beside a link. A cursor is on the right."),
        (4, 5, "The same webpage is shown. The cursor moves onto the link. The link text becomes underlined."),
        (5, 8, "A resume page for Adam Fouche is displayed with a name header, section titles and bulleted lists."),
        (8, 11, "A resume page for Andrew Heilman is displayed with a name header, section titles and bulleted lists."),
        (11, 13, "A resume page for Carla Jimenez is displayed with a name header, section titles and bulleted lists."),
        (13, 16, "A resume page for Dennis Okafor is displayed with a name header, section titles and bulleted lists."),
        (16, 21, "A resume page for Melody T. McCloud is displayed with a name header, section titles and bulleted lists."),
        (21, 25, "Close-up of an elderly white man with thin-rimmed glasses and deep wrinkles gazing to the right. \
                Soft lighting and a blurred background. A watermark reads 11alive.com / AP IMAGES."),
        (25, 26, "A stage with a lectern and flags under spotlights. The seats in front are empty."),
        (26, 31, "A wide TV studio shot with two anchors at a desk. A large video wall glows behind them."),
    ],
};

pub const STUDIO: Script = Script {
    id: "studio",
    duration_s: 12,
    timeline: Timeline::Probe(&[0.0, 2.0, 4.0, 6.0, 8.0, 10.0]),
    cuts: Some("6\n"),
    scenes: &[(0, [90, 20, 20]), (6, [20, 90, 20])],
    anchors: &[
        (0, "A news presenter in a navy blazer sits at a glass desk. A red ticker runs along the bottom of the screen."),
        (6, "A street reporter in a green raincoat stands on a wet sidewalk holding a microphone."),
    ],
    changes: &[
        (2, "The presenter turns toward the camera."),
        (3, "The ticker text changes to WEATHER ALERT."),
        (8, "A bus passes behind the reporter."),
        (9, "The reporter lifts an umbrella."),
    ],
    baseline: &[
        (0, 6, "A news presenter sits at a glass desk with a red ticker below."),
        (6, 12, "A reporter in a green raincoat stands on a wet sidewalk."),
    ],
};

pub const LECTURE: Script = Script {
    id: "lecture",
    duration_s: 20,
    timeline: Timeline::Plain(&[0.0, 1.0, 4.0, 5.0, 10.0, 11.0, 15.0, 16.0]),
    cuts: None,
    scenes: &[(0, [240, 240, 200]), (10, [20, 20, 140])],
    anchors: &[
        (0, "A whiteboard covered in handwritten equations. A lecturer in a gray sweater stands at the left holding a marker."),
        (10, "A slide with a blue background shows a bar chart titled Results with four bars."),
    ],
    changes: &[
        (3, "The lecturer writes a new line at the bottom of the board."),
        (6, "The lecturer steps to the right."),
        (7, "The lecturer steps to the right."),
        (13, "A fifth bar appears on the chart."),
    ],
    baseline: &[
        (0, 10, "A lecturer writes equations on a whiteboard."),
        (10, 20, "A blue slide shows a bar chart titled Results."),
    ],
};

pub const SCRIPTS: [&Script; 3] = [&CLIP31, &STUDIO, &LECTURE];

impl Script {
    fn scene_colour(&self, t: u32) -> [u8; 3] {
        self.scenes.iter().rev().find(|(s, _)| *s <= t).expect("scene at 0").1
    }

    pub fn anchor(&self, t: f64) -> Option<&'static str> {
        self.anchors.iter().find(|(s, _)| (*s as f64 - t).abs() < 1e-6).map(|a| a.1)
    }

    /// Change between the frame at `t - 1` and the frame at `t`.
    pub fn change(&self, t: f64) -> &'static str {
        self.changes
            .iter()
            .find(|(s, _)| (*s as f64 - t).abs() < 1e-6)
            .map_or(NO_VISIBLE_CHANGE, |c| c.1)
    }

    /// Plain key-frame lists carry no duration, so the manifest supplies it.
    pub fn video_ref(&self) -> VideoRef {
        let v = VideoRef::new(self.id, format!("videos/{}", self.id));
        match self.timeline {
            Timeline::Probe(_) => v,
            Timeline::Plain(_) => v.with_duration(self.duration_s as f64),
        }
    }

    /// Flat scene colour with a per-second marker pixel so that every frame
    /// has distinct bytes but near-identical histograms.
    fn frame(&self, t: u32) -> RgbImage {
        let [r, g, b] = self.scene_colour(t);
        let mut img = RgbImage::from_pixel(16, 16, Rgb([r, g, b]));
        img.put_pixel(t % 16, t / 16, Rgb([r ^ 0x40, g, b]));
        img
    }

    fn write_bundle(&self, dir: &Path) {
        std::fs::create_dir_all(dir.join("frames")).unwrap();
        for t in 0..self.duration_s {
            self.frame(t).save(dir.join("frames").join(format!("{t:03}.png"))).unwrap();
        }
        match self.timeline {
            Timeline::Probe(times) => {
                let frames: Vec<_> = times
                    .iter()
                    .map(|t| serde_json::json!({"media_type": "video", "pict_type": "I", "pts_time": format!("{t:.6}")}))
                    .collect();
                let probe = serde_json::json!({
                    "frames": frames,
                    "format": {"duration": format!("{:.6}", self.duration_s as f64)},
                });
                std::fs::write(dir.join("probe.json"), serde_json::to_string_pretty(&probe).unwrap() + "\n").unwrap();
            }
            Timeline::Plain(times) => {
                let text: String = times.iter().map(|t| format!("{t}\n")).collect();
                std::fs::write(dir.join("iframes.txt"), text).unwrap();
            }
        }
        if let Some(cuts) = self.cuts {
            std::fs::write(dir.join("cuts.txt"), cuts).unwrap();
        }
        let captions: Vec<_> = self
            .baseline
            .iter()
            .flat_map(|&(from, to, text)| {
                let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
                (from..to).map(move |t| serde_json::json!({"time_s": t as f64, "text": text.clone()}))
            })
            .collect();
        let baseline = serde_json::json!({"video_id": self.id, "captions": captions});
        std::fs::write(dir.join("baseline.json"), serde_json::to_string_pretty(&baseline).unwrap() + "\n").unwrap();
    }
}

/// Answers caption requests from a script: one image is an anchor request,
/// several are a residual window.
pub struct ScriptTransport(pub &'static Script);

impl ScriptTransport {
    pub fn reply(&self, req: &ModelRequest) -> String {
        let times: Vec<f64> = req.images.iter().map(|i| i.time_s).collect();
        if times.len() == 1 {
            return self.0.anchor(times[0]).expect("anchor scripted for every segment start").to_string();
        }
        let records: Vec<_> = (1..times.len())
            .map(|j| serde_json::json!({"frame_pair": [j - 1, j], "delta_caption": self.0.change(times[j])}))
            .collect();
        format!("```json\n{}\n```", serde_json::to_string_pretty(&records).unwrap())
    }
}

impl Transport for ScriptTransport {
    fn send(&self, req: &ModelRequest) -> Result<ModelResponse, TransportError> {
        Ok(ModelResponse {
            text: self.reply(req),
            usage: Usage::default(),
            backend_id: "script".into(),
            refusal: false,
        })
    }
}

pub fn replay_config(fixtures: &Path) -> BackendConfig {
    BackendConfig {
        name: "replay".into(),
        mode: BackendMode::Replay,
        fixture_dir: Some(fixtures.to_path_buf()),
        ..Default::default()
    }
}

pub fn replay_client(fixtures: &Path) -> ModelClient {
    ModelClient::new(replay_config(fixtures)).unwrap()
}

/// Writes bundles, manifest and recorded vision fixtures under `root`.
pub fn write_corpus(root: &Path) {
    let fixtures = root.join("replay");
    let mut manifest = String::new();
    for script in SCRIPTS {
        let video = script.video_ref();
        script.write_bundle(&root.join(&video.path));
        let mut line = serde_json::json!({"video_id": video.video_id, "path": video.path});
        if let Some(d) = video.duration_s {
            line["duration_s"] = d.into();
        }
        manifest += &line.to_string();
        manifest.push('\n');

        let cfg = BackendConfig {
            name: "script".into(),
            mode: BackendMode::Record,
            fixture_dir: Some(fixtures.clone()),
            rpm_limit: 1_000_000,
            ..Default::default()
        };
        let client = ModelClient::with_transport(cfg, Arc::new(ScriptTransport(script)), Arc::new(VirtualClock::default()))
            .unwrap();
        let bundle = VideoBundle::for_video(&video, root).unwrap();
        let plan = segment_video(&video, &bundle, &Default::default(), &Default::default()).unwrap();
        caption_video(&plan, &bundle, &client, &Default::default()).unwrap();
    }
    std::fs::write(root.join("manifest.jsonl"), manifest).unwrap();
}

/// Relative path and bytes of every file under `root`, sorted.
pub fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    if root.exists() {
        walk(root, root, &mut out);
    }
    out.sort();
    out
}
