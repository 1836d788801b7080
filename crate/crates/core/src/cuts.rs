//! Content-cut signal: a colour-histogram detector over sampled frames and
//! an importer for cut lists produced by external shot detectors.

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CutError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid input: {0}")]
    Input(String),
}

/// Sorted, deduplicated content-cut instants in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutList {
    cut_times: Vec<f64>,
}

impl CutList {
    /// Sorts and deduplicates. A cut at exactly 0 marks the start of the
    /// first scene and is dropped.
    pub fn new(mut times: Vec<f64>) -> Result<Self, CutError> {
        if let Some(bad) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(CutError::Input(format!("cut time {bad} out of range")));
        }
        times.retain(|t| *t > 0.0);
        times.sort_by(f64::total_cmp);
        times.dedup();
        Ok(CutList { cut_times: times })
    }

    pub fn times(&self) -> &[f64] {
        &self.cut_times
    }

    pub fn len(&self) -> usize {
        self.cut_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cut_times.is_empty()
    }
}

/// Newline-separated seconds, millisecond precision.
pub fn serialize_cuts(cuts: &CutList) -> String {
    cuts.cut_times.iter().map(|t| format!("{t:.3}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutFormat {
    /// Delimited when any line contains a comma, plain otherwise.
    Auto,
    Plain,
    Delimited,
}

/// Column names accepted as the scene start time in delimited input.
const START_COLUMNS: [&str; 5] = [
    "start time (seconds)",
    "start_time_s",
    "start_s",
    "start_time",
    "start",
];

pub fn import_cuts(bytes: &[u8], format: CutFormat) -> Result<CutList, CutError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CutError::Parse {
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let format = match format {
        CutFormat::Auto if text.lines().any(|l| l.contains(',')) => CutFormat::Delimited,
        CutFormat::Auto => CutFormat::Plain,
        f => f,
    };
    let times = match format {
        CutFormat::Delimited => parse_delimited(text)?,
        _ => parse_plain(text)?,
    };
    CutList::new(times)
}

fn parse_seconds(value: &str, line: usize) -> Result<f64, CutError> {
    let t: f64 = value.trim().parse().map_err(|_| CutError::Parse {
        line,
        message: format!("`{}` is not a number of seconds", value.trim()),
    })?;
    if !t.is_finite() || t < 0.0 {
        return Err(CutError::Parse {
            line,
            message: format!("cut time {t} out of range"),
        });
    }
    Ok(t)
}

fn parse_plain(text: &str) -> Result<Vec<f64>, CutError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_seconds(l, i + 1))
        .collect()
}

/// Scene tables such as the shot detector's CSV export: a header row naming
/// a start-time column, possibly preceded by a timecode-list line.
fn parse_delimited(text: &str) -> Result<Vec<f64>, CutError> {
    let mut column = None;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match column {
            None => {
                column = fields.iter().position(|f| {
                    let f = f.to_ascii_lowercase();
                    START_COLUMNS.contains(&f.as_str())
                });
            }
            Some(c) => {
                let value = fields.get(c).ok_or_else(|| CutError::Parse {
                    line: i + 1,
                    message: format!("missing column {}", c + 1),
                })?;
                out.push(parse_seconds(value, i + 1)?);
            }
        }
    }
    if column.is_none() && !text.trim().is_empty() {
        return Err(CutError::Parse {
            line: 1,
            message: "no start-time column header found".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeature {
    pub time_s: f64,
    /// Per-channel histograms (R, G, B) concatenated, summing to 1.
    pub histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutDetectConfig {
    /// L1 histogram distance above which a cut is emitted, in (0, 2].
    pub threshold: f64,
    pub min_scene_len_s: f64,
    pub bins_per_channel: usize,
}

impl Default for CutDetectConfig {
    fn default() -> Self {
        CutDetectConfig {
            threshold: 0.4,
            min_scene_len_s: 1.0,
            bins_per_channel: 8,
        }
    }
}

impl CutDetectConfig {
    pub fn validate(&self) -> Result<(), CutError> {
        if !(self.threshold > 0.0 && self.threshold <= 2.0) {
            return Err(CutError::Input(format!("threshold {} not in (0, 2]", self.threshold)));
        }
        if !(self.min_scene_len_s > 0.0) {
            return Err(CutError::Input("min_scene_len_s must be > 0".into()));
        }
        if self.bins_per_channel == 0 || self.bins_per_channel > 256 {
            return Err(CutError::Input("bins_per_channel must be in 1..=256".into()));
        }
        Ok(())
    }
}

pub fn frame_feature(frame: &RgbImage, time_s: f64, bins_per_channel: usize) -> Result<FrameFeature, CutError> {
    let pixels = frame.width() as usize * frame.height() as usize;
    if pixels == 0 {
        return Err(CutError::Input(format!("empty raster at {time_s} s")));
    }
    if bins_per_channel == 0 || bins_per_channel > 256 {
        return Err(CutError::Input("bins_per_channel must be in 1..=256".into()));
    }
    let mut counts = vec![0u64; bins_per_channel * 3];
    for px in frame.pixels() {
        for (c, &v) in px.0.iter().enumerate() {
            let bin = v as usize * bins_per_channel / 256;
            counts[c * bins_per_channel + bin] += 1;
        }
    }
    let total = (pixels * 3) as f64;
    Ok(FrameFeature {
        time_s,
        histogram: counts.into_iter().map(|n| n as f64 / total).collect(),
    })
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Emits a cut at frame `i` when the histogram distance to frame `i - 1`
/// exceeds the threshold and the previous emitted cut is at least
/// `min_scene_len_s` earlier. The first cut is not held back.
pub fn detect_cuts(features: &[FrameFeature], cfg: &CutDetectConfig) -> Result<CutList, CutError> {
    cfg.validate()?;
    if let Some(w) = features.windows(2).find(|w| !(w[1].time_s > w[0].time_s)) {
        return Err(CutError::Input(format!(
            "frame times must be strictly increasing ({} then {})",
            w[0].time_s, w[1].time_s
        )));
    }
    if let Some(f) = features.iter().find(|f| f.histogram.len() != features[0].histogram.len()) {
        return Err(CutError::Input(format!("histogram length differs at {} s", f.time_s)));
    }
    let mut cuts = Vec::new();
    let mut last_cut: Option<f64> = None;
    for w in features.windows(2) {
        let d = l1_distance(&w[0].histogram, &w[1].histogram);
        if d <= cfg.threshold {
            continue;
        }
        let t = w[1].time_s;
        if last_cut.is_none_or(|prev| t - prev >= cfg.min_scene_len_s) {
            cuts.push(t);
            last_cut = Some(t);
        }
    }
    CutList::new(cuts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    fn solid(v: u8) -> RgbImage {
        RgbImage::from_pixel(4, 4, Rgb([v, v, v]))
    }

    fn features(frames: &[RgbImage]) -> Vec<FrameFeature> {
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| frame_feature(f, i as f64, 8).unwrap())
            .collect()
    }

    #[test]
    fn constant_frames_fill_one_bin_per_channel() {
        let black = frame_feature(&solid(0), 0.0, 8).unwrap();
        let white = frame_feature(&solid(255), 0.0, 8).unwrap();
        for c in 0..3 {
            assert!((black.histogram[c * 8] - 1.0 / 3.0).abs() < 1e-12);
            assert!((white.histogram[c * 8 + 7] - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((black.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((l1_distance(&black.histogram, &white.histogram) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn half_black_half_white() {
        let mut img = solid(0);
        for y in 0..4 {
            for x in 2..4 {
                img.put_pixel(x, y, Rgb([255, 255, 255]));
            }
        }
        let f = frame_feature(&img, 0.0, 8).unwrap();
        for c in 0..3 {
            assert!((f.histogram[c * 8] - 1.0 / 6.0).abs() < 1e-12);
            assert!((f.histogram[c * 8 + 7] - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_raster_rejected() {
        assert!(frame_feature(&RgbImage::new(0, 3), 0.0, 8).is_err());
    }

    #[test]
    fn identical_frames_have_no_cuts() {
        let f = features(&vec![solid(90); 10]);
        assert!(detect_cuts(&f, &CutDetectConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn black_then_white_cuts_once() {
        let mut frames = vec![solid(0); 3];
        frames.extend(vec![solid(255); 4]);
        let cfg = CutDetectConfig {
            threshold: 0.5,
            ..Default::default()
        };
        assert_eq!(detect_cuts(&features(&frames), &cfg).unwrap().times(), &[3.0]);
    }

    #[test]
    fn alternating_frames_respect_min_scene_len() {
        let frames: Vec<RgbImage> = (0..8).map(|i| solid(if i % 2 == 0 { 0 } else { 255 })).collect();
        let cfg = CutDetectConfig {
            threshold: 0.5,
            min_scene_len_s: 2.0,
            ..Default::default()
        };
        assert_eq!(detect_cuts(&features(&frames), &cfg).unwrap().times(), &[1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn unsorted_features_rejected() {
        let mut f = features(&[solid(0), solid(0)]);
        f[1].time_s = 0.0;
        assert!(detect_cuts(&f, &CutDetectConfig::default()).is_err());
    }

    #[test]
    fn import_examples() {
        assert_eq!(import_cuts(b"3.0\n21.0\n25.0", CutFormat::Auto).unwrap().times(), &[3.0, 21.0, 25.0]);
        assert!(import_cuts(b"", CutFormat::Auto).unwrap().is_empty());
        assert_eq!(import_cuts(b"5.0\n5.0\n", CutFormat::Auto).unwrap().times(), &[5.0]);
        match import_cuts(b"1.0\n\nx\n", CutFormat::Plain) {
            Err(CutError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn import_scene_table() {
        let csv = "Timecode List:,00:00:03.000,00:00:21.000\n\
                   Scene Number,Start Frame,Start Timecode,Start Time (seconds),End Frame\n\
                   1,1,00:00:00.000,0.000,75\n\
                   2,76,00:00:03.000,3.000,525\n\
                   3,526,00:00:21.000,21.000,625\n";
        assert_eq!(import_cuts(csv.as_bytes(), CutFormat::Auto).unwrap().times(), &[3.0, 21.0]);
        assert!(import_cuts(b"a,b\n1,2\n", CutFormat::Delimited).is_err());
    }

    proptest! {
        #[test]
        fn cuts_respect_min_scene_len(values in proptest::collection::vec(0u8..=255, 2..60), min_len in 1u32..5, thr in 1u32..20) {
            let frames: Vec<RgbImage> = values.iter().map(|&v| solid(v)).collect();
            let cfg = CutDetectConfig { threshold: thr as f64 / 10.0, min_scene_len_s: min_len as f64, bins_per_channel: 8 };
            let cuts = detect_cuts(&features(&frames), &cfg).unwrap();
            for w in cuts.times().windows(2) {
                prop_assert!(w[1] - w[0] >= cfg.min_scene_len_s);
            }
        }

        #[test]
        fn relabelled_bins_give_same_cuts(values in proptest::collection::vec(0u8..=255, 2..40), perm_seed in any::<u64>()) {
            let frames: Vec<RgbImage> = values.iter().map(|&v| solid(v)).collect();
            let feats = features(&frames);
            // One fixed permutation of bin labels applied to every frame.
            let mut perm: Vec<usize> = (0..24).collect();
            let mut s = perm_seed;
            for i in (1..perm.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<FrameFeature> = feats.iter().map(|f| FrameFeature {
                time_s: f.time_s,
                histogram: perm.iter().map(|&p| f.histogram[p]).collect(),
            }).collect();
            let cfg = CutDetectConfig::default();
            prop_assert_eq!(detect_cuts(&feats, &cfg).unwrap(), detect_cuts(&permuted, &cfg).unwrap());
        }

        #[test]
        fn import_inverts_serialize(ms in proptest::collection::vec(1u32..10_000_000, 0..50)) {
            let cuts = CutList::new(ms.iter().map(|&m| m as f64 / 1000.0).collect()).unwrap();
            prop_assert_eq!(import_cuts(serialize_cuts(&cuts).as_bytes(), CutFormat::Auto).unwrap(), cuts);
        }
    }
}
