use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ForgeError;
use crate::aggregate::claims::split_sentences;
use crate::document::CaptionDocument;
use crate::text::{is_no_change, word_count};

/// Per-second captions of the same video, the redundant baseline the
/// anchor/residual representation is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerSecondBaseline {
    pub video_id: String,
    pub captions: Vec<TimedCaption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedCaption {
    pub time_s: f64,
    pub text: String,
}

impl PerSecondBaseline {
    pub fn word_count_with(&self, count: &dyn Fn(&str) -> usize) -> usize {
        self.captions.iter().map(|c| count(&c.text)).sum()
    }
}

/// Anchor plus residual text, the units a captioning model is trained on.
pub fn codec_word_count(doc: &CaptionDocument, count: &dyn Fn(&str) -> usize) -> usize {
    doc.anchors.iter().map(|a| count(&a.text)).sum::<usize>()
        + doc
            .residuals
            .iter()
            .flatten()
            .map(|r| count(&r.delta_caption))
            .sum::<usize>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub video_count: usize,
    pub total_hours: f64,
    pub median_segments: f64,
    pub mean_anchor_words: f64,
    pub mean_residuals_per_video: f64,
    pub mean_residual_words: f64,
    /// Baseline words over anchor+residual words, on the videos that have
    /// a baseline.
    pub token_efficiency_ratio: Option<f64>,
}

fn mean(sum: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

fn median(mut xs: Vec<usize>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_unstable();
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m] as f64
    } else {
        (xs[m - 1] + xs[m]) as f64 / 2.0
    }
}

fn duration(doc: &CaptionDocument) -> f64 {
    doc.video
        .duration_s
        .or_else(|| doc.segments.last().map(|s| s.end_s))
        .unwrap_or(0.0)
}

/// Corpus statistics over completed documents. Words are whitespace tokens.
pub fn compute_stats(
    docs: &[CaptionDocument],
    baselines: &BTreeMap<String, PerSecondBaseline>,
) -> Result<CorpusStats, ForgeError> {
    if docs.is_empty() {
        return Err(ForgeError::Input("statistics need at least one completed document".into()));
    }
    let anchors: Vec<usize> = docs.iter().flat_map(|d| d.anchors.iter().map(|a| word_count(&a.text))).collect();
    let residuals: Vec<usize> = docs
        .iter()
        .flat_map(|d| d.residuals.iter().flatten().map(|r| word_count(&r.delta_caption)))
        .collect();
    let (mut base, mut codec) = (0usize, 0usize);
    for d in docs {
        if let Some(b) = baselines.get(&d.video.video_id) {
            base += b.word_count_with(&word_count);
            codec += codec_word_count(d, &word_count);
        }
    }
    Ok(CorpusStats {
        video_count: docs.len(),
        total_hours: docs.iter().map(duration).sum::<f64>() / 3600.0,
        median_segments: median(docs.iter().map(|d| d.segments.len()).collect()),
        mean_anchor_words: mean(anchors.iter().sum(), anchors.len()),
        mean_residuals_per_video: mean(residuals.len(), docs.len()),
        mean_residual_words: mean(residuals.iter().sum(), residuals.len()),
        token_efficiency_ratio: (codec > 0).then(|| base as f64 / codec as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateSentence {
    pub sentence: String,
    /// Caption times at which the sentence occurs, first occurrence included.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub video_id: String,
    pub baseline_words: usize,
    pub codec_words: usize,
    /// baseline_words / codec_words
    pub ratio: f64,
    pub no_change_records: usize,
    /// Occurrences beyond the first of every repeated baseline sentence.
    pub duplicate_instances: usize,
    pub duplicates: Vec<DuplicateSentence>,
}

fn normalize(sentence: &str) -> String {
    sentence.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Compares a caption document with per-second captions of the same video.
/// `count` tokenizes text; pass [`word_count`] for whitespace words.
pub fn redundancy_report(
    doc: &CaptionDocument,
    baseline: &PerSecondBaseline,
    count: &dyn Fn(&str) -> usize,
) -> Result<RedundancyReport, ForgeError> {
    if doc.video.video_id != baseline.video_id {
        return Err(ForgeError::Input(format!(
            "document is for {} but the baseline is for {}",
            doc.video.video_id, baseline.video_id
        )));
    }
    let mut seen: BTreeMap<String, (usize, Vec<f64>)> = BTreeMap::new();
    for (i, c) in baseline.captions.iter().enumerate() {
        for s in split_sentences(&c.text) {
            let entry = seen.entry(normalize(&s)).or_insert((i, Vec::new()));
            entry.1.push(c.time_s);
        }
    }
    let mut duplicates: Vec<(usize, DuplicateSentence)> = seen
        .into_iter()
        .filter(|(_, (_, times))| times.len() > 1)
        .map(|(sentence, (first, times))| (first, DuplicateSentence { sentence, times }))
        .collect();
    duplicates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.sentence.cmp(&b.1.sentence)));
    let duplicates: Vec<DuplicateSentence> = duplicates.into_iter().map(|(_, d)| d).collect();

    let baseline_words = baseline.word_count_with(count);
    let codec_words = codec_word_count(doc, count);
    Ok(RedundancyReport {
        video_id: baseline.video_id.clone(),
        baseline_words,
        codec_words,
        ratio: if codec_words == 0 { f64::INFINITY } else { baseline_words as f64 / codec_words as f64 },
        no_change_records: doc
            .residuals
            .iter()
            .flatten()
            .filter(|r| is_no_change(&r.delta_caption))
            .count(),
        duplicate_instances: duplicates.iter().map(|d| d.times.len() - 1).sum(),
        duplicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{AnchorCaption, BoundaryKind, FramePair, ResidualRecord, SceneNarrative, Segment, VideoRef};

    fn doc(id: &str, segments: usize, anchor: &str, residuals: &[&str]) -> CaptionDocument {
        let segs: Vec<Segment> = (0..segments)
            .map(|k| Segment {
                index: k,
                start_s: k as f64 * 10.0,
                end_s: (k + 1) as f64 * 10.0,
                boundary_kind: if k == 0 { BoundaryKind::VideoStart } else { BoundaryKind::ContentCut },
            })
            .collect();
        let res: Vec<Vec<ResidualRecord>> = segs
            .iter()
            .map(|s| {
                (0..9)
                    .map(|i| ResidualRecord {
                        segment_index: s.index,
                        frame_pair: FramePair(i, i + 1),
                        delta_caption: residuals.get(i).copied().unwrap_or("No visible change.").into(),
                        spatial_tags: vec![],
                    })
                    .collect()
            })
            .collect();
        CaptionDocument::new(
            VideoRef::new(id, "x").with_duration(segments as f64 * 10.0),
            1.0,
            segs.clone(),
            segs.iter().map(|s| AnchorCaption::new(s.index, s.start_s, anchor)).collect(),
            res,
            segs.iter()
                .map(|s| SceneNarrative {
                    segment_index: s.index,
                    start_s: s.start_s,
                    end_s: s.end_s,
                    text: anchor.into(),
                })
                .collect(),
            "v".into(),
        )
        .unwrap()
    }

    #[test]
    fn median_of_odd_and_even_counts() {
        let docs = vec![doc("a", 2, "x", &[]), doc("b", 6, "x", &[]), doc("c", 10, "x", &[])];
        let s = compute_stats(&docs, &BTreeMap::new()).unwrap();
        assert_eq!(s.median_segments, 6.0);
        assert_eq!(s.video_count, 3);
        assert!((s.total_hours - 180.0 / 3600.0).abs() < 1e-12);
        let s = compute_stats(&docs[..2], &BTreeMap::new()).unwrap();
        assert_eq!(s.median_segments, 4.0);
    }

    #[test]
    fn stats_are_permutation_invariant() {
        let docs = vec![doc("a", 2, "one two", &["a b c"]), doc("b", 3, "x", &["d"]), doc("c", 1, "p q r s", &[])];
        let mut rev = docs.clone();
        rev.reverse();
        let none = BTreeMap::new();
        assert_eq!(compute_stats(&docs, &none).unwrap(), compute_stats(&rev, &none).unwrap());
        assert!(compute_stats(&[], &none).is_err());
    }

    #[test]
    fn word_means() {
        let d = doc("a", 1, "one two three four", &["a b", "c d e f"]);
        let s = compute_stats(&[d], &BTreeMap::new()).unwrap();
        assert_eq!(s.mean_anchor_words, 4.0);
        assert_eq!(s.mean_residuals_per_video, 9.0);
        // 2 + 4 + seven no-change records of 3 words
        assert_eq!(s.mean_residual_words, 3.0);
        assert_eq!(s.token_efficiency_ratio, None);
    }

    fn baseline(id: &str, texts: &[&str]) -> PerSecondBaseline {
        PerSecondBaseline {
            video_id: id.into(),
            captions: texts
                .iter()
                .enumerate()
                .map(|(i, t)| TimedCaption { time_s: i as f64, text: t.to_string() })
                .collect(),
        }
    }

    #[test]
    fn identical_single_sentences_give_ratio_one() {
        let mut d = doc("a", 1, "A red ball.", &[]);
        d.residuals[0].clear();
        let r = redundancy_report(&d, &baseline("a", &["A red ball."]), &word_count).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.duplicate_instances, 0);
    }

    #[test]
    fn anchors_only_ratio() {
        let mut d = doc("a", 1, "A red ball sits.", &[]);
        d.residuals[0].clear();
        let b = baseline("a", &["A red ball sits.", "A red ball sits.", "A red ball sits still."]);
        let r = redundancy_report(&d, &b, &word_count).unwrap();
        assert_eq!(r.ratio, 13.0 / 4.0);
        assert_eq!(r.duplicate_instances, 1);
        assert_eq!(r.duplicates[0].times, vec![0.0, 1.0]);
    }

    #[test]
    fn mismatched_ids_rejected() {
        let d = doc("a", 1, "x", &[]);
        assert!(matches!(redundancy_report(&d, &baseline("b", &["x"]), &word_count), Err(ForgeError::Input(_))));
    }
}
